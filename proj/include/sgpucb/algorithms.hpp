#pragma once

// SGP-UCB and the baselines it is compared against. Every runner consumes a
// ProblemInstance plus an AlgoConfig and returns a RegretTrace of length T.
// Runs own their posteriors and RNG, so they can be executed concurrently.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sgpucb/environment.hpp"
#include "sgpucb/features.hpp"
#include "sgpucb/gp.hpp"
#include "sgpucb/phase_length.hpp"
#include "sgpucb/reachability.hpp"

namespace sgpucb {

enum class Phase1Rule { Uniform, MaxVariance };

inline const char* to_string(Phase1Rule r) { return r == Phase1Rule::Uniform ? "uniform" : "max_variance"; }

struct TPrimePolicy {
  enum class Kind { TheoreticalFinite, TheoreticalInfinite, Fixed, Plateau };

  Kind kind = Kind::Plateau;
  int fixed = 0;
  int window = 20;
  int cap = 100;
  /// Nodes per dimension of the quadrature map used by TheoreticalInfinite.
  int qff_nodes = 4;

  static TPrimePolicy theoretical_finite() { return {.kind = Kind::TheoreticalFinite}; }
  static TPrimePolicy theoretical_infinite(int qff_nodes = 4) {
    return {.kind = Kind::TheoreticalInfinite, .qff_nodes = qff_nodes};
  }
  static TPrimePolicy fixed_length(int tprime) { return {.kind = Kind::Fixed, .fixed = tprime}; }
  static TPrimePolicy plateau(int window = 20, int cap = 100) {
    return {.kind = Kind::Plateau, .window = window, .cap = cap};
  }

  bool operator==(const TPrimePolicy&) const = default;
};

inline std::string to_string(const TPrimePolicy& p) {
  switch (p.kind) {
    case TPrimePolicy::Kind::TheoreticalFinite: return "theoretical_finite";
    case TPrimePolicy::Kind::TheoreticalInfinite: return "theoretical_infinite";
    case TPrimePolicy::Kind::Fixed: return "fixed(" + std::to_string(p.fixed) + ")";
    case TPrimePolicy::Kind::Plateau:
      return "plateau(" + std::to_string(p.window) + "," + std::to_string(p.cap) + ")";
  }
  return "?";
}

struct AlgoConfig {
  double delta = 0.01;
  /// Slack in the definition of D_eps^s; also the band-width target of the
  /// SafeOpt switch and StageOpt stopping rule.
  double epsilon = 0.01;
  int T = 500;
  Phase1Rule phase1_rule = Phase1Rule::Uniform;
  TPrimePolicy tprime_policy = TPrimePolicy::plateau();
  /// Noise std assumed by the GP models; the instance sigma when unset.
  /// Needed for noiseless instances, where the model still requires sigma > 0.
  std::optional<double> model_noise_std;
  int refit_interval = kDefaultRefitInterval;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw InputError("delta must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw InputError("epsilon must be > 0");
    if (T < 1) throw InputError("T must be >= 1");
    if (model_noise_std && !(*model_noise_std > 0.0)) throw InputError("model_noise_std must be > 0");
    const TPrimePolicy& p = tprime_policy;
    if (p.kind == TPrimePolicy::Kind::Fixed && (p.fixed < 0 || p.fixed > T))
      throw InputError("fixed T' must lie in [0, T]");
    if (p.kind == TPrimePolicy::Kind::Plateau && (p.window < 1 || p.cap < 1 || p.cap > T))
      throw InputError("plateau policy needs window >= 1 and 1 <= cap <= T");
    if (p.kind == TPrimePolicy::Kind::TheoreticalInfinite && p.qff_nodes < 1)
      throw InputError("qff_nodes must be >= 1");
  }
};

namespace detail {

inline double model_noise_var(const ProblemInstance& inst, const AlgoConfig& cfg) {
  const double s = cfg.model_noise_std.value_or(inst.sigma);
  if (!(s > 0.0))
    throw InputError("model noise std must be > 0 (set model_noise_std for noiseless instances)");
  return s * s;
}

inline void check_inputs(const ProblemInstance& inst, const AlgoConfig& cfg) {
  cfg.validate();
  inst.validate();
}

inline bool contains(std::span<const int> sorted, int i) {
  return std::binary_search(sorted.begin(), sorted.end(), i);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Selection primitives

/// D_t^s = {i : l_g(i) >= h}, ascending.
inline std::vector<int> estimated_safe_set(const CandidatePosterior& g_post, double beta_t, double h) {
  std::vector<int> out;
  const double root = std::sqrt(beta_t);
  for (Eigen::Index i = 0; i < g_post.size(); ++i)
    if (g_post.mean(i) - root * g_post.stddev(i) >= h) out.push_back(static_cast<int>(i));
  return out;
}

inline std::vector<int> estimated_safe_set(const GaussianProcess& g_post, double beta_t,
                                           const DecisionSet& ds, double h) {
  std::vector<int> out;
  for (Eigen::Index i = 0; i < ds.size(); ++i)
    if (confidence_bounds(g_post, beta_t, ds.point(i)).lower >= h) out.push_back(static_cast<int>(i));
  return out;
}

/// sigma_g(i)^2 <= eps^2 / (4 beta_t). When g(i) >= h + eps and the g band
/// covers g(i), this places i in the estimated safe set.
inline bool membership_certified(const CandidatePosterior& g_post, double beta_t, int idx, double epsilon) {
  return g_post.variance(idx) <= epsilon * epsilon / (4.0 * beta_t);
}

/// argmax of u_f over `safe`, lowest index on ties.
inline int phase2_select(const CandidatePosterior& f_post, double beta_t, std::span<const int> safe) {
  if (safe.empty()) throw InputError("phase2_select: empty safe set");
  int best = -1;
  double best_u = -std::numeric_limits<double>::infinity();
  for (int i : safe) {
    const double u = f_post.band(i, beta_t).upper;
    if (u > best_u || (u == best_u && i < best)) {
      best_u = u;
      best = i;
    }
  }
  return best;
}

inline int phase2_select(const GaussianProcess& f_post, double beta_t, const DecisionSet& ds,
                         std::span<const int> safe) {
  if (safe.empty()) throw InputError("phase2_select: empty safe set");
  int best = -1;
  double best_u = -std::numeric_limits<double>::infinity();
  for (int i : safe) {
    const double u = confidence_bounds(f_post, beta_t, ds.point(i)).upper;
    if (u > best_u || (u == best_u && i < best)) {
      best_u = u;
      best = i;
    }
  }
  return best;
}

namespace detail {

/// argmax of score(i) over `indices`, lowest index on ties.
template <class Score>
int argmax_over(std::span<const int> indices, Score score) {
  int best = -1;
  double best_s = -std::numeric_limits<double>::infinity();
  for (int i : indices) {
    const double s = score(i);
    if (best < 0 || s > best_s || (s == best_s && i < best)) {
      best_s = s;
      best = i;
    }
  }
  return best;
}

inline std::vector<int> indicator_to_indices(const std::vector<char>& m) {
  std::vector<int> out;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[i]) out.push_back(static_cast<int>(i));
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Theoretical phase lengths from an instance

struct ResolvedPhaseLength {
  PhaseLength rule;
  double lambda = 0.0;
  long long feature_dim = 0;
  /// Theoretical infinite case: whether the chosen quadrature map meets eps0_max.
  bool approximation_admissible = true;
};

/// Evaluates the finite or approximated T' rule for the instance's g kernel.
/// Eigenvalues at or below this are treated as a singular seed second moment.
inline constexpr double kLambdaFloor = 1e-12;

inline ResolvedPhaseLength theoretical_phase_length(const ProblemInstance& inst, const AlgoConfig& cfg) {
  const double sigma = std::sqrt(detail::model_noise_var(inst, cfg));
  const double beta_T = beta(cfg.T, static_cast<int>(inst.size()), cfg.delta);
  Eigen::MatrixXd seeds(static_cast<Eigen::Index>(inst.seed_set.size()), inst.dim());
  for (std::size_t k = 0; k < inst.seed_set.size(); ++k)
    seeds.row(static_cast<Eigen::Index>(k)) = inst.decision_set.points().row(inst.seed_set[k]);

  ResolvedPhaseLength out;
  if (cfg.tprime_policy.kind == TPrimePolicy::Kind::TheoreticalFinite) {
    const FeatureMap fm = FeatureMap::explicit_map(inst.g_kernel);
    out.feature_dim = fm.dim();
    out.lambda = lambda_minus(seeds, fm);
    if (out.lambda <= kLambdaFloor) out.lambda = 0.0;
    out.rule = t_prime_finite(out.lambda, out.feature_dim, cfg.epsilon, cfg.delta, beta_T, sigma);
  } else {
    if (inst.g_kernel.family() != KernelFamily::SquaredExponential)
      throw UnsupportedKernelError("theoretical_infinite policy needs a squared-exponential g kernel");
    const FeatureMap fm = FeatureMap::quadrature_on_unit_ball(inst.g_kernel.lengthscale(),
                                                              cfg.tprime_policy.qff_nodes, inst.dim());
    out.feature_dim = fm.dim();
    out.lambda = lambda_minus(seeds, fm);
    if (out.lambda <= kLambdaFloor) out.lambda = 0.0;
    out.rule = t_prime_infinite(out.lambda, out.feature_dim, cfg.epsilon, cfg.delta, beta_T, sigma, cfg.T);
    out.approximation_admissible =
        qff_error_bound(inst.dim(), fm.lengthscale(), fm.nodes_per_dim()) <= out.rule.eps0_max;
  }
  return out;
}

// ---------------------------------------------------------------------------
// SGP-UCB

inline RegretTrace run_sgp_ucb(const ProblemInstance& inst, const AlgoConfig& cfg, std::uint64_t seed) {
  detail::check_inputs(inst, cfg);
  const double noise_var = detail::model_noise_var(inst, cfg);
  const int n = static_cast<int>(inst.size());
  const TPrimePolicy& policy = cfg.tprime_policy;

  std::optional<int> tprime;  // unresolved while the plateau rule is running
  switch (policy.kind) {
    case TPrimePolicy::Kind::Fixed: tprime = policy.fixed; break;
    case TPrimePolicy::Kind::Plateau: break;
    default: {
      const long long t = theoretical_phase_length(inst, cfg).rule.tprime;
      tprime = static_cast<int>(std::min<long long>(t, cfg.T));
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_seed(0, inst.seed_set.size() - 1);
  CandidatePosterior f_post(inst.f_kernel, noise_var, inst.decision_set.points(), cfg.refit_interval);
  CandidatePosterior g_post(inst.g_kernel, noise_var, inst.decision_set.points(), cfg.refit_interval);

  RegretTrace trace;
  trace.rounds.reserve(static_cast<std::size_t>(cfg.T));
  bool exploring = !tprime || *tprime > 0;
  int run_length = 0;
  int last_size = -1;

  for (int t = 1; t <= cfg.T; ++t) {
    const double b = beta(t, n, cfg.delta);
    const std::vector<int> safe = estimated_safe_set(g_post, b, inst.h);

    RoundRecord r;
    r.safe_set_size = static_cast<int>(safe.size());
    r.benchmark_in_safe_set = detail::contains(safe, inst.opt_index);
    if (exploring) {
      r.phase = Phase::Explore;
      if (cfg.phase1_rule == Phase1Rule::Uniform)
        r.action = inst.seed_set[pick_seed(rng)];
      else
        r.action = detail::argmax_over(inst.seed_set, [&](int i) { return g_post.variance(i); });
    } else {
      r.phase = Phase::Exploit;
      if (safe.empty()) {
        r.fallback = true;
        r.action = detail::argmax_over(inst.seed_set, [&](int i) { return g_post.band(i, b).lower; });
      } else {
        r.action = phase2_select(f_post, b, safe);
      }
    }
    r.g_lower = g_post.band(r.action, b).lower;

    const double y = observe(inst, r.action, Channel::Reward, rng);
    const double z = observe(inst, r.action, Channel::Safety, rng);
    f_post.update(r.action, y);
    g_post.update(r.action, z);
    trace.record(inst, r);

    if (exploring) {
      if (tprime) {
        exploring = t < *tprime;
      } else {
        run_length = (r.safe_set_size == last_size) ? run_length + 1 : 1;
        last_size = r.safe_set_size;
        if (run_length >= policy.window || t >= policy.cap) {
          tprime = t;
          exploring = false;
        }
      }
    }
  }
  trace.tprime = tprime.value_or(cfg.T);
  return trace;
}

/// SGP-UCB without the pure exploration phase.
inline RegretTrace run_naive_sgp_ucb(const ProblemInstance& inst, AlgoConfig cfg, std::uint64_t seed) {
  cfg.tprime_policy = TPrimePolicy::fixed_length(0);
  return run_sgp_ucb(inst, cfg, seed);
}

// ---------------------------------------------------------------------------
// GP-UCB with oracle access to D_eps^s

inline RegretTrace run_oracle_gp_ucb(const ProblemInstance& inst, const AlgoConfig& cfg, std::uint64_t seed) {
  detail::check_inputs(inst, cfg);
  const double noise_var = detail::model_noise_var(inst, cfg);
  const int n = static_cast<int>(inst.size());
  std::mt19937_64 rng(seed);
  CandidatePosterior f_post(inst.f_kernel, noise_var, inst.decision_set.points(), cfg.refit_interval);

  RegretTrace trace;
  trace.rounds.reserve(static_cast<std::size_t>(cfg.T));
  for (int t = 1; t <= cfg.T; ++t) {
    const double b = beta(t, n, cfg.delta);
    RoundRecord r;
    r.phase = Phase::Exploit;
    r.safe_set_size = static_cast<int>(inst.eps_safe_set.size());
    r.benchmark_in_safe_set = true;
    r.action = phase2_select(f_post, b, inst.eps_safe_set);
    r.g_lower = std::numeric_limits<double>::quiet_NaN();
    const double y = observe(inst, r.action, Channel::Reward, rng);
    f_post.update(r.action, y);
    trace.record(inst, r);
  }
  trace.tprime = 0;
  return trace;
}

// ---------------------------------------------------------------------------
// Lipschitz-based baselines

namespace detail {

/// Shared state of SafeOpt-MC and StageOpt: both GP posteriors plus the
/// Lipschitz safe set S_t grown one step per round from S_0 = D^w.
class LipschitzSafeState {
 public:
  LipschitzSafeState(const ProblemInstance& inst, const AlgoConfig& cfg)
      : inst_(inst),
        noise_var_(model_noise_var(inst, cfg)),
        L_(lipschitz_constant(inst, Channel::Safety)),
        dist_(inst.decision_set.distance_matrix()),
        f_post_(inst.f_kernel, noise_var_, inst.decision_set.points(), cfg.refit_interval),
        g_post_(inst.g_kernel, noise_var_, inst.decision_set.points(), cfg.refit_interval),
        member_(static_cast<std::size_t>(inst.size()), 0) {
    for (int i : inst.seed_set) member_[static_cast<std::size_t>(i)] = 1;
  }

  /// S_t = S_{t-1} u {x : exists x' in S_{t-1}, l_g(x') - L d(x, x') >= h}.
  void expand(double b) {
    const Eigen::Index n = inst_.size();
    std::vector<char> next = member_;
    for (Eigen::Index x = 0; x < n; ++x) {
      if (member_[static_cast<std::size_t>(x)]) continue;
      for (Eigen::Index xp = 0; xp < n; ++xp) {
        if (!member_[static_cast<std::size_t>(xp)]) continue;
        if (g_post_.band(xp, b).lower - L_ * dist_(x, xp) >= inst_.h) {
          next[static_cast<std::size_t>(x)] = 1;
          break;
        }
      }
    }
    member_.swap(next);
    safe_ = indicator_to_indices(member_);
  }

  /// G_t = {x in S_t : exists x' outside S_t, u_g(x) - L d(x, x') >= h}.
  std::vector<int> expanders(double b) const {
    std::vector<int> out;
    const Eigen::Index n = inst_.size();
    for (int x : safe_) {
      double nearest = std::numeric_limits<double>::infinity();
      for (Eigen::Index xp = 0; xp < n; ++xp)
        if (!member_[static_cast<std::size_t>(xp)]) nearest = std::min(nearest, dist_(x, xp));
      if (std::isfinite(nearest) && g_post_.band(x, b).upper - L_ * nearest >= inst_.h) out.push_back(x);
    }
    return out;
  }

  /// M_t = {x in S_t : u_f(x) >= max over S_t of l_f}.
  std::vector<int> maximizers(double b) const {
    double best_lower = -std::numeric_limits<double>::infinity();
    for (int x : safe_) best_lower = std::max(best_lower, f_post_.band(x, b).lower);
    std::vector<int> out;
    for (int x : safe_)
      if (f_post_.band(x, b).upper >= best_lower) out.push_back(x);
    return out;
  }

  template <class Rng>
  void observe_both(int idx, Rng& rng) {
    const double y = observe(inst_, idx, Channel::Reward, rng);
    const double z = observe(inst_, idx, Channel::Safety, rng);
    f_post_.update(idx, y);
    g_post_.update(idx, z);
  }

  const std::vector<int>& safe() const { return safe_; }
  bool in_safe(int i) const { return member_[static_cast<std::size_t>(i)] != 0; }
  const CandidatePosterior& f_post() const { return f_post_; }
  const CandidatePosterior& g_post() const { return g_post_; }
  double lipschitz() const { return L_; }

 private:
  const ProblemInstance& inst_;
  double noise_var_;
  double L_;
  Eigen::MatrixXd dist_;
  CandidatePosterior f_post_;
  CandidatePosterior g_post_;
  std::vector<char> member_;
  std::vector<int> safe_;
};

inline std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace detail

/// Switch cap for SafeOpt-MC's exploration stage.
inline constexpr int kSafeOptSwitchCap = 100;

inline RegretTrace run_safeopt_mc(const ProblemInstance& inst, const AlgoConfig& cfg, std::uint64_t seed) {
  detail::check_inputs(inst, cfg);
  const int n = static_cast<int>(inst.size());
  const int cap = std::min(kSafeOptSwitchCap, cfg.T);
  std::mt19937_64 rng(seed);
  detail::LipschitzSafeState state(inst, cfg);

  RegretTrace trace;
  trace.rounds.reserve(static_cast<std::size_t>(cfg.T));
  std::optional<int> tstar;
  for (int t = 1; t <= cfg.T; ++t) {
    const double b = beta(t, n, cfg.delta);
    state.expand(b);
    const auto& f = state.f_post();
    const auto& g = state.g_post();
    auto sd = [&](int i) { return std::max(f.stddev(i), g.stddev(i)); };

    std::vector<int> candidates;
    if (!tstar) {
      candidates = detail::sorted_union(state.expanders(b), state.maximizers(b));
      double widest = 0.0;
      for (int i : candidates) widest = std::max(widest, 2.0 * std::sqrt(b) * sd(i));
      if ((!candidates.empty() && widest <= cfg.epsilon) || t > cap) tstar = t - 1;
    }

    RoundRecord r;
    r.safe_set_size = static_cast<int>(state.safe().size());
    r.benchmark_in_safe_set = state.in_safe(inst.opt_index);
    if (!tstar) {
      r.phase = Phase::Explore;
      if (candidates.empty()) {
        r.fallback = true;
        r.action = detail::argmax_over(state.safe(), sd);
      } else {
        r.action = detail::argmax_over(candidates, sd);
      }
    } else {
      r.phase = Phase::Exploit;
      r.action = detail::argmax_over(state.safe(), [&](int i) { return f.band(i, b).lower; });
    }
    r.g_lower = g.band(r.action, b).lower;
    state.observe_both(r.action, rng);
    trace.record(inst, r);
  }
  trace.tprime = tstar.value_or(cfg.T);
  return trace;
}

inline RegretTrace run_stageopt(const ProblemInstance& inst, const AlgoConfig& cfg, std::uint64_t seed) {
  detail::check_inputs(inst, cfg);
  const int n = static_cast<int>(inst.size());
  const TPrimePolicy& policy = cfg.tprime_policy;
  const bool use_plateau = policy.kind == TPrimePolicy::Kind::Plateau;
  const int window = use_plateau ? policy.window : TPrimePolicy::plateau().window;
  const int cap = std::min(use_plateau ? policy.cap : TPrimePolicy::plateau().cap, cfg.T);
  std::mt19937_64 rng(seed);
  detail::LipschitzSafeState state(inst, cfg);

  RegretTrace trace;
  trace.rounds.reserve(static_cast<std::size_t>(cfg.T));
  std::optional<int> tprime;
  int run_length = 0;
  int last_size = -1;
  for (int t = 1; t <= cfg.T; ++t) {
    const double b = beta(t, n, cfg.delta);
    state.expand(b);
    const auto& f = state.f_post();
    const auto& g = state.g_post();

    std::vector<int> G;
    if (!tprime) {
      G = state.expanders(b);
      double widest = 0.0;
      for (int i : G) widest = std::max(widest, g.band(i, b).width());
      if (G.empty() || widest <= cfg.epsilon || run_length >= window || t > cap) tprime = t - 1;
    }

    RoundRecord r;
    r.safe_set_size = static_cast<int>(state.safe().size());
    r.benchmark_in_safe_set = state.in_safe(inst.opt_index);
    if (!tprime) {
      r.phase = Phase::Explore;
      r.action = detail::argmax_over(G, [&](int i) { return g.band(i, b).width(); });
      run_length = (r.safe_set_size == last_size) ? run_length + 1 : 1;
      last_size = r.safe_set_size;
    } else {
      r.phase = Phase::Exploit;
      r.action = detail::argmax_over(state.safe(), [&](int i) { return f.band(i, b).upper; });
    }
    r.g_lower = g.band(r.action, b).lower;
    state.observe_both(r.action, rng);
    trace.record(inst, r);
  }
  trace.tprime = tprime.value_or(cfg.T);
  return trace;
}

// ---------------------------------------------------------------------------
// Dispatch by name

enum class Algorithm { SgpUcb, NaiveSgpUcb, OracleGpUcb, SafeOptMc, StageOpt };

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::SgpUcb: return "sgp_ucb";
    case Algorithm::NaiveSgpUcb: return "naive_sgp_ucb";
    case Algorithm::OracleGpUcb: return "oracle_gp_ucb";
    case Algorithm::SafeOptMc: return "safeopt_mc";
    case Algorithm::StageOpt: return "stageopt";
  }
  return "?";
}

inline std::optional<Algorithm> algorithm_from_string(const std::string& s) {
  for (Algorithm a : {Algorithm::SgpUcb, Algorithm::NaiveSgpUcb, Algorithm::OracleGpUcb,
                      Algorithm::SafeOptMc, Algorithm::StageOpt})
    if (s == to_string(a)) return a;
  return std::nullopt;
}

inline RegretTrace run_algorithm(Algorithm a, const ProblemInstance& inst, const AlgoConfig& cfg,
                                 std::uint64_t seed) {
  switch (a) {
    case Algorithm::SgpUcb: return run_sgp_ucb(inst, cfg, seed);
    case Algorithm::NaiveSgpUcb: return run_naive_sgp_ucb(inst, cfg, seed);
    case Algorithm::OracleGpUcb: return run_oracle_gp_ucb(inst, cfg, seed);
    case Algorithm::SafeOptMc: return run_safeopt_mc(inst, cfg, seed);
    case Algorithm::StageOpt: return run_stageopt(inst, cfg, seed);
  }
  throw InputError("unknown algorithm");
}

}  // namespace sgpucb
