#pragma once

// Synthetic safe-bandit problems over a finite decision set: GP-sampled
// ground truth, noisy observations, true safe sets and regret accounting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "sgpucb/errors.hpp"
#include "sgpucb/kernel.hpp"

namespace sgpucb {

/// Finite action set D0: n points in R^d (rows), indexed 0..n-1.
class DecisionSet {
 public:
  DecisionSet() = default;

  /// Validates n >= 2, |x| <= 1 and pairwise distinct points.
  explicit DecisionSet(Eigen::MatrixXd points) : points_(std::move(points)) {
    const Eigen::Index n = points_.rows();
    if (n < 2) throw InputError("decision set needs at least two points");
    if (points_.cols() < 1) throw InputError("decision set points need dimension >= 1");
    if (!points_.allFinite()) throw InputError("decision set has non-finite coordinates");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (points_.row(i).norm() > 1.0 + 1e-12)
        throw InputError("decision set point " + std::to_string(i) + " lies outside the unit ball");
      for (Eigen::Index j = 0; j < i; ++j)
        if ((points_.row(i) - points_.row(j)).norm() <= 1e-9)
          throw InputError("decision set points " + std::to_string(j) + " and " +
                           std::to_string(i) + " coincide");
    }
  }

  Eigen::Index size() const { return points_.rows(); }
  int dim() const { return static_cast<int>(points_.cols()); }
  const Eigen::MatrixXd& points() const { return points_; }
  Point point(Eigen::Index i) const { return points_.row(i).transpose(); }

  double distance(Eigen::Index i, Eigen::Index j) const {
    return (points_.row(i) - points_.row(j)).norm();
  }

  Eigen::MatrixXd distance_matrix() const {
    const Eigen::Index n = size();
    Eigen::MatrixXd D(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) D(i, j) = D(j, i) = distance(i, j);
    return D;
  }

  double diameter() const { return size() == 0 ? 0.0 : distance_matrix().maxCoeff(); }

 private:
  Eigen::MatrixXd points_;
};

/// n points i.i.d. uniform in the d-dimensional unit ball.
template <class Rng>
Eigen::MatrixXd sample_unit_ball(int n, int d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::MatrixXd pts(n, d);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v(d);
    double norm = 0.0;
    do {
      for (int j = 0; j < d; ++j) v[j] = normal(rng);
      norm = v.norm();
    } while (norm == 0.0);
    const double r = std::pow(unif(rng), 1.0 / d);
    pts.row(i) = (r / norm) * v.transpose();
  }
  return pts;
}

struct InstanceConfig {
  int n = 100;
  int d = 2;
  KernelSpec f_kernel = KernelSpec::squared_exponential(1.0, 2);
  KernelSpec g_kernel = KernelSpec::squared_exponential(0.1, 2);
  double sigma = 0.1;
  double epsilon = 0.01;
  /// h is this quantile of the sampled g values.
  double threshold_quantile = 0.6;
  int seed_set_min = 21;
  int seed_set_max = 25;
  int max_attempts = 100;
};

enum class Channel { Reward, Safety };

struct ProblemInstance {
  DecisionSet decision_set;
  std::vector<double> f_true;
  std::vector<double> g_true;
  double h = 0.0;
  double epsilon = 0.0;
  double sigma = 0.0;
  /// Model kernels the learner uses for f and g.
  KernelSpec f_kernel = KernelSpec::squared_exponential(1.0, 1);
  KernelSpec g_kernel = KernelSpec::squared_exponential(1.0, 1);
  /// D^w, sorted ascending.
  std::vector<int> seed_set;
  /// D0^s = {i : g_i >= h}.
  std::vector<int> safe_set;
  /// D_eps^s = {i : g_i >= h + eps}.
  std::vector<int> eps_safe_set;
  /// x*_eps: argmax of f over D_eps^s (lowest index on ties).
  int opt_index = -1;
  std::uint64_t rng_seed = 0;

  Eigen::Index size() const { return decision_set.size(); }
  int dim() const { return decision_set.dim(); }
  double f_opt() const { return f_true[static_cast<std::size_t>(opt_index)]; }

  bool in_seed_set(int i) const { return std::binary_search(seed_set.begin(), seed_set.end(), i); }
  bool in_eps_safe_set(int i) const {
    return std::binary_search(eps_safe_set.begin(), eps_safe_set.end(), i);
  }

  /// Throws InputError on any broken invariant.
  void validate() const {
    const auto n = static_cast<std::size_t>(decision_set.size());
    if (f_true.size() != n || g_true.size() != n)
      throw InputError("instance truth vectors must match the decision set size");
    if (!(sigma >= 0.0) || !(epsilon >= 0.0)) throw InputError("instance sigma and epsilon must be >= 0");
    if (f_kernel.dim() != dim() || g_kernel.dim() != dim())
      throw InputError("instance kernels must match the decision set dimension");
    if (eps_safe_set.empty()) throw InputError("instance has empty eps-reachable safe set");
    if (seed_set.empty()) throw InputError("instance has empty seed set");
    for (int i : seed_set) {
      if (i < 0 || static_cast<std::size_t>(i) >= n) throw InputError("seed index out of range");
      if (!in_eps_safe_set(i)) throw InputError("seed point " + std::to_string(i) + " is not eps-safe");
    }
    if (!in_eps_safe_set(opt_index)) throw InputError("benchmark optimum is not eps-safe");
    for (int i : eps_safe_set)
      if (f_true[static_cast<std::size_t>(i)] > f_opt())
        throw InputError("benchmark optimum is not the maximizer over the eps-safe set");
  }
};

/// Builds an instance from explicit truths, deriving D0^s, D_eps^s and x*_eps.
inline ProblemInstance make_instance(DecisionSet decision_set, std::vector<double> f,
                                     std::vector<double> g, double h, double epsilon, double sigma,
                                     std::vector<int> seed_set, KernelSpec f_kernel,
                                     KernelSpec g_kernel, std::uint64_t rng_seed = 0) {
  ProblemInstance inst{.decision_set = std::move(decision_set),
                       .f_true = std::move(f),
                       .g_true = std::move(g),
                       .h = h,
                       .epsilon = epsilon,
                       .sigma = sigma,
                       .f_kernel = std::move(f_kernel),
                       .g_kernel = std::move(g_kernel),
                       .seed_set = std::move(seed_set),
                       .safe_set = {},
                       .eps_safe_set = {},
                       .opt_index = -1,
                       .rng_seed = rng_seed};
  if (inst.g_true.size() != static_cast<std::size_t>(inst.size()) ||
      inst.f_true.size() != static_cast<std::size_t>(inst.size()))
    throw InputError("instance truth vectors must match the decision set size");
  std::sort(inst.seed_set.begin(), inst.seed_set.end());
  inst.seed_set.erase(std::unique(inst.seed_set.begin(), inst.seed_set.end()), inst.seed_set.end());
  for (int i = 0; i < static_cast<int>(inst.size()); ++i) {
    const double gi = inst.g_true[static_cast<std::size_t>(i)];
    if (gi >= h) inst.safe_set.push_back(i);
    if (gi >= h + epsilon) inst.eps_safe_set.push_back(i);
  }
  for (int i : inst.eps_safe_set)
    if (inst.opt_index < 0 || inst.f_true[static_cast<std::size_t>(i)] > inst.f_opt()) inst.opt_index = i;
  inst.validate();
  return inst;
}

namespace detail {

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

template <class Rng>
std::vector<double> sample_gp_values(const KernelSpec& kernel, const Eigen::MatrixXd& pts, Rng& rng) {
  Eigen::MatrixXd K = gram_matrix(kernel, pts);
  K.diagonal().array() += 1e-8;
  Eigen::LLT<Eigen::MatrixXd> llt(K);
  if (llt.info() != Eigen::Success) throw NumericError("GP prior sample: Cholesky failed");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(pts.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  const Eigen::VectorXd f = llt.matrixL() * z;
  return {f.data(), f.data() + f.size()};
}

}  // namespace detail

/// Draws a ground-truth instance: points uniform in the unit ball, f and g
/// independent GP samples, h the configured quantile of g, D^w the
/// |D^w| eps-safe points with the largest g. Deterministic in `seed`;
/// degenerate draws are retried up to cfg.max_attempts times.
inline ProblemInstance sample_instance(const InstanceConfig& cfg, std::uint64_t seed) {
  if (cfg.n < 2 || cfg.d < 1) throw InputError("instance config: need n >= 2 and d >= 1");
  if (cfg.f_kernel.dim() != cfg.d || cfg.g_kernel.dim() != cfg.d)
    throw InputError("instance config: kernel dimension differs from d");
  if (!(cfg.threshold_quantile >= 0.0 && cfg.threshold_quantile <= 1.0))
    throw InputError("instance config: threshold quantile must lie in [0, 1]");
  if (cfg.seed_set_min < 1 || cfg.seed_set_max < cfg.seed_set_min)
    throw InputError("instance config: invalid seed-set size band");
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Eigen::MatrixXd pts = sample_unit_ball(cfg.n, cfg.d, rng);
    std::vector<double> f = detail::sample_gp_values(cfg.f_kernel, pts, rng);
    std::vector<double> g = detail::sample_gp_values(cfg.g_kernel, pts, rng);
    std::uniform_int_distribution<int> size_dist(cfg.seed_set_min, cfg.seed_set_max);
    const int seed_size = size_dist(rng);

    const double h = detail::quantile(g, cfg.threshold_quantile);
    std::vector<int> eps_safe;
    for (int i = 0; i < cfg.n; ++i)
      if (g[static_cast<std::size_t>(i)] >= h + cfg.epsilon) eps_safe.push_back(i);
    if (static_cast<int>(eps_safe.size()) < seed_size) continue;
    std::stable_sort(eps_safe.begin(), eps_safe.end(), [&](int a, int b) {
      return g[static_cast<std::size_t>(a)] > g[static_cast<std::size_t>(b)];
    });
    std::vector<int> seeds(eps_safe.begin(), eps_safe.begin() + seed_size);
    DecisionSet ds;
    try {
      ds = DecisionSet(std::move(pts));
    } catch (const InputError&) {
      continue;
    }
    return make_instance(std::move(ds), std::move(f), std::move(g), h, cfg.epsilon, cfg.sigma,
                         std::move(seeds), cfg.f_kernel, cfg.g_kernel, seed);
  }
  throw InstanceGenerationError("no admissible instance after " + std::to_string(cfg.max_attempts) +
                                " attempts (seed " + std::to_string(seed) + ")");
}

/// Noisy observation of f or g at action `idx`.
template <class Rng>
double observe(const ProblemInstance& inst, int idx, Channel channel, Rng& rng) {
  const auto i = static_cast<std::size_t>(idx);
  const double truth = channel == Channel::Reward ? inst.f_true.at(i) : inst.g_true.at(i);
  if (inst.sigma == 0.0) return truth;
  std::normal_distribution<double> noise(0.0, inst.sigma);
  return truth + noise(rng);
}

struct RegretOutcome {
  double regret;
  bool violation;
};

/// r = f(x*_eps) - f(x); may be negative for safe points outside D_eps^s.
inline RegretOutcome regret_of(const ProblemInstance& inst, int idx) {
  const auto i = static_cast<std::size_t>(idx);
  return {inst.f_opt() - inst.f_true.at(i), inst.g_true.at(i) < inst.h};
}

enum class Phase { Explore, Exploit };

inline const char* to_string(Phase p) { return p == Phase::Explore ? "explore" : "exploit"; }

struct RoundRecord {
  int round = 0;
  int action = -1;
  double instant_regret = 0.0;
  double cumulative_regret = 0.0;
  double g_value = 0.0;
  bool violation = false;
  int safe_set_size = 0;
  Phase phase = Phase::Explore;
  /// The selection rule had no admissible action and used its fallback.
  bool fallback = false;
  /// Lower confidence bound on g at the chosen action when it was selected.
  double g_lower = 0.0;
  /// x*_eps was inside the algorithm's safe-set estimate this round.
  bool benchmark_in_safe_set = false;
};

struct RegretTrace {
  std::vector<RoundRecord> rounds;
  /// Resolved length of the first phase (explore rounds).
  int tprime = 0;

  /// Appends a round, filling regret, violation and the running sum.
  void record(const ProblemInstance& inst, RoundRecord r) {
    const RegretOutcome out = regret_of(inst, r.action);
    r.round = static_cast<int>(rounds.size()) + 1;
    r.instant_regret = out.regret;
    r.violation = out.violation;
    r.g_value = inst.g_true.at(static_cast<std::size_t>(r.action));
    r.cumulative_regret = (rounds.empty() ? 0.0 : rounds.back().cumulative_regret) + out.regret;
    rounds.push_back(r);
  }

  std::size_t size() const { return rounds.size(); }
  double cumulative_regret() const { return rounds.empty() ? 0.0 : rounds.back().cumulative_regret; }
  int violations() const {
    return static_cast<int>(std::count_if(rounds.begin(), rounds.end(),
                                          [](const RoundRecord& r) { return r.violation; }));
  }
};

// ---------------------------------------------------------------------------
// JSON serialization

inline nlohmann::json kernel_to_json(const KernelSpec& k) {
  nlohmann::json j{{"family", to_string(k.family())}};
  switch (k.family()) {
    case KernelFamily::SquaredExponential: j["lengthscale"] = k.lengthscale(); break;
    case KernelFamily::Polynomial:
      j["degree"] = k.degree();
      j["scale"] = k.scale();
      break;
    case KernelFamily::Linear: break;
  }
  return j;
}

/// Parses {"family": "se"|"linear"|"polynomial", ...}; unknown keys are rejected.
inline KernelSpec kernel_from_json(const nlohmann::json& j, int dim, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where, "kernel must be an object");
  if (!j.contains("family")) throw ConfigError(where + ".family", "missing");
  const std::string family = j.at("family").get<std::string>();
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) throw ConfigError(where + "." + it.key(), "unknown key");
    }
  };
  try {
    if (family == "se") {
      allow({"family", "lengthscale"});
      if (!j.contains("lengthscale")) throw ConfigError(where + ".lengthscale", "missing");
      return KernelSpec::squared_exponential(j.at("lengthscale").get<double>(), dim);
    }
    if (family == "linear") {
      allow({"family"});
      return KernelSpec::linear(dim);
    }
    if (family == "polynomial") {
      allow({"family", "degree", "scale"});
      if (!j.contains("degree")) throw ConfigError(where + ".degree", "missing");
      return KernelSpec::polynomial(j.at("degree").get<int>(), dim, j.value("scale", 0.5));
    }
  } catch (const InputError& e) {
    throw ConfigError(where, e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where, e.what());
  }
  throw ConfigError(where + ".family", "unknown kernel family '" + family + "'");
}

inline nlohmann::json to_json(const ProblemInstance& inst) {
  nlohmann::json pts = nlohmann::json::array();
  for (Eigen::Index i = 0; i < inst.size(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < inst.dim(); ++j) row.push_back(inst.decision_set.points()(i, j));
    pts.push_back(std::move(row));
  }
  return {{"points", pts},
          {"f_true", inst.f_true},
          {"g_true", inst.g_true},
          {"h", inst.h},
          {"epsilon", inst.epsilon},
          {"sigma", inst.sigma},
          {"f_kernel", kernel_to_json(inst.f_kernel)},
          {"g_kernel", kernel_to_json(inst.g_kernel)},
          {"seed_set", inst.seed_set},
          {"rng_seed", inst.rng_seed}};
}

inline ProblemInstance instance_from_json(const nlohmann::json& j) {
  try {
    const auto& rows = j.at("points");
    if (!rows.is_array() || rows.empty()) throw InputError("instance JSON: points must be a non-empty array");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(rows.at(0).size());
    Eigen::MatrixXd pts(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(rows.at(i).size()) != d) throw InputError("instance JSON: ragged points");
      for (Eigen::Index k = 0; k < d; ++k) pts(i, k) = rows.at(i).at(k).get<double>();
    }
    const int dim = static_cast<int>(d);
    return make_instance(DecisionSet(std::move(pts)), j.at("f_true").get<std::vector<double>>(),
                         j.at("g_true").get<std::vector<double>>(), j.at("h").get<double>(),
                         j.at("epsilon").get<double>(), j.at("sigma").get<double>(),
                         j.at("seed_set").get<std::vector<int>>(),
                         kernel_from_json(j.at("f_kernel"), dim, "f_kernel"),
                         kernel_from_json(j.at("g_kernel"), dim, "g_kernel"),
                         j.value("rng_seed", std::uint64_t{0}));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("instance JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw InputError(std::string("instance JSON: ") + e.what());
  }
}

}  // namespace sgpucb
