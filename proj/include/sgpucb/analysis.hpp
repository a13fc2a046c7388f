#pragma once

// Computable constants from the regret analysis and Monte-Carlo checks of the
// concentration steps it relies on.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

#include "sgpucb/algorithms.hpp"
#include "sgpucb/environment.hpp"
#include "sgpucb/errors.hpp"
#include "sgpucb/features.hpp"
#include "sgpucb/gp.hpp"
#include "sgpucb/phase_length.hpp"

namespace sgpucb {

/// gamma_t <= n log(1 + t n k_max / sigma^2); 0 at t = 0.
inline double info_gain_bound(long long t, long long n_actions, double sigma, double k_max) {
  if (t < 0 || n_actions < 1 || !(sigma > 0.0) || !(k_max >= 0.0))
    throw InputError("info_gain_bound: invalid arguments");
  if (k_max > 1.0 + 1e-12) throw InputError("info_gain_bound: k_max must be <= 1");
  if (t == 0) return 0.0;
  const double n = static_cast<double>(n_actions);
  return n * std::log1p(static_cast<double>(t) * n * k_max / (sigma * sigma));
}

/// 1/2 log det(I + K / sigma^2) for the Gram matrix of the chosen points.
inline double info_gain_empirical(const Eigen::MatrixXd& gram, double sigma) {
  if (gram.rows() != gram.cols()) throw InputError("info_gain_empirical: Gram matrix must be square");
  if (!(sigma > 0.0)) throw InputError("info_gain_empirical: sigma must be > 0");
  if (gram.rows() == 0) return 0.0;
  const double scale = std::max(1.0, gram.cwiseAbs().maxCoeff());
  if (!gram.isApprox(gram.transpose(), 1e-10) && (gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InputError("info_gain_empirical: Gram matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (ev[0] < -1e-8 * scale) throw InputError("info_gain_empirical: Gram matrix is not positive semidefinite");
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) logdet += std::log1p(std::max(ev[i], 0.0) / (sigma * sigma));
  return 0.5 * logdet;
}

/// Phase-1 regret constant. SE kernels: sqrt(2 l d) diam / delta (unit
/// universal constant); otherwise 2 sqrt(2 log(2 n)) / delta.
inline double b_constant(const KernelSpec& kernel, double delta, const DecisionSet& ds) {
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("b_constant: delta must lie in (0, 1)");
  if (kernel.family() == KernelFamily::SquaredExponential)
    return std::sqrt(2.0 * kernel.lengthscale() * ds.dim()) * ds.diameter() / delta;
  return 2.0 * std::sqrt(2.0 * std::log(2.0 * static_cast<double>(ds.size()))) / delta;
}

/// C1 = 8 / log(1 + sigma^-2).
inline double c1_constant(double sigma) {
  if (!(sigma > 0.0)) throw InputError("c1_constant: sigma must be > 0");
  return 8.0 / std::log1p(1.0 / (sigma * sigma));
}

/// B T' + sqrt(C1 T beta_T gamma_T).
inline double regret_rhs(double B, long long tprime, double C1, long long T, double beta_T, double gamma_T) {
  if (B < 0 || tprime < 0 || C1 < 0 || T < 0 || beta_T < 0 || gamma_T < 0)
    throw InputError("regret_rhs: inputs must be nonnegative");
  return B * static_cast<double>(tprime) +
         std::sqrt(C1 * static_cast<double>(T) * beta_T * gamma_T);
}

/// Fraction of `trials` draws of T' uniform seed samples for which
/// lambda_min(Phi^T Phi + sigma^2 I) < sigma^2 + lambda_minus T' / 2.
template <class Rng>
double chernoff_trial(const Eigen::MatrixXd& seed_points, const FeatureMap& feature_map, int tprime,
                      double sigma, int trials, Rng& rng) {
  if (tprime < 0 || trials < 1 || !(sigma > 0.0)) throw InputError("chernoff_trial: invalid arguments");
  const double lam = lambda_minus(seed_points, feature_map);
  if (!(lam > 1e-12)) throw AssumptionViolation("chernoff_trial: lambda_minus is zero");
  const Eigen::MatrixXd features = feature_map.feature_matrix(seed_points);
  const Eigen::Index D = features.cols();
  const double rhs = sigma * sigma + lam * tprime / 2.0;
  const double tol = 1e-9 * (1.0 + rhs);
  std::uniform_int_distribution<Eigen::Index> pick(0, seed_points.rows() - 1);
  int failures = 0;
  for (int k = 0; k < trials; ++k) {
    Eigen::MatrixXd A = sigma * sigma * Eigen::MatrixXd::Identity(D, D);
    for (int s = 0; s < tprime; ++s) {
      const Eigen::VectorXd phi = features.row(pick(rng)).transpose();
      A.selfadjointView<Eigen::Lower>().rankUpdate(phi);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(A.selfadjointView<Eigen::Lower>()),
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues()[0] < rhs - tol) ++failures;
  }
  return static_cast<double>(failures) / trials;
}

struct VarianceGap {
  double gap;
  /// 4 t^3 eps0 / sigma^2.
  double bound;
  bool holds() const { return gap <= bound + 1e-8; }
};

/// Exact posterior variance minus its feature-space approximation at x.
inline VarianceGap approx_variance_gap(const GaussianProcess& exact_post, const FeatureMap& feature_map,
                                       double sigma, const PointRef& x, long long t, double eps0) {
  if (!(sigma > 0.0) || t < 0 || !(eps0 >= 0.0)) throw InputError("approx_variance_gap: invalid arguments");
  Eigen::MatrixXd obs(exact_post.size(), feature_map.input_dim());
  for (Eigen::Index i = 0; i < exact_post.size(); ++i) obs.row(i) = exact_post.points()[i].transpose();
  const double approx =
      variance_via_features(feature_map.feature_matrix(obs), sigma * sigma, feature_map(x));
  const double exact = exact_post.predict(x).variance;
  const double tt = static_cast<double>(t);
  return {exact - approx, 4.0 * tt * tt * tt * eps0 / (sigma * sigma)};
}

// ---------------------------------------------------------------------------
// Bound report

struct BoundReport {
  /// "finite" or "infinite" RKHS rule for the constraint kernel.
  std::string rkhs_case;
  std::optional<double> t_eps;
  std::optional<double> t_delta;
  long long tprime = 0;
  /// "theoretical" or "empirical".
  std::string tprime_source;
  double B = 0.0;
  double beta_T = 0.0;
  double gamma_T_bound = 0.0;
  double C1 = 0.0;
  double regret_rhs = 0.0;
  std::optional<double> lambda_minus;
  long long feature_dim = 0;
  std::optional<double> eps0_max;
  bool approximation_admissible = true;
  std::string note;
};

/// Bound report for an instance. The theoretical T' is used when the
/// constraint features span the RKHS on D^w; otherwise `empirical_tprime`.
inline BoundReport make_bound_report(const ProblemInstance& inst, const AlgoConfig& cfg,
                                     long long empirical_tprime) {
  BoundReport rep;
  const double sigma = std::sqrt(detail::model_noise_var(inst, cfg));
  const int n = static_cast<int>(inst.size());
  rep.beta_T = beta(cfg.T, n, cfg.delta);
  rep.B = b_constant(inst.f_kernel, cfg.delta, inst.decision_set);
  rep.C1 = c1_constant(sigma);
  double k_max = 0.0;
  for (Eigen::Index i = 0; i < inst.size(); ++i) {
    const Point x = inst.decision_set.point(i);
    k_max = std::max(k_max, inst.f_kernel(x, x));
  }
  rep.gamma_T_bound = info_gain_bound(cfg.T, n, sigma, std::min(k_max, 1.0));

  AlgoConfig theory = cfg;
  const bool finite = inst.g_kernel.finite_dimensional();
  rep.rkhs_case = finite ? "finite" : "infinite";
  theory.tprime_policy = finite ? TPrimePolicy::theoretical_finite()
                                : TPrimePolicy::theoretical_infinite(cfg.tprime_policy.qff_nodes);
  rep.tprime = empirical_tprime;
  rep.tprime_source = "empirical";
  try {
    const ResolvedPhaseLength r = theoretical_phase_length(inst, theory);
    rep.lambda_minus = r.lambda;
    rep.feature_dim = r.feature_dim;
    rep.t_eps = r.rule.t_eps;
    rep.t_delta = r.rule.t_delta;
    rep.tprime = r.rule.tprime;
    rep.tprime_source = "theoretical";
    if (!finite) {
      rep.eps0_max = r.rule.eps0_max;
      rep.approximation_admissible = r.approximation_admissible;
      if (!r.approximation_admissible)
        rep.note = "capacity warning: no quadrature size within budget meets eps0_max";
    }
  } catch (const AssumptionViolation& e) {
    rep.note = e.what();
  } catch (const CapacityError& e) {
    rep.note = e.what();
  }
  // eps0_max does not depend on lambda, so report it even when lambda vanishes.
  if (!finite && !rep.eps0_max) {
    const double T3 = std::pow(static_cast<double>(cfg.T), 3);
    rep.eps0_max = cfg.epsilon * cfg.epsilon * sigma * sigma / (32.0 * T3 * rep.beta_T);
    rep.approximation_admissible = false;
  }
  rep.regret_rhs = regret_rhs(rep.B, rep.tprime, rep.C1, cfg.T, rep.beta_T, rep.gamma_T_bound);
  return rep;
}

inline nlohmann::json to_json(const BoundReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"rkhs_case", r.rkhs_case},
          {"t_eps", opt(r.t_eps)},
          {"t_delta", opt(r.t_delta)},
          {"tprime", r.tprime},
          {"tprime_source", r.tprime_source},
          {"B", r.B},
          {"beta_T", r.beta_T},
          {"gamma_T_bound", r.gamma_T_bound},
          {"C1", r.C1},
          {"regret_rhs", r.regret_rhs},
          {"lambda_minus", opt(r.lambda_minus)},
          {"feature_dim", r.feature_dim},
          {"eps0_max", opt(r.eps0_max)},
          {"approximation_admissible", r.approximation_admissible},
          {"note", r.note}};
}

}  // namespace sgpucb
