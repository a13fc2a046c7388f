#pragma once

// Length of the pure-exploration phase: the closed-form rules for finite and
// approximated (infinite) RKHS constraints, the minimum eigenvalue of the
// seed-set feature second moment they depend on, and the plateau heuristic.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "sgpucb/errors.hpp"
#include "sgpucb/features.hpp"

namespace sgpucb {

/// Largest feature dimension for which lambda_minus forms a dense eigenproblem.
inline constexpr int kEigenFeatureBudget = 4096;

struct PhaseLength {
  double t_eps = 0.0;
  double t_delta = 0.0;
  long long tprime = 0;
  /// Only for the approximated rule: admissible uniform approximation error.
  double eps0_max = 0.0;
};

/// Finite-dimensional RKHS:
///   t_eps = 8 sigma^2 beta_T / (lambda eps^2),  t_delta = (8 / lambda) log(d_g / delta),
///   T' = ceil(max(t_eps, t_delta)).
inline PhaseLength t_prime_finite(double lambda_minus, long long feature_dim, double epsilon,
                                  double delta, double beta_T, double sigma) {
  if (!(lambda_minus > 0.0))
    throw AssumptionViolation("phase length needs lambda_minus > 0 (seed-set features must span the RKHS)");
  if (feature_dim < 1 || !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || !(beta_T >= 0.0) ||
      !(sigma > 0.0))
    throw InputError("t_prime_finite: invalid arguments");
  PhaseLength out;
  out.t_eps = 8.0 * sigma * sigma * beta_T / (lambda_minus * epsilon * epsilon);
  out.t_delta = 8.0 / lambda_minus * std::log(static_cast<double>(feature_dim) / delta);
  out.tprime = static_cast<long long>(std::ceil(std::max({out.t_eps, out.t_delta, 0.0})));
  return out;
}

/// Approximated (QFF/RFF) RKHS:
///   t_eps = 16 sigma^2 beta_T / (lambda eps^2),  t_delta = (8 / lambda) log(D_g / delta),
///   eps0_max = eps^2 sigma^2 / (32 T^3 beta_T).
inline PhaseLength t_prime_infinite(double lambda_minus, long long feature_dim, double epsilon,
                                    double delta, double beta_T, double sigma, long long T) {
  if (!(lambda_minus > 0.0))
    throw AssumptionViolation("phase length needs approximate lambda_minus > 0");
  if (feature_dim < 1 || !(epsilon > 0.0) || !(delta > 0.0 && delta < 1.0) || !(beta_T > 0.0) ||
      !(sigma > 0.0) || T < 1)
    throw InputError("t_prime_infinite: invalid arguments");
  PhaseLength out;
  out.t_eps = 16.0 * sigma * sigma * beta_T / (lambda_minus * epsilon * epsilon);
  out.t_delta = 8.0 / lambda_minus * std::log(static_cast<double>(feature_dim) / delta);
  out.tprime = static_cast<long long>(std::ceil(std::max({out.t_eps, out.t_delta, 0.0})));
  const double TT = static_cast<double>(T);
  out.eps0_max = epsilon * epsilon * sigma * sigma / (32.0 * TT * TT * TT * beta_T);
  return out;
}

/// Smallest nodes-per-dimension whose QFF bound meets eps0 within the feature
/// budget, or nullopt if none does.
inline std::optional<int> qff_nodes_for(double eps0, int d, double lengthscale,
                                        std::size_t budget = kDefaultFeatureBudget) {
  for (int nodes = 1;; ++nodes) {
    if (2.0 * std::pow(static_cast<double>(nodes), d) > static_cast<double>(budget)) return std::nullopt;
    if (qff_error_bound(d, lengthscale, nodes) <= eps0) return nodes;
  }
}

/// lambda_min of (1/m) sum_i phi(x_i) phi(x_i)^T over the m seed points (rows).
inline double lambda_minus(const Eigen::MatrixXd& seed_points, const FeatureMap& feature_map) {
  if (seed_points.rows() == 0) throw InputError("lambda_minus: empty seed set");
  if (feature_map.dim() > kEigenFeatureBudget)
    throw CapacityError("lambda_minus: feature dimension " + std::to_string(feature_map.dim()) +
                        " exceeds eigen budget");
  const Eigen::MatrixXd Phi = feature_map.feature_matrix(seed_points);
  const Eigen::MatrixXd Sigma = Phi.transpose() * Phi / static_cast<double>(seed_points.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma, Eigen::EigenvaluesOnly);
  return es.eigenvalues()[0];
}

/// First round t (1-based) at which the safe-set size has been constant over
/// the last `window` rounds; `cap` if that never happens before it.
inline int plateau_stop(std::span<const int> sizes, int window, int cap) {
  if (window < 1 || cap < 1) throw InputError("plateau_stop: window and cap must be >= 1");
  int run = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const int t = static_cast<int>(i) + 1;
    run = (i > 0 && sizes[i] == sizes[i - 1]) ? run + 1 : 1;
    if (run >= window) return std::min(t, cap);
    if (t >= cap) return cap;
  }
  return cap;
}

}  // namespace sgpucb
