#pragma once

// Hand-built instances shared by the unit tests and the acceptance runner.

#include <cmath>
#include <random>
#include <vector>

#include "sgpucb/sgpucb.hpp"

namespace sgpucb::fixtures {

/// 1-D points {0, 0.5, 1}, g = {1.0, 0.6, 0.2}, h = 0.5, noiseless.
inline ProblemInstance three_point(double epsilon = 0.01) {
  Eigen::MatrixXd pts(3, 1);
  pts << 0.0, 0.5, 1.0;
  return make_instance(DecisionSet(pts), {0.1, 0.5, 0.9}, {1.0, 0.6, 0.2}, 0.5, epsilon, 0.0, {0},
                       KernelSpec::squared_exponential(0.5, 1), KernelSpec::squared_exponential(0.5, 1));
}

/// Noiseless 3-point instance whose SGP-UCB trace was checked against an
/// independent dense-GP simulation: SE(1) kernels, delta = 0.1, model noise
/// 0.1, T = 5.
/// T' = 1 and T' = 0 both give actions {0, 1, 1, 1, 1}; with T' = 0 the
/// first round has an empty safe set and falls back to the seed point.
inline ProblemInstance hand_trace() {
  Eigen::MatrixXd pts(3, 1);
  pts << 0.0, 0.5, 1.0;
  return make_instance(DecisionSet(pts), {0.1, 0.5, 0.9}, {2.5, 2.0, -0.5}, 0.5, 0.01, 0.0, {0},
                       KernelSpec::squared_exponential(1.0, 1), KernelSpec::squared_exponential(1.0, 1));
}

/// Linear-kernel instance in R^3 whose seed set is the standard basis. The
/// best safe point (1,1,1)/sqrt(3) is safe but not Lipschitz-reachable from
/// the basis vectors. Extra random points all lie on the unsafe side.
inline ProblemInstance linear_pathology(std::uint64_t seed, int extra_points = 10, double sigma = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Vector3d theta_g(0.5, 0.5, 0.5);
  Eigen::Vector3d theta_f(0.5, 0.5, 0.5);
  for (int k = 0; k < 3; ++k) theta_f[k] += 0.02 * normal(rng);

  const double r3 = 1.0 / std::sqrt(3.0);
  std::vector<Eigen::Vector3d> pts = {
      {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}, {r3, r3, r3}, {-r3, -r3, -r3}};
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  while (static_cast<int>(pts.size()) < 8 + extra_points) {
    Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
    v *= std::cbrt(unif(rng)) / v.norm();
    if (theta_g.dot(v) < -0.05) pts.push_back(v);
  }
  Eigen::MatrixXd P(static_cast<Eigen::Index>(pts.size()), 3);
  std::vector<double> f, g;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    P.row(static_cast<Eigen::Index>(i)) = pts[i].transpose();
    f.push_back(theta_f.dot(pts[i]));
    g.push_back(theta_g.dot(pts[i]));
  }
  return make_instance(DecisionSet(P), f, g, 0.3, 0.01, sigma, {0, 1, 2}, KernelSpec::linear(3),
                       KernelSpec::linear(3), seed);
}

/// Index of (1,1,1)/sqrt(3) in linear_pathology.
inline constexpr int kPathologyOptimum = 6;

}  // namespace sgpucb::fixtures
