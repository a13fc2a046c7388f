#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "sgpucb/errors.hpp"
#include "sgpucb/kernel.hpp"

namespace sgpucb {

/// Added to the Gram diagonal before factorization.
inline constexpr double kGramJitter = 1e-10;
/// Updates between full refactorizations of the Gram matrix.
inline constexpr int kDefaultRefitInterval = 64;

struct Prediction {
  double mean;
  double variance;
  double stddev() const { return std::sqrt(variance); }
};

struct ConfidenceBand {
  double lower;
  double upper;
  double beta;
  double width() const { return upper - lower; }
};

inline ConfidenceBand make_band(double mean, double variance, double beta) {
  const double half = std::sqrt(beta) * std::sqrt(std::max(variance, 0.0));
  return {mean - half, mean + half, beta};
}

/// Exact zero-mean GP posterior with Gaussian observation noise.
///
/// Keeps a lower Cholesky factor L of (K_t + noise_var I) grown one row per
/// observation, and z = L^-1 y, so that for v = L^-1 k_t(x):
///   mean(x) = v . z,   var(x) = k(x, x) - v . v.
class GaussianProcess {
 public:
  GaussianProcess(KernelSpec kernel, double noise_var, int refit_interval = kDefaultRefitInterval)
      : kernel_(std::move(kernel)), noise_var_(noise_var), refit_interval_(refit_interval) {
    if (!(noise_var > 0.0) || !std::isfinite(noise_var))
      throw InputError("GP noise variance must be positive and finite");
    if (refit_interval < 1) throw InputError("refit interval must be >= 1");
  }

  const KernelSpec& kernel() const { return kernel_; }
  double noise_var() const { return noise_var_; }
  Eigen::Index size() const { return t_; }
  const std::vector<Point>& points() const { return points_; }
  const std::vector<double>& values() const { return values_; }

  /// Number of full refactorizations so far; observers use it to invalidate caches.
  int generation() const { return generation_; }

  auto factor() const { return L_.topLeftCorner(t_, t_).triangularView<Eigen::Lower>(); }
  Eigen::MatrixXd factor_matrix() const {
    return Eigen::MatrixXd(L_.topLeftCorner(t_, t_).triangularView<Eigen::Lower>());
  }
  Eigen::VectorXd whitened_values() const { return z_.head(t_); }
  double whitened_value(Eigen::Index i) const { return z_[i]; }
  double factor_diag(Eigen::Index i) const { return L_(i, i); }
  auto factor_row(Eigen::Index i) const { return L_.row(i); }

  /// (K_t + noise_var I)^-1 y.
  Eigen::VectorXd alpha() const {
    Eigen::VectorXd a = z_.head(t_);
    const auto F = factor();
    F.transpose().solveInPlace(a);
    return a;
  }

  /// Condition on one more observation y at x.
  void update(const PointRef& x, double y) {
    if (x.size() != kernel_.dim()) throw InputError("GP update: point dimension mismatch");
    if (!std::isfinite(y)) throw InputError("GP update: observation must be finite");
    reserve(t_ + 1);
    points_.emplace_back(x);
    values_.push_back(y);
    ++updates_since_refit_;
    if (updates_since_refit_ >= refit_interval_) {
      refit();
      return;
    }
    Eigen::VectorXd l = kernel_vector(x);
    if (t_ > 0) factor().solveInPlace(l);
    const double diag = kernel_.eval_unchecked(x, x) + noise_var_ + kGramJitter - l.squaredNorm();
    if (!(diag > 0.0)) {
      refit();
      return;
    }
    const double lt = std::sqrt(diag);
    L_.row(t_).head(t_) = l.transpose();
    L_(t_, t_) = lt;
    z_[t_] = (y - (t_ > 0 ? l.dot(z_.head(t_)) : 0.0)) / lt;
    ++t_;
  }

  /// Rebuild the factorization from all stored observations.
  void refit() {
    const auto n = static_cast<Eigen::Index>(points_.size());
    reserve(n);
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) {
        K(i, j) = kernel_.eval_unchecked(points_[i], points_[j]);
        K(j, i) = K(i, j);
      }
    K.diagonal().array() += noise_var_ + kGramJitter;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) throw NumericError("GP refit: Cholesky failed");
    L_.topLeftCorner(n, n) = llt.matrixL();
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(values_.data(), n);
    llt.matrixL().solveInPlace(y);
    z_.head(n) = y;
    t_ = n;
    updates_since_refit_ = 0;
    ++generation_;
  }

  /// [k(x_1, x), ..., k(x_t, x)].
  Eigen::VectorXd kernel_vector(const PointRef& x) const {
    Eigen::VectorXd k(t_);
    for (Eigen::Index i = 0; i < t_; ++i) k[i] = kernel_.eval_unchecked(points_[i], x);
    return k;
  }

  Prediction predict(const PointRef& x) const {
    if (x.size() != kernel_.dim()) throw InputError("GP predict: point dimension mismatch");
    const double prior = kernel_.eval_unchecked(x, x);
    if (t_ == 0) return {0.0, prior};
    Eigen::VectorXd v = kernel_vector(x);
    factor().solveInPlace(v);
    return {v.dot(z_.head(t_)), std::max(prior - v.squaredNorm(), 0.0)};
  }

 private:
  void reserve(Eigen::Index n) {
    if (n <= L_.rows()) return;
    const Eigen::Index cap = std::max<Eigen::Index>(16, std::max(n, 2 * L_.rows()));
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(cap, cap);
    L.topLeftCorner(t_, t_) = L_.topLeftCorner(t_, t_);
    L_.swap(L);
    Eigen::VectorXd z = Eigen::VectorXd::Zero(cap);
    z.head(t_) = z_.head(t_);
    z_.swap(z);
  }

  KernelSpec kernel_;
  double noise_var_;
  int refit_interval_;
  Eigen::Index t_ = 0;
  int updates_since_refit_ = 0;
  int generation_ = 0;
  std::vector<Point> points_;
  std::vector<double> values_;
  Eigen::MatrixXd L_;
  Eigen::VectorXd z_;
};

/// Confidence multiplier for |D0| actions and two functions
/// sharing the union bound: 2 log(2 |D0| t^2 pi^2 / (6 delta)).
inline double beta(int t, int n_actions, double delta) {
  if (t < 1) throw InputError("beta: t must be >= 1");
  if (n_actions < 1) throw InputError("beta: need at least one action");
  if (!(delta > 0.0 && delta < 1.0)) throw InputError("beta: delta must lie in (0, 1)");
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double tt = static_cast<double>(t);
  return 2.0 * std::log(2.0 * n_actions * tt * tt * pi2 / (6.0 * delta));
}

inline ConfidenceBand confidence_bounds(const GaussianProcess& gp, double beta_t, const PointRef& x) {
  if (!(beta_t >= 0.0)) throw InputError("confidence_bounds: beta must be >= 0");
  const Prediction p = gp.predict(x);
  return make_band(p.mean, p.variance, beta_t);
}

/// Feature-space form of the posterior variance:
///   noise_var * phi_x^T (Phi^T Phi + noise_var I)^-1 phi_x.
inline double variance_via_features(const Eigen::MatrixXd& features, double noise_var,
                                    const Eigen::VectorXd& phi_x) {
  if (features.rows() > 0 && features.cols() != phi_x.size())
    throw InputError("variance_via_features: feature dimension mismatch");
  if (!(noise_var > 0.0)) throw InputError("variance_via_features: noise variance must be positive");
  const Eigen::Index D = phi_x.size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(D, D) * noise_var;
  if (features.rows() > 0) A.selfadjointView<Eigen::Lower>().rankUpdate(features.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(A.selfadjointView<Eigen::Lower>());
  if (llt.info() != Eigen::Success) throw NumericError("variance_via_features: singular system");
  return noise_var * phi_x.dot(llt.solve(phi_x));
}

/// Posterior of one GP tracked over a fixed candidate set.
///
/// Holds V = L^-1 K(X_obs, C) row by row so each observation costs O(t n)
/// and every candidate's mean and variance stay available in O(1).
class CandidatePosterior {
 public:
  CandidatePosterior(KernelSpec kernel, double noise_var, Eigen::MatrixXd candidates,
                     int refit_interval = kDefaultRefitInterval)
      : gp_(std::move(kernel), noise_var, refit_interval), candidates_(std::move(candidates)) {
    if (candidates_.cols() != gp_.kernel().dim())
      throw InputError("CandidatePosterior: candidate dimension mismatch");
    const Eigen::Index n = candidates_.rows();
    prior_var_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Point c = candidates_.row(i).transpose();
      prior_var_[i] = gp_.kernel().eval_unchecked(c, c);
    }
    mean_ = Eigen::VectorXd::Zero(n);
    var_ = prior_var_;
  }

  const GaussianProcess& gp() const { return gp_; }
  Eigen::Index size() const { return candidates_.rows(); }
  const Eigen::MatrixXd& candidates() const { return candidates_; }

  double mean(Eigen::Index i) const { return mean_[i]; }
  double variance(Eigen::Index i) const { return var_[i]; }
  double stddev(Eigen::Index i) const { return std::sqrt(var_[i]); }
  ConfidenceBand band(Eigen::Index i, double beta_t) const { return make_band(mean_[i], var_[i], beta_t); }
  const Eigen::VectorXd& means() const { return mean_; }
  const Eigen::VectorXd& variances() const { return var_; }

  /// Observe candidate `index` with value y.
  void update(Eigen::Index index, double y) { update(candidates_.row(index).transpose(), y); }

  void update(const PointRef& x, double y) {
    const int gen = gp_.generation();
    const Eigen::Index t = gp_.size();
    gp_.update(x, y);
    if (gp_.generation() != gen) {
      recompute();
      return;
    }
    const Eigen::Index n = candidates_.rows();
    if (V_.rows() <= t) {
      Eigen::MatrixXd V = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(16, 2 * V_.rows() + 1), n);
      if (t > 0) V.topRows(t) = V_.topRows(t);
      V_.swap(V);
    }
    const double lt = gp_.factor_diag(t);
    Eigen::RowVectorXd row(n);
    for (Eigen::Index j = 0; j < n; ++j)
      row[j] = gp_.kernel().eval_unchecked(x, candidates_.row(j).transpose());
    if (t > 0) row.noalias() -= gp_.factor_row(t).head(t) * V_.topRows(t);
    row /= lt;
    V_.row(t) = row;
    const double zt = gp_.whitened_value(t);
    mean_ += zt * row.transpose();
    var_ -= row.transpose().cwiseAbs2();
    var_ = var_.cwiseMax(0.0);
  }

  /// Full O(t^2 n) recomputation from the GP factorization.
  void recompute() {
    const Eigen::Index t = gp_.size();
    const Eigen::Index n = candidates_.rows();
    Eigen::MatrixXd obs(t, candidates_.cols());
    for (Eigen::Index i = 0; i < t; ++i) obs.row(i) = gp_.points()[i].transpose();
    Eigen::MatrixXd V = cross_gram(gp_.kernel(), obs, candidates_);
    gp_.factor().solveInPlace(V);
    V_ = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(16, 2 * t), n);
    V_.topRows(t) = V;
    mean_ = V.transpose() * gp_.whitened_values();
    var_ = (prior_var_ - V.colwise().squaredNorm().transpose()).cwiseMax(0.0);
  }

 private:
  GaussianProcess gp_;
  Eigen::MatrixXd candidates_;
  Eigen::VectorXd prior_var_;
  Eigen::VectorXd mean_;
  Eigen::VectorXd var_;
  Eigen::MatrixXd V_;
};

}  // namespace sgpucb
