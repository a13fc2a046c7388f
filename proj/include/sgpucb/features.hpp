#pragma once

// Finite-dimensional feature maps: exact maps for linear/polynomial kernels and
// quadrature (QFF) / random (RFF) Fourier approximations of the SE kernel.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "sgpucb/errors.hpp"
#include "sgpucb/kernel.hpp"

namespace sgpucb {

/// Largest feature dimension any map may produce.
inline constexpr std::size_t kDefaultFeatureBudget = 1u << 16;

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

namespace detail {

// All multi-indices alpha in N^d with |alpha| <= p, in graded lexicographic order.
inline std::vector<std::vector<int>> monomial_exponents(int d, int p) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(d, 0);
  auto rec = [&](auto&& self, int pos, int remaining) -> void {
    if (pos == d) {
      out.push_back(cur);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      cur[pos] = e;
      self(self, pos + 1, remaining - e);
    }
    cur[pos] = 0;
  };
  rec(rec, 0, p);
  return out;
}

inline double log_factorial(int n) { return std::lgamma(static_cast<double>(n) + 1.0); }

}  // namespace detail

/// Gauss-Hermite rule for the weight exp(-s^2): nodes are the roots of the
/// physicists' Hermite polynomial H_n, weights are normalized to sum to one
/// (i.e. divided by sqrt(pi)). Golub-Welsch on the Jacobi matrix.
struct HermiteRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline HermiteRule gauss_hermite(int n) {
  if (n < 1) throw InputError("gauss_hermite: need at least one node");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    J(k, k - 1) = std::sqrt(k / 2.0);
    J(k - 1, k) = J(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  HermiteRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()[i];
    const double v0 = es.eigenvectors()(0, i);
    rule.weights[i] = v0 * v0;
  }
  return rule;
}

/// Uniform-error bound of the QFF approximation of the SE kernel on [0,1]^d:
///   d 2^(d-1) / (sqrt(2) D^D) * (e / (4 l^2))^D
inline double qff_error_bound(int d, double lengthscale, int nodes_per_dim) {
  if (d < 1 || !(lengthscale > 0.0) || nodes_per_dim < 1)
    throw InputError("qff_error_bound: need d >= 1, lengthscale > 0, nodes >= 1");
  const double D = nodes_per_dim;
  const double log_bound = std::log(d) + (d - 1) * std::numbers::ln2 - 0.5 * std::numbers::ln2 -
                           D * std::log(D) + D * (1.0 - std::log(4.0 * lengthscale * lengthscale));
  return std::exp(log_bound);
}

/// sqrt of the trace of the Hessian of the SE kernel at zero: rho^2 = d / l^2.
inline double se_hessian_trace_root(double lengthscale, int d) {
  return std::sqrt(static_cast<double>(d)) / lengthscale;
}

/// Number of random Fourier features sufficient for an eps0-uniform
/// approximation with probability 1 - delta:
///   8 (d + 2) / eps0^2 * log(16 rho sqrt(m) / (eps0 sqrt(delta))),  m = d.
/// Rounded up to the next even integer, never below 2.
inline long long rff_dim_bound(double delta, double eps0, int d, double rho) {
  if (!(delta > 0.0 && delta < 1.0) || !(eps0 > 0.0 && eps0 < 1.0) || d < 1 || !(rho > 0.0))
    throw InputError("rff_dim_bound: need delta, eps0 in (0,1), d >= 1, rho > 0");
  const double m = d;
  const double raw = 8.0 * (d + 2) / (eps0 * eps0) *
                     std::log(16.0 * rho * std::sqrt(m) / (eps0 * std::sqrt(delta)));
  long long n = raw <= 2.0 ? 2 : static_cast<long long>(std::ceil(raw));
  if (n % 2 != 0) ++n;
  return n;
}

/// A finite-dimensional feature map phi with phi(x) . phi(y) ~= k(x, y).
class FeatureMap {
 public:
  enum class Kind { Explicit, Quadrature, Random };

  /// Exact map for Linear (identity) and Polynomial (weighted monomials) kernels.
  static FeatureMap explicit_map(const KernelSpec& kernel,
                                 std::size_t budget = kDefaultFeatureBudget) {
    FeatureMap m(Kind::Explicit, kernel.dim());
    m.kernel_family_ = kernel.family();
    if (kernel.family() == KernelFamily::SquaredExponential)
      throw UnsupportedKernelError("explicit feature map requested for an SE kernel (infinite-dimensional RKHS)");
    if (kernel.family() == KernelFamily::Linear) {
      m.out_dim_ = kernel.dim();
    } else {
      const int p = kernel.degree();
      const double count = binomial(kernel.dim() + p, kernel.dim());
      if (count > static_cast<double>(budget))
        throw CapacityError("polynomial feature dimension exceeds budget");
      m.exponents_ = detail::monomial_exponents(kernel.dim(), p);
      m.coeffs_.reserve(m.exponents_.size());
      // (c (x.y + 1))^p = c^p sum_alpha p! / (alpha_0! alpha!) x^alpha y^alpha
      for (const auto& alpha : m.exponents_) {
        int total = 0;
        double log_coeff = detail::log_factorial(p) + p * std::log(kernel.scale());
        for (int a : alpha) {
          total += a;
          log_coeff -= detail::log_factorial(a);
        }
        log_coeff -= detail::log_factorial(p - total);
        m.coeffs_.push_back(std::exp(0.5 * log_coeff));
      }
      m.out_dim_ = static_cast<int>(m.exponents_.size());
    }
    return m;
  }

  /// QFF map for the SE kernel with `nodes_per_dim` Gauss-Hermite nodes per
  /// axis; output dimension 2 * nodes_per_dim^d. Inputs are expected in [0,1]^d.
  static FeatureMap quadrature(double lengthscale, int nodes_per_dim, int d,
                               std::size_t budget = kDefaultFeatureBudget) {
    if (!(lengthscale > 0.0) || nodes_per_dim < 1 || d < 1)
      throw InputError("quadrature feature map: need lengthscale > 0, nodes >= 1, d >= 1");
    double grid = 1.0;
    for (int i = 0; i < d; ++i) {
      grid *= nodes_per_dim;
      if (2.0 * grid > static_cast<double>(budget))
        throw CapacityError("QFF dimension 2 * " + std::to_string(nodes_per_dim) + "^" +
                            std::to_string(d) + " exceeds feature budget");
    }
    FeatureMap m(Kind::Quadrature, d);
    m.lengthscale_ = lengthscale;
    m.nodes_per_dim_ = nodes_per_dim;
    const HermiteRule rule = gauss_hermite(nodes_per_dim);
    const auto n_grid = static_cast<Eigen::Index>(grid);
    m.frequencies_.resize(n_grid, d);
    m.sqrt_weights_.resize(n_grid);
    const double scale = std::sqrt(2.0) / lengthscale;
    for (Eigen::Index i = 0; i < n_grid; ++i) {
      Eigen::Index rem = i;
      double w = 1.0;
      for (int j = d - 1; j >= 0; --j) {
        const auto node = static_cast<std::size_t>(rem % nodes_per_dim);
        rem /= nodes_per_dim;
        m.frequencies_(i, j) = scale * rule.nodes[node];
        w *= rule.weights[node];
      }
      m.sqrt_weights_[i] = std::sqrt(w);
    }
    m.out_dim_ = static_cast<int>(2 * n_grid);
    return m;
  }

  /// QFF map for an SE kernel whose inputs live in the unit ball: points are
  /// mapped affinely from [-1,1]^d into [0,1]^d, which halves distances, so the
  /// cube-side lengthscale is lengthscale / 2.
  static FeatureMap quadrature_on_unit_ball(double lengthscale, int nodes_per_dim, int d,
                                            std::size_t budget = kDefaultFeatureBudget) {
    FeatureMap m = quadrature(lengthscale / 2.0, nodes_per_dim, d, budget);
    m.rescale_from_ball_ = true;
    return m;
  }

  /// RFF map sqrt(2/D) [sin(w_1 . x), cos(w_1 . x), ...], w_j ~ N(0, I / l^2).
  static FeatureMap random(const KernelSpec& kernel, int n_features, std::uint64_t seed,
                           std::size_t budget = kDefaultFeatureBudget) {
    if (!kernel.stationary())
      throw UnsupportedKernelError("random Fourier features need a stationary kernel");
    if (n_features < 2 || n_features % 2 != 0)
      throw InputError("RFF dimension must be even and >= 2");
    if (static_cast<std::size_t>(n_features) > budget)
      throw CapacityError("RFF dimension exceeds feature budget");
    FeatureMap m(Kind::Random, kernel.dim());
    m.lengthscale_ = kernel.lengthscale();
    m.seed_ = seed;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / kernel.lengthscale());
    m.frequencies_.resize(n_features / 2, kernel.dim());
    for (Eigen::Index i = 0; i < m.frequencies_.rows(); ++i)
      for (Eigen::Index j = 0; j < m.frequencies_.cols(); ++j) m.frequencies_(i, j) = normal(rng);
    m.out_dim_ = n_features;
    return m;
  }

  Kind kind() const { return kind_; }
  int input_dim() const { return in_dim_; }
  int dim() const { return out_dim_; }
  int nodes_per_dim() const { return nodes_per_dim_; }
  /// Lengthscale seen by the map in its own input coordinates.
  double lengthscale() const { return lengthscale_; }
  bool rescales_from_ball() const { return rescale_from_ball_; }

  Eigen::VectorXd operator()(const PointRef& x) const {
    if (x.size() != in_dim_) throw InputError("feature map: point dimension mismatch");
    Eigen::VectorXd out(out_dim_);
    switch (kind_) {
      case Kind::Explicit:
        if (kernel_family_ == KernelFamily::Linear) {
          out = x;
        } else {
          for (std::size_t k = 0; k < exponents_.size(); ++k) {
            double v = coeffs_[k];
            for (int j = 0; j < in_dim_; ++j)
              for (int e = 0; e < exponents_[k][j]; ++e) v *= x[j];
            out[static_cast<Eigen::Index>(k)] = v;
          }
        }
        break;
      case Kind::Quadrature: {
        const Eigen::VectorXd z = rescale_from_ball_ ? Eigen::VectorXd((x.array() + 1.0) / 2.0)
                                                     : Eigen::VectorXd(x);
        const Eigen::Index g = frequencies_.rows();
        const Eigen::VectorXd phase = frequencies_ * z;
        for (Eigen::Index i = 0; i < g; ++i) {
          out[i] = sqrt_weights_[i] * std::cos(phase[i]);
          out[g + i] = sqrt_weights_[i] * std::sin(phase[i]);
        }
        break;
      }
      case Kind::Random: {
        const Eigen::VectorXd phase = frequencies_ * x;
        const double s = std::sqrt(2.0 / out_dim_);
        for (Eigen::Index i = 0; i < phase.size(); ++i) {
          out[2 * i] = s * std::sin(phase[i]);
          out[2 * i + 1] = s * std::cos(phase[i]);
        }
        break;
      }
    }
    return out;
  }

  /// Stack phi(x_i)^T for the rows of `points` into an n x dim() matrix.
  Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& points) const {
    Eigen::MatrixXd Phi(points.rows(), out_dim_);
    for (Eigen::Index i = 0; i < points.rows(); ++i)
      Phi.row(i) = (*this)(points.row(i).transpose()).transpose();
    return Phi;
  }

 private:
  FeatureMap(Kind kind, int in_dim) : kind_(kind), in_dim_(in_dim) {}

  Kind kind_;
  int in_dim_;
  int out_dim_ = 0;
  KernelFamily kernel_family_ = KernelFamily::SquaredExponential;
  std::vector<std::vector<int>> exponents_;
  std::vector<double> coeffs_;
  double lengthscale_ = 1.0;
  int nodes_per_dim_ = 0;
  bool rescale_from_ball_ = false;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd frequencies_;
  Eigen::VectorXd sqrt_weights_;
};

inline Eigen::VectorXd explicit_feature_map(const KernelSpec& kernel, const PointRef& x) {
  return FeatureMap::explicit_map(kernel)(x);
}

inline Eigen::VectorXd qff_feature_map(double lengthscale, int nodes_per_dim, int d,
                                       const PointRef& x) {
  return FeatureMap::quadrature(lengthscale, nodes_per_dim, d)(x);
}

inline Eigen::VectorXd rff_feature_map(const KernelSpec& kernel, int n_features,
                                       std::uint64_t seed, const PointRef& x) {
  return FeatureMap::random(kernel, n_features, seed)(x);
}

}  // namespace sgpucb
