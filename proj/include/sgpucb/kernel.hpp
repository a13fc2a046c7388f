#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgpucb/errors.hpp"

namespace sgpucb {

using Point = Eigen::VectorXd;
using PointRef = Eigen::Ref<const Eigen::VectorXd>;

enum class KernelFamily { SquaredExponential, Linear, Polynomial };

inline std::string to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::SquaredExponential: return "se";
    case KernelFamily::Linear: return "linear";
    case KernelFamily::Polynomial: return "polynomial";
  }
  return "unknown";
}

/// Kernel family plus hyperparameters. Immutable once built.
///
/// All families satisfy k(x, x) <= 1 on the unit ball:
///  - SquaredExponential: k(x, y) = exp(-|x - y|^2 / (2 l^2))
///  - Linear:             k(x, y) = x . y
///  - Polynomial:         k(x, y) = (c (x . y + 1))^p with 0 < c <= 1/2
///    (c = 1/2 is the normalized form ((x . y + 1) / 2)^p).
class KernelSpec {
 public:
  static KernelSpec squared_exponential(double lengthscale, int dim) {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
      throw InputError("squared-exponential lengthscale must be positive");
    KernelSpec k(KernelFamily::SquaredExponential, dim);
    k.lengthscale_ = lengthscale;
    return k;
  }

  static KernelSpec linear(int dim) { return KernelSpec(KernelFamily::Linear, dim); }

  static KernelSpec polynomial(int degree, int dim, double scale = 0.5) {
    if (degree < 1) throw InputError("polynomial degree must be >= 1");
    if (!(scale > 0.0) || scale > 0.5)
      throw InputError("polynomial scale must lie in (0, 1/2] to keep k(x,x) <= 1 on the unit ball");
    KernelSpec k(KernelFamily::Polynomial, dim);
    k.degree_ = degree;
    k.scale_ = scale;
    return k;
  }

  KernelFamily family() const { return family_; }
  int dim() const { return dim_; }
  double lengthscale() const { return lengthscale_; }
  int degree() const { return degree_; }
  double scale() const { return scale_; }

  bool stationary() const { return family_ == KernelFamily::SquaredExponential; }
  bool finite_dimensional() const { return family_ != KernelFamily::SquaredExponential; }

  double operator()(const PointRef& x, const PointRef& y) const {
    if (x.size() != dim_ || y.size() != dim_)
      throw InputError("kernel evaluated on points of dimension " + std::to_string(x.size()) +
                       " and " + std::to_string(y.size()) + ", expected " + std::to_string(dim_));
    return eval_unchecked(x, y);
  }

  double eval_unchecked(const PointRef& x, const PointRef& y) const {
    switch (family_) {
      case KernelFamily::SquaredExponential: {
        double sq = 0.0;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
          const double diff = x[i] - y[i];
          sq += diff * diff;
        }
        return std::exp(-sq / (2.0 * lengthscale_ * lengthscale_));
      }
      case KernelFamily::Linear:
        return x.dot(y);
      case KernelFamily::Polynomial:
        return std::pow(scale_ * (x.dot(y) + 1.0), degree_);
    }
    return 0.0;
  }

  bool operator==(const KernelSpec&) const = default;

 private:
  KernelSpec(KernelFamily family, int dim) : family_(family), dim_(dim) {
    if (dim < 1) throw InputError("kernel ambient dimension must be >= 1");
  }

  KernelFamily family_;
  int dim_;
  double lengthscale_ = 1.0;
  int degree_ = 1;
  double scale_ = 0.5;
};

inline double eval(const KernelSpec& kernel, const PointRef& x, const PointRef& y) {
  return kernel(x, y);
}

/// Gram matrix over the rows of `points` (n x d).
inline Eigen::MatrixXd gram_matrix(const KernelSpec& kernel, const Eigen::MatrixXd& points) {
  if (points.cols() != kernel.dim()) throw InputError("gram_matrix: point dimension mismatch");
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel.eval_unchecked(points.row(i).transpose(), points.row(j).transpose());
      K(i, j) = v;
      K(j, i) = v;
    }
  }
  return K;
}

/// Cross-covariance between the rows of `a` (m x d) and `b` (n x d).
inline Eigen::MatrixXd cross_gram(const KernelSpec& kernel, const Eigen::MatrixXd& a,
                                  const Eigen::MatrixXd& b) {
  if (a.cols() != kernel.dim() || b.cols() != kernel.dim())
    throw InputError("cross_gram: point dimension mismatch");
  Eigen::MatrixXd K(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      K(i, j) = kernel.eval_unchecked(a.row(i).transpose(), b.row(j).transpose());
  return K;
}

}  // namespace sgpucb
