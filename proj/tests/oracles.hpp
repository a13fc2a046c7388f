#pragma once

// Independent reference implementations used only by tests. They avoid the
// library's factorizations on purpose.

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Cyclic Jacobi eigenvalues of a symmetric matrix, ascending.
inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd A, int sweeps = 100) {
  const Eigen::Index n = A.rows();
  for (int s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) off += A(i, j) * A(i, j);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(A(p, q)) < 1e-300) continue;
        const double theta = (A(q, q) - A(p, p)) / (2.0 * A(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), sn = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - sn * akq;
          A(k, q) = sn * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - sn * aqk;
          A(q, k) = sn * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = A(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Gauss-Jordan inverse with partial pivoting.
inline Eigen::MatrixXd gauss_jordan_inverse(Eigen::MatrixXd A) {
  const Eigen::Index n = A.rows();
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index piv = c;
    for (Eigen::Index r = c + 1; r < n; ++r)
      if (std::abs(A(r, c)) > std::abs(A(piv, c))) piv = r;
    A.row(c).swap(A.row(piv));
    I.row(c).swap(I.row(piv));
    const double d = A(c, c);
    A.row(c) /= d;
    I.row(c) /= d;
    for (Eigen::Index r = 0; r < n; ++r)
      if (r != c) {
        const double m = A(r, c);
        A.row(r) -= m * A.row(c);
        I.row(r) -= m * I.row(c);
      }
  }
  return I;
}

/// Dense GP posterior (mean, variance) at `query` from kernel callable k.
template <class K>
std::pair<double, double> dense_posterior(const K& k, const std::vector<Eigen::VectorXd>& X,
                                          const std::vector<double>& y, double noise_var,
                                          const Eigen::VectorXd& query) {
  const auto t = static_cast<Eigen::Index>(X.size());
  if (t == 0) return {0.0, k(query, query)};
  Eigen::MatrixXd G(t, t);
  Eigen::VectorXd kv(t), yv(t);
  for (Eigen::Index i = 0; i < t; ++i) {
    for (Eigen::Index j = 0; j < t; ++j) G(i, j) = k(X[i], X[j]);
    G(i, i) += noise_var;
    kv[i] = k(X[i], query);
    yv[i] = y[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd Ginv = gauss_jordan_inverse(G);
  return {kv.dot(Ginv * yv), k(query, query) - kv.dot(Ginv * kv)};
}

template <class Rng>
Eigen::VectorXd unit_ball_point(int d, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = n(rng);
  return v * (std::pow(u(rng), 1.0 / d) / v.norm());
}

}  // namespace oracle
