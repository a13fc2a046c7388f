#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sgpucb/features.hpp"
#include "sgpucb/gp.hpp"

using namespace sgpucb;

namespace {

struct Dataset {
  std::vector<Eigen::VectorXd> X;
  std::vector<double> y;
};

Dataset random_dataset(int t, int d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Dataset ds;
  for (int i = 0; i < t; ++i) {
    ds.X.push_back(oracle::unit_ball_point(d, rng));
    ds.y.push_back(n(rng));
  }
  return ds;
}

}  // namespace

TEST(Gp, PriorPrediction) {
  GaussianProcess gp(KernelSpec::squared_exponential(1.0, 2), 0.01);
  const Prediction p = gp.predict(Eigen::Vector2d(0.3, 0.1));
  EXPECT_EQ(p.mean, 0.0);
  EXPECT_EQ(p.variance, 1.0);
}

TEST(Gp, SingleObservation) {
  GaussianProcess gp(KernelSpec::squared_exponential(1.0, 1), 0.01);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 0.2);
  gp.update(x, 1.0);
  const Prediction p = gp.predict(x);
  EXPECT_NEAR(p.mean, 0.990099009802960, 1e-12);
  EXPECT_NEAR(p.variance, 0.009900990197039506, 1e-12);
  EXPECT_EQ(gp.size(), 1);
}

TEST(Gp, FactorDimensionTracksObservations) {
  std::mt19937_64 rng(21);
  GaussianProcess gp(KernelSpec::squared_exponential(0.5, 2), 0.01);
  const Dataset ds = random_dataset(7, 2, rng);
  for (int i = 0; i < 7; ++i) gp.update(ds.X[i], ds.y[i]);
  EXPECT_EQ(gp.factor_matrix().rows(), 7);
  EXPECT_EQ(gp.factor_matrix().cols(), 7);
}

TEST(Gp, MatchesDenseInverseOracle) {
  std::mt19937_64 rng(22);
  for (const auto& k : {KernelSpec::squared_exponential(0.3, 2), KernelSpec::squared_exponential(1.0, 3),
                        KernelSpec::linear(2), KernelSpec::polynomial(3, 2)}) {
    for (int rep = 0; rep < 10; ++rep) {
      const int d = k.dim();
      const Dataset ds = random_dataset(10, d, rng);
      GaussianProcess gp(k, 0.01);
      for (int i = 0; i < 10; ++i) gp.update(ds.X[i], ds.y[i]);
      for (int q = 0; q < 20; ++q) {
        const Eigen::VectorXd x = oracle::unit_ball_point(d, rng);
        const auto [m, v] = oracle::dense_posterior(k, ds.X, ds.y, 0.01 + kGramJitter, x);
        const Prediction p = gp.predict(x);
        EXPECT_NEAR(p.mean, m, 1e-8);
        EXPECT_NEAR(p.variance, v, 1e-8);
      }
    }
  }
}

TEST(Gp, IncrementalEqualsRefit) {
  std::mt19937_64 rng(23);
  const auto k = KernelSpec::squared_exponential(0.4, 2);
  const Dataset ds = random_dataset(150, 2, rng);
  GaussianProcess inc(k, 0.01, 1000);  // never refits
  for (int i = 0; i < 150; ++i) inc.update(ds.X[i], ds.y[i]);
  GaussianProcess full = inc;
  full.refit();
  for (int q = 0; q < 500; ++q) {
    const Eigen::VectorXd x = oracle::unit_ball_point(2, rng);
    EXPECT_NEAR(inc.predict(x).mean, full.predict(x).mean, 1e-8);
    EXPECT_NEAR(inc.predict(x).variance, full.predict(x).variance, 1e-8);
  }
}

TEST(Gp, NoiseDominatedUpdateBarelyMoves) {
  GaussianProcess gp(KernelSpec::squared_exponential(1.0, 1), 1e6);
  gp.update(Eigen::VectorXd::Constant(1, 0.0), 3.0);
  for (double q : {-1.0, 0.0, 0.5, 1.0}) EXPECT_LT(std::abs(gp.predict(Eigen::VectorXd::Constant(1, q)).mean), 1e-3);
}

TEST(Gp, RejectsBadInput) {
  EXPECT_THROW(GaussianProcess(KernelSpec::linear(1), 0.0), InputError);
  GaussianProcess gp(KernelSpec::linear(2), 0.1);
  EXPECT_THROW(gp.update(Eigen::Vector2d(0, 0), std::nan("")), InputError);
  EXPECT_THROW(gp.update(Eigen::Vector3d(0, 0, 0), 1.0), InputError);
}

TEST(Gp, VarianceBoundedAndShrinking) {
  std::mt19937_64 rng(24);
  const auto k = KernelSpec::squared_exponential(0.2, 2);
  const Dataset ds = random_dataset(40, 2, rng);
  Eigen::MatrixXd grid(100, 2);
  for (int i = 0; i < 100; ++i) grid.row(i) = oracle::unit_ball_point(2, rng).transpose();
  GaussianProcess gp(k, 0.01, 8);
  Eigen::VectorXd prev = Eigen::VectorXd::Ones(100);
  for (int t = 0; t < 40; ++t) {
    gp.update(ds.X[t], ds.y[t]);
    for (int i = 0; i < 100; ++i) {
      const double v = gp.predict(grid.row(i).transpose()).variance;
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0 + 1e-8);
      EXPECT_LE(v, prev[i] + 1e-8);
      prev[i] = v;
    }
  }
}

TEST(Beta, ClosedFormAndMonotonicity) {
  EXPECT_NEAR(beta(1, 100, 0.01), 20.802375710013747, 1e-12);
  EXPECT_GT(beta(2, 100, 0.01), beta(1, 100, 0.01));
  EXPECT_NEAR(beta(7, 50, 0.01) - beta(7, 50, 0.1), 2.0 * std::log(10.0), 1e-12);
  EXPECT_THROW(beta(1, 100, 1.0), InputError);
  EXPECT_THROW(beta(1, 100, 0.0), InputError);
  EXPECT_THROW(beta(0, 100, 0.1), InputError);
}

TEST(ConfidenceBand, Identities) {
  GaussianProcess gp(KernelSpec::squared_exponential(1.0, 2), 0.01);
  const Eigen::Vector2d x(0.1, 0.2);
  const ConfidenceBand prior = confidence_bounds(gp, 4.0, x);
  EXPECT_EQ(prior.lower, -2.0);
  EXPECT_EQ(prior.upper, 2.0);
  std::mt19937_64 rng(25);
  const Dataset ds = random_dataset(12, 2, rng);
  for (int i = 0; i < 12; ++i) gp.update(ds.X[i], ds.y[i]);
  const ConfidenceBand zero = confidence_bounds(gp, 0.0, x);
  EXPECT_EQ(zero.lower, zero.upper);
  EXPECT_EQ(zero.lower, gp.predict(x).mean);
  for (int q = 0; q < 50; ++q) {
    const Eigen::VectorXd y = oracle::unit_ball_point(2, rng);
    const double b = 0.5 + q;
    const ConfidenceBand band = confidence_bounds(gp, b, y);
    EXPECT_LE(band.lower, band.upper);
    EXPECT_NEAR(band.width(), 2.0 * std::sqrt(b) * gp.predict(y).stddev(), 1e-12);
  }
  EXPECT_THROW(confidence_bounds(gp, -1.0, x), InputError);
}

TEST(FeatureVariance, EmptyDesignGivesPrior) {
  const Eigen::Vector3d phi(0.2, 0.4, -0.1);
  EXPECT_NEAR(variance_via_features(Eigen::MatrixXd(0, 3), 0.01, phi), phi.squaredNorm(), 1e-15);
}

TEST(FeatureVariance, LinearWeightedNormForm) {
  std::mt19937_64 rng(26);
  Eigen::MatrixXd X(8, 2);
  for (int i = 0; i < 8; ++i) X.row(i) = oracle::unit_ball_point(2, rng).transpose();
  const Eigen::Vector2d x(0.3, -0.5);
  const double s2 = 0.04;
  const Eigen::Matrix2d A = X.transpose() * X + s2 * Eigen::Matrix2d::Identity();
  const double expected = s2 * x.dot(oracle::gauss_jordan_inverse(A) * x);
  EXPECT_NEAR(variance_via_features(X, s2, x), expected, 1e-14);
}

TEST(FeatureVariance, MatchesKernelFormPolynomial) {
  std::mt19937_64 rng(27);
  const auto k = KernelSpec::polynomial(2, 2);
  const FeatureMap fm = FeatureMap::explicit_map(k);
  const Dataset ds = random_dataset(15, 2, rng);
  GaussianProcess gp(k, 0.01);
  Eigen::MatrixXd obs(15, 2);
  for (int i = 0; i < 15; ++i) {
    gp.update(ds.X[i], ds.y[i]);
    obs.row(i) = ds.X[i].transpose();
  }
  const Eigen::MatrixXd Phi = fm.feature_matrix(obs);
  for (int q = 0; q < 30; ++q) {
    const Eigen::VectorXd x = oracle::unit_ball_point(2, rng);
    EXPECT_NEAR(variance_via_features(Phi, 0.01, fm(x)), gp.predict(x).variance, 1e-8);
  }
}

TEST(CandidatePosterior, TracksGpExactly) {
  std::mt19937_64 rng(28);
  const auto k = KernelSpec::squared_exponential(0.3, 2);
  Eigen::MatrixXd C(60, 2);
  for (int i = 0; i < 60; ++i) C.row(i) = oracle::unit_ball_point(2, rng).transpose();
  CandidatePosterior post(k, 0.01, C, 16);
  std::uniform_int_distribution<int> pick(0, 59);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    post.update(pick(rng), n(rng));
    if (t % 9 != 0) continue;
    for (int i = 0; i < 60; ++i) {
      const Prediction p = post.gp().predict(C.row(i).transpose());
      EXPECT_NEAR(post.mean(i), p.mean, 1e-8);
      EXPECT_NEAR(post.variance(i), p.variance, 1e-8);
    }
  }
}

TEST(Calibration, BetaBandCoversPriorDraws) {
  // 500 prior draws over 30 points, 10 noisy observations each; the
  // delta = 0.05 band must cover the truth in >= 95% of pairs (3-sigma slack).
  std::mt19937_64 rng(29);
  const int n = 30, draws = 500;
  const auto k = KernelSpec::squared_exponential(0.5, 2);
  Eigen::MatrixXd P(n, 2);
  for (int i = 0; i < n; ++i) P.row(i) = oracle::unit_ball_point(2, rng).transpose();
  Eigen::MatrixXd K = gram_matrix(k, P);
  K.diagonal().array() += 1e-8;
  const Eigen::MatrixXd L = K.llt().matrixL();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, n - 1);
  const double sigma = 0.1, b = beta(10, n, 0.05);
  long covered = 0, total = 0;
  for (int s = 0; s < draws; ++s) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = normal(rng);
    const Eigen::VectorXd f = L * z;
    CandidatePosterior post(k, sigma * sigma, P);
    for (int t = 0; t < 10; ++t) {
      const int i = pick(rng);
      post.update(i, f[i] + sigma * normal(rng));
    }
    for (int i = 0; i < n; ++i) {
      const ConfidenceBand band = post.band(i, b);
      covered += band.lower <= f[i] && f[i] <= band.upper;
      ++total;
    }
  }
  const double rate = static_cast<double>(covered) / total;
  EXPECT_GE(rate, 0.95 - 3.0 * std::sqrt(0.05 * 0.95 / total));
}
