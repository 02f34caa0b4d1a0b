#include <doctest.h>

#include <cmath>

#include "simdiag/estimators.hpp"
#include "simdiag/statdist.hpp"

using namespace simdiag;

TEST_CASE("mean_estimator on two identical samples") {
  Mat x(2, 2);
  x << 1, 2, 3, 4;
  const MatrixEstimate est = mean_estimator({x, x});
  CHECK((est.a - x).norm() == 0.0);
  CHECK(est.sigma_hat.norm() == 0.0);
  CHECK(est.n == 2);
}

TEST_CASE("mean_estimator hand variance") {
  Mat a(1, 1), b(1, 1);
  a << 0;
  b << 2;
  const MatrixEstimate est = mean_estimator({a, b});
  CHECK(est.a(0, 0) == 1.0);
  CHECK(est.sigma_hat(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(est.c_n == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("mean_estimator is order invariant and needs two samples") {
  Mat a(2, 2), b(2, 2), c(2, 2);
  a << 1, 0, 0, 1;
  b << 2, 1, -1, 0;
  c << 0, 3, 2, 2;
  const MatrixEstimate fwd = mean_estimator({a, b, c});
  const MatrixEstimate rev = mean_estimator({c, b, a});
  CHECK((fwd.a - rev.a).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((fwd.sigma_hat - rev.sigma_hat).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(mean_estimator({a}), std::invalid_argument);
}

TEST_CASE("mean_estimator covariance is PSD and consistent at rate sqrt(n)") {
  Mat m(2, 2);
  m << 1, 2, 0, -1;
  double prev_err = 1e9;
  for (long n : {100L, 1000L, 10000L}) {
    Rng rng = make_rng(31, static_cast<std::uint64_t>(n));
    MeanAccumulator acc(2);
    Mat sample(2, 2);
    for (long t = 0; t < n; ++t) {
      for (int c = 0; c < 2; ++c) {
        for (int r = 0; r < 2; ++r) sample(r, c) = m(r, c) + standard_normal(rng);
      }
      acc.add(sample);
    }
    const MatrixEstimate est = acc.finish();
    Eigen::SelfAdjointEigenSolver<Mat> es(est.sigma_hat);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
    const double err = (est.a - m).norm();
    CHECK(err < prev_err * 0.9);  // roughly the sqrt(n) decay across decades
    prev_err = err;
  }
}

TEST_CASE("var_ls_estimator recovers a noiseless AR(1)") {
  Mat series(4, 1);
  series << 1, 0.5, 0.25, 0.125;
  const VarFit fit = var_ls_estimator(series, 1, false);
  CHECK(fit.phi[0](0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("var_ls_estimator rejects degenerate input") {
  CHECK_THROWS_AS(var_ls_estimator(Mat::Zero(50, 2), 1, false), std::domain_error);
  CHECK_THROWS_AS(var_ls_estimator(Mat::Zero(3, 2), 1, true), std::invalid_argument);
}

TEST_CASE("var_ls_estimator recovers simulated VAR(1) coefficients") {
  const int d = 3;
  Mat phi(d, d);
  phi << 0.5, 0.1, 0.0, -0.2, 0.4, 0.1, 0.0, 0.2, 0.3;  // stable
  Rng rng = make_rng(77);
  const long t_total = 5000;
  Mat series(t_total, d);
  Vec y = Vec::Zero(d);
  for (long t = 0; t < t_total; ++t) {
    Vec e(d);
    for (int i = 0; i < d; ++i) e(i) = standard_normal(rng);
    y = phi * y + e;
    series.row(t) = y.transpose();
  }
  const VarFit fit = var_ls_estimator(series, 1, true);
  CHECK((fit.phi[0] - phi).norm() < 0.1);
  CHECK(fit.t_effective == t_total - 1);
  // Innovation covariance close to identity.
  CHECK((fit.sigma_e - Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 0.15);
  // The lag estimate exposes the same coefficient matrix.
  CHECK((fit.lag_estimates[0].a - fit.phi[0]).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Mat> es(fit.lag_estimates[0].sigma_hat);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("var_ls_estimator noiseless VAR(1) with d=2 is exact") {
  Mat phi(2, 2);
  phi << 0.6, 0.2, -0.1, 0.5;
  Mat series(30, 2);
  Vec y(2);
  y << 1.0, -0.7;
  for (int t = 0; t < 30; ++t) {
    series.row(t) = y.transpose();
    y = phi * y;
  }
  // Deterministic decay keeps the regressors full rank for a while.
  const VarFit fit = var_ls_estimator(series.topRows(12), 1, false);
  CHECK((fit.phi[0] - phi).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("markov_transition_estimator counts by hand") {
  const MarkovFit fit = markov_transition_estimator({1, 2, 1, 2, 1}, 2);
  Mat expected(2, 2);
  expected << 0, 1, 1, 0;
  CHECK((fit.p_hat - expected).norm() == 0.0);
  CHECK(fit.pi_hat(0) == 0.5);
  CHECK(fit.pi_hat(1) == 0.5);
  CHECK(fit.estimate.sigma_hat.norm() == 0.0);  // p(1-p) = 0 everywhere
  CHECK(fit.estimate.n == 4);
}

TEST_CASE("markov_transition_estimator input validation") {
  CHECK_THROWS_AS(markov_transition_estimator({1, 1, 1, 1}, 2), std::domain_error);
  CHECK_THROWS_AS(markov_transition_estimator({1, 2, 3}, 2), std::invalid_argument);
  CHECK_THROWS_AS(markov_transition_estimator({1}, 2), std::invalid_argument);
}

TEST_CASE("markov covariance structure") {
  Rng rng = make_rng(11);
  Mat p(3, 3);
  p << 0.6, 0.3, 0.1, 0.2, 0.5, 0.3, 0.3, 0.3, 0.4;
  std::vector<int> chain;
  int state = 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const long n = 100000;
  for (long t = 0; t <= n; ++t) {
    chain.push_back(state + 1);
    const double u = unif(rng);
    double acc = 0.0;
    for (int s = 0; s < 3; ++s) {
      acc += p(state, s);
      if (u < acc) {
        state = s;
        break;
      }
    }
  }
  const MarkovFit fit = markov_transition_estimator(chain, 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(fit.p_hat.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int s = 0; s < 3; ++s) {
      const double band =
          3.0 * std::sqrt(p(r, s) * (1.0 - p(r, s)) / (n * fit.pi_hat(r)));
      CHECK(std::abs(fit.p_hat(r, s) - p(r, s)) < band + 1e-12);
    }
  }

  // Cross-row blocks of the covariance are identically zero; within-row
  // blocks are PSD with zero row sums.
  const Mat& sigma = fit.estimate.sigma_hat;
  const int d = 3;
  for (int r = 0; r < d; ++r) {
    Mat block(d, d);
    for (int s = 0; s < d; ++s) {
      for (int v = 0; v < d; ++v) block(s, v) = sigma(s * d + r, v * d + r);
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(block);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
    CHECK(block.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  }
  for (int r = 0; r < d; ++r) {
    for (int r2 = 0; r2 < d; ++r2) {
      if (r == r2) continue;
      for (int s = 0; s < d; ++s) {
        for (int v = 0; v < d; ++v) {
          CHECK(sigma(s * d + r, v * d + r2) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("stationary_from_transition") {
  Mat uniform(2, 2);
  uniform << 0.5, 0.5, 0.5, 0.5;
  const Vec pi1 = stationary_from_transition(uniform);
  CHECK(pi1(0) == doctest::Approx(0.5).epsilon(1e-12));

  Mat p(2, 2);
  p << 0.9, 0.1, 0.2, 0.8;
  const Vec pi2 = stationary_from_transition(p);
  CHECK(pi2(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-10));
  CHECK(pi2(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-10));

  Rng rng = make_rng(13);
  Mat rand_p(4, 4);
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) rand_p(r, c) = unif(rng);
    rand_p.row(r) /= rand_p.row(r).sum();
  }
  const Vec pi3 = stationary_from_transition(rand_p);
  CHECK((pi3.transpose() * rand_p - pi3.transpose()).norm() < 1e-10);
  CHECK(pi3.sum() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(stationary_from_transition(Mat::Identity(2, 2)), std::domain_error);
}
