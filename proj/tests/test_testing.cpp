#include <doctest.h>

#include <cmath>

#include "simdiag/statdist.hpp"
#include "simdiag/testing.hpp"

using namespace simdiag;

namespace {

Mat random_mat(int rows, int cols, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  Mat m(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) m(r, c) = standard_normal(rng);
  }
  return m;
}

Mat random_psd(int d, std::uint64_t seed) {
  const Mat base = random_mat(d, d, seed);
  return base * base.transpose();
}

MatrixEstimate make_estimate(const Mat& a, const Mat& sigma, long n) {
  MatrixEstimate e;
  e.a = a;
  e.sigma_hat = sigma;
  e.c_n = std::sqrt(static_cast<double>(n));
  e.n = n;
  return e;
}

// Explicit truncated pseudo-inverse built independently of TruncatedSvd for
// oracle comparisons: eigendecompose the symmetric input and invert the
// eigenvalues strictly above epsilon.
Mat oracle_trunc_pinv(const Mat& sigma, double epsilon, int* rank_out) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (sigma + sigma.transpose()));
  Mat out = Mat::Zero(sigma.rows(), sigma.cols());
  int rank = 0;
  for (int i = 0; i < sigma.rows(); ++i) {
    const double lam = es.eigenvalues()(i);
    if (std::abs(lam) > epsilon) {
      out += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose() / lam;
      ++rank;
    }
  }
  if (rank_out != nullptr) *rank_out = rank;
  return out;
}

}  // namespace

TEST_CASE("generalized_wald hand example") {
  Vec r(2);
  r << 1, 0;
  Mat sigma = Vec{{4, 1}}.asDiagonal();
  const TestReport report = generalized_wald(r, sigma, 2.0, 0.5);
  CHECK(report.statistic == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(report.distribution.kind == RefDistribution::Kind::ChiSquared);
  CHECK(report.distribution.df == 2);
  CHECK(report.p_value == doctest::Approx(std::exp(-0.5)).epsilon(1e-10));

  // A larger threshold drops the small direction but keeps the residual
  // component that lives on the retained one.
  const TestReport coarse = generalized_wald(r, sigma, 2.0, 2.0);
  CHECK(coarse.distribution.df == 1);
  CHECK(coarse.statistic == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(coarse.p_value == doctest::Approx(chi2_sf(1.0, 1)).epsilon(1e-12));

  CHECK_THROWS_AS(generalized_wald(r, Mat::Identity(3, 3), 1.0, 0.1),
                  std::invalid_argument);
}

TEST_CASE("generalized_wald against a brute-force oracle") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const int m = 6;
    const Mat sigma = random_psd(m, seed);
    const Vec r = random_mat(m, 1, seed + 100).col(0);
    const double c_n = 7.0;
    const double eps = 0.3;
    int rank = 0;
    const Mat pinv = oracle_trunc_pinv(sigma, eps, &rank);
    const TestReport report = generalized_wald(r, sigma, c_n, eps);
    CHECK(report.statistic == doctest::Approx(c_n * c_n * r.dot(pinv * r)).epsilon(1e-10));
    CHECK(report.distribution.df == rank);
  }
}

TEST_CASE("commutator_test is exactly zero for commuting estimates") {
  // Polynomials in a fixed matrix commute by construction.
  const Mat base = random_mat(4, 4, 21);
  const Mat a1 = base + 2.0 * Mat::Identity(4, 4);
  const Mat a2 = base * base - base;
  const MatrixEstimate e1 = make_estimate(a1, random_psd(16, 22), 400);
  const MatrixEstimate e2 = make_estimate(a2, random_psd(16, 23), 400);
  const TestReport report = commutator_test(e1, e2);
  CHECK(report.statistic < 1e-16);
  CHECK(report.p_value == doctest::Approx(1.0).epsilon(1e-12));
  // The vec(I) null direction of Sigma_eta keeps the rank below d^2.
  CHECK(report.distribution.df < 16);
}

TEST_CASE("commutator_test detects a clear violation") {
  Mat a1(2, 2), a2(2, 2);
  a1 << 1, 5, 0, 2;
  a2 << 1, 0, 5, 2;  // strongly non-commuting
  const MatrixEstimate e1 = make_estimate(a1, 0.1 * Mat::Identity(4, 4), 10000);
  const MatrixEstimate e2 = make_estimate(a2, 0.1 * Mat::Identity(4, 4), 10000);
  const TestReport report = commutator_test(e1, e2);
  CHECK(report.statistic > 100.0);
  CHECK(report.p_value < 1e-6);
}

TEST_CASE("commutator_test matches the explicit sandwich formula") {
  const Mat a1 = random_mat(3, 3, 31);
  const Mat a2 = random_mat(3, 3, 32);
  const Mat s1 = random_psd(9, 33);
  const Mat s2 = random_psd(9, 34);
  const MatrixEstimate e1 = make_estimate(a1, s1, 900);
  const MatrixEstimate e2 = make_estimate(a2, s2, 900);
  const double eps = 0.25;

  const Mat l1 = lambda_op(a1);
  const Mat l2 = lambda_op(a2);
  const Mat sigma_eta = l2 * s1 * l2.transpose() + l1 * s2 * l1.transpose();
  const Vec eta = vectorize(a1 * a2 - a2 * a1);
  int rank = 0;
  const Mat pinv = oracle_trunc_pinv(sigma_eta, eps, &rank);

  const TestReport report = commutator_test(e1, e2, eps);
  CHECK(report.statistic == doctest::Approx(900.0 * eta.dot(pinv * eta)).epsilon(1e-8));
  CHECK(report.distribution.df == rank);
}

TEST_CASE("commutator_test scalar case degenerates") {
  const MatrixEstimate e1 = make_estimate(Mat::Constant(1, 1, 2.0), Mat::Identity(1, 1), 50);
  const MatrixEstimate e2 = make_estimate(Mat::Constant(1, 1, -1.0), Mat::Identity(1, 1), 50);
  const TestReport report = commutator_test(e1, e2);
  CHECK(report.p_value == 1.0);
  CHECK(report.distribution.kind == RefDistribution::Kind::Degenerate);
}

TEST_CASE("llr_projection with identity weight is the orthogonal projector") {
  const Mat a = random_mat(3, 3, 41);
  const Mat p = random_mat(9, 3, 42);
  const Mat proj = llr_projection(a, Mat::Identity(9, 9), p, 0.0);

  // QR-based orthogonal projection oracle.
  Eigen::HouseholderQR<Mat> qr(p);
  const Mat q_thin = Mat(qr.householderQ()).leftCols(3);
  const Vec expected = q_thin * (q_thin.transpose() * vectorize(a));
  CHECK((vectorize(proj) - expected).norm() < 1e-10);
}

TEST_CASE("llr_projection is idempotent and span fixing") {
  const Mat a = random_mat(3, 3, 51);
  const Mat sigma = random_psd(9, 52) + Mat::Identity(9, 9);
  const Mat p = random_mat(9, 4, 53);
  const double eps = 0.1;
  const Mat once = llr_projection(a, sigma, p, eps);
  const Mat twice = llr_projection(once, sigma, p, eps);
  CHECK((twice - once).cwiseAbs().maxCoeff() < 1e-10);

  // A matrix already in span(P) is fixed.
  Vec coeffs(4);
  coeffs << 1, -2, 0.5, 3;
  const Mat inside = unvectorize(p * coeffs, 3, 3);
  CHECK((llr_projection(inside, sigma, p, eps) - inside).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("llr_test bounds ordering and diagnostics") {
  const Mat a1 = random_mat(3, 3, 61);
  const Mat a2 = random_mat(3, 3, 62);
  const MatrixEstimate e1 = make_estimate(a1, random_psd(9, 63) + Mat::Identity(9, 9), 1000);
  const MatrixEstimate e2 = make_estimate(a2, random_psd(9, 64) + Mat::Identity(9, 9), 1000);
  const TestReport report = llr_test(e1, e2, a1, a2);

  REQUIRE(report.p_lower.has_value());
  REQUIRE(report.p_upper.has_value());
  // Larger df means larger survival value at a fixed statistic.
  CHECK(*report.p_lower <= report.p_value + 1e-15);
  CHECK(report.p_value <= *report.p_upper + 1e-15);

  // Full-rank covariances: the bounds collapse to r2 = 2d^2 - 2d.
  int df = -1, lower = -1, upper = -1;
  for (const auto& [name, value] : report.rank_diagnostics) {
    if (name == "r2") df = value;
    if (name == "r2_lower") lower = value;
    if (name == "r2_upper") upper = value;
  }
  CHECK(df == 2 * 9 - 2 * 3);
  CHECK(lower == 2 * 9 - 2 * 3);
  CHECK(upper == 2 * 9);

  bool warned = false;
  for (const auto& w : report.warnings) {
    if (w.find("invalidates") != std::string::npos) warned = true;
  }
  CHECK(warned);
}

TEST_CASE("llr_test statistic vanishes when each mean lies in the other basis span") {
  // A shared eigenbasis makes A1 a polynomial combination reachable from the
  // power basis of A2 and vice versa, so both projections are lossless.
  Mat v(3, 3);
  v << 1, 0.2, -0.1, 0.3, 1, 0.4, -0.2, 0.1, 1;
  const Mat a1 = v * Vec{{1, 2, 3}}.asDiagonal() * v.inverse();
  const Mat a2 = v * Vec{{2, -1, 0.5}}.asDiagonal() * v.inverse();
  const MatrixEstimate e1 = make_estimate(a1, Mat::Identity(9, 9), 500);
  const MatrixEstimate e2 = make_estimate(a2, Mat::Identity(9, 9), 500);
  const TestReport report = llr_test(e1, e2, a1, a2, 0.0);
  CHECK(report.statistic < 1e-14);
  CHECK(report.p_value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("multi_eig_test is zero at the true eigenvectors") {
  Mat v(3, 3);
  v << 1, 0.3, 0.1, -0.2, 1, 0.2, 0.4, -0.1, 1;
  std::vector<Mat> diags = {Vec{{1, 2, 3}}.asDiagonal(), Vec{{-1, 0.5, 2}}.asDiagonal(),
                            Vec{{4, 1, -2}}.asDiagonal()};
  EstimateBundle bundle;
  for (std::uint64_t i = 0; i < diags.size(); ++i) {
    bundle.estimates.push_back(
        make_estimate(v * diags[i] * v.inverse(), random_psd(9, 70 + i), 800));
  }
  const TestReport chi = multi_eig_test(bundle, v);
  CHECK(chi.statistic < 1e-16);
  CHECK(chi.p_value == doctest::Approx(1.0).epsilon(1e-12));
  const TestReport gam = multi_eig_gamma_test(bundle, v);
  CHECK(gam.statistic < 1e-16);
  CHECK(gam.p_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("multi_eig_test matches a per-estimate Wald oracle") {
  Mat v(3, 3);
  v << 1, 0.1, 0, 0.2, 1, -0.3, 0, 0.1, 1;
  EstimateBundle bundle;
  for (std::uint64_t i = 0; i < 2; ++i) {
    bundle.estimates.push_back(
        make_estimate(random_mat(3, 3, 80 + i), random_psd(9, 90 + i), 600));
  }
  const double eps = 0.2;
  const TestReport report = multi_eig_test(bundle, v, eps);

  const Mat v_inv = v.inverse();
  const Mat s_d = offdiag_selector(3);
  const Mat s_vd = s_d * kron(v.transpose(), v_inv);
  double stat = 0.0;
  int df = 0;
  for (const auto& e : bundle.estimates) {
    const Vec zeta = s_d * vectorize(v_inv * e.a * v);
    int rank = 0;
    const Mat pinv = oracle_trunc_pinv(s_vd * e.sigma_hat * s_vd.transpose(), eps, &rank);
    stat += e.c_n * e.c_n * zeta.dot(pinv * zeta);
    df += rank;
  }
  CHECK(report.statistic == doctest::Approx(stat).epsilon(1e-9));
  CHECK(report.distribution.df == df);
}

TEST_CASE("multi_eig_gamma_test moments come from the stacked blocks") {
  Mat v = Mat::Identity(3, 3);
  EstimateBundle bundle;
  bundle.estimates.push_back(make_estimate(random_mat(3, 3, 101), random_psd(9, 102), 300));
  bundle.estimates.push_back(make_estimate(random_mat(3, 3, 103), random_psd(9, 104), 300));
  const TestReport report = multi_eig_gamma_test(bundle, v);
  REQUIRE(report.distribution.kind == RefDistribution::Kind::Gamma);

  const Mat s_d = offdiag_selector(3);
  double tr = 0.0, tr2 = 0.0, stat = 0.0;
  for (const auto& e : bundle.estimates) {
    const Mat theta = s_d * e.sigma_hat * s_d.transpose();
    tr += theta.trace();
    tr2 += (theta * theta).trace();
    stat += e.c_n * e.c_n * (s_d * vectorize(e.a)).squaredNorm();
  }
  CHECK(report.distribution.gamma.shape == doctest::Approx(tr * tr / (2 * tr2)).epsilon(1e-10));
  CHECK(report.distribution.gamma.rate == doctest::Approx(tr / (2 * tr2)).epsilon(1e-10));
  CHECK(report.statistic == doctest::Approx(stat).epsilon(1e-12));
}

TEST_CASE("multi tests validate their inputs") {
  EstimateBundle bundle;
  bundle.estimates.push_back(make_estimate(Mat::Identity(2, 2), Mat::Identity(4, 4), 10));
  CHECK_THROWS_AS(multi_eig_test(bundle, Mat::Identity(2, 2)), std::invalid_argument);
  bundle.estimates.push_back(make_estimate(Mat::Identity(3, 3), Mat::Identity(9, 9), 10));
  CHECK_THROWS_AS(bundle.validate(), std::invalid_argument);

  EstimateBundle ok;
  ok.estimates.push_back(make_estimate(Mat::Identity(2, 2), Mat::Identity(4, 4), 10));
  ok.estimates.push_back(make_estimate(Mat::Identity(2, 2), Mat::Identity(4, 4), 10));
  CHECK_THROWS_AS(multi_eig_test(ok, Mat::Zero(2, 2)), std::domain_error);
}

TEST_CASE("partial_test with known Q is exact under the null") {
  // Build matrices whose first k columns of Q are shared left eigenvectors:
  // Q' M Q has a zero upper-right k x (d-k) block.
  const int d = 4, k = 2;
  const Mat qr_src = random_mat(d, d, 111);
  const Mat q = Eigen::HouseholderQR<Mat>(qr_src).householderQ();
  Mat v_tilde(2, 2);
  v_tilde << 1, 0.4, -0.3, 1;

  EstimateBundle bundle;
  for (std::uint64_t i = 0; i < 2; ++i) {
    Mat inner = random_mat(d, d, 120 + i);
    inner.topRightCorner(k, d - k).setZero();
    // Shared eigenvectors of the B block: make it v_tilde diag v_tilde^{-1}.
    Vec diag(2);
    diag << 1.0 + static_cast<double>(i), -2.0 + 0.5 * static_cast<double>(i);
    inner.topLeftCorner(k, k) = v_tilde * diag.asDiagonal() * v_tilde.inverse();
    bundle.estimates.push_back(
        make_estimate(q * inner * q.transpose(), random_psd(d * d, 130 + i), 700));
  }
  const TestReport chi = partial_test(bundle, q, k, v_tilde, 0.2, PartialVariant::ChiSquared);
  CHECK(chi.statistic < 1e-16);
  CHECK(chi.p_value == doctest::Approx(1.0).epsilon(1e-12));
  const TestReport gam = partial_test(bundle, q, k, v_tilde, 0.2, PartialVariant::Gamma);
  CHECK(gam.statistic < 1e-16);
  CHECK(gam.p_value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("partial_selector for k=1 keeps only the zero-block rows") {
  const int d = 3;
  const Mat q = Mat::Identity(d, d);
  const Mat p_w = partial_selector(q, 1, Mat::Identity(1, 1));
  CHECK(p_w.rows() == d - 1);
  Mat a = random_mat(d, d, 141);
  const Vec w = p_w * vectorize(a);
  // With Q = I the selected entries are the first row beyond column 0.
  CHECK(w(0) == doctest::Approx(a(0, 1)).epsilon(1e-14));
  CHECK(w(1) == doctest::Approx(a(0, 2)).epsilon(1e-14));
}

TEST_CASE("partial_test rejects structural violations and bad input") {
  EstimateBundle bundle;
  bundle.estimates.push_back(make_estimate(random_mat(3, 3, 150), random_psd(9, 151), 100));
  bundle.estimates.push_back(make_estimate(random_mat(3, 3, 152), random_psd(9, 153), 100));
  const Mat q = Mat::Identity(3, 3);
  CHECK_THROWS_AS(partial_test(bundle, q, 0, Mat::Identity(1, 1), 0.1,
                               PartialVariant::ChiSquared),
                  std::invalid_argument);
  CHECK_THROWS_AS(partial_test(bundle, q, 3, Mat::Identity(3, 3), 0.1,
                               PartialVariant::ChiSquared),
                  std::invalid_argument);
  CHECK_THROWS_AS(partial_test(bundle, 2.0 * q, 1, Mat::Identity(1, 1), 0.1,
                               PartialVariant::ChiSquared),
                  std::invalid_argument);

  // A strong violation of the zero block is caught with small noise.
  Mat a1 = Mat::Zero(3, 3);
  a1(0, 1) = 3.0;
  Mat a2 = Mat::Zero(3, 3);
  a2(0, 2) = -2.5;
  EstimateBundle loud;
  loud.estimates.push_back(make_estimate(a1, 0.5 * Mat::Identity(9, 9), 10000));
  loud.estimates.push_back(make_estimate(a2, 0.5 * Mat::Identity(9, 9), 10000));
  const TestReport rep =
      partial_test(loud, q, 1, Mat::Identity(1, 1), 0.05, PartialVariant::ChiSquared);
  CHECK(rep.p_value < 1e-8);
}

TEST_CASE("pairwise_pvalue_matrix shape and symmetry") {
  const Mat base = random_mat(3, 3, 161);
  EstimateBundle bundle;
  // Two commuting estimates and one outlier.
  bundle.estimates.push_back(
      make_estimate(base, 1e-4 * Mat::Identity(9, 9), 10000));
  bundle.estimates.push_back(
      make_estimate(base * base, 1e-4 * Mat::Identity(9, 9), 10000));
  bundle.estimates.push_back(
      make_estimate(random_mat(3, 3, 162), 1e-4 * Mat::Identity(9, 9), 10000));
  // Explicit small epsilon: the covariances here are tiny by construction
  // and the default n^{-1/3} rule would truncate them entirely.
  const Mat pv = pairwise_pvalue_matrix(bundle, 1e-8);
  CHECK(pv.rows() == 3);
  CHECK((pv - pv.transpose()).norm() == 0.0);
  for (int i = 0; i < 3; ++i) CHECK(pv(i, i) == 1.0);
  CHECK(pv(0, 1) == doctest::Approx(1.0).epsilon(1e-10));  // commuting pair
  CHECK(pv(0, 2) < 1e-6);                                  // outlier row
  CHECK(pv(1, 2) < 1e-6);
}

TEST_CASE("default_epsilon rule") {
  CHECK(default_epsilon(1000) == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(default_epsilon(8) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS_AS(default_epsilon(0), std::invalid_argument);
}
