#include "simdiag/testing.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace simdiag {

namespace {

constexpr const char* kLlrPlugInWarning =
    "llr_test: the reference bases P1/P2 must come from known or reference "
    "matrices; plugging in estimates of the tested matrices invalidates the "
    "asymptotic law.";

// Combined rate for pairwise statistics; warns into `warnings` when the two
// rates differ by more than 1% and falls back to their geometric mean.
double combined_rate(const MatrixEstimate& e1, const MatrixEstimate& e2,
                     std::vector<std::string>& warnings) {
  const double c1 = e1.c_n;
  const double c2 = e2.c_n;
  if (std::abs(c1 - c2) > 0.01 * std::max(c1, c2)) {
    warnings.push_back("normalization rates differ by more than 1%; using geometric mean");
  }
  return std::sqrt(c1 * c2);
}

Mat inverse_with_guard(const Mat& v) {
  Eigen::JacobiSVD<Mat> svd(v);
  const double smin = svd.singularValues().minCoeff();
  const double smax = svd.singularValues().maxCoeff();
  if (!(smin > 0.0) || smax / smin > 1e12) {
    throw std::domain_error("singular or ill-conditioned eigenvector matrix");
  }
  return Eigen::PartialPivLU<Mat>(v).inverse();
}

RefDistribution box_from_trace_sums(double tr, double tr2) {
  if (tr <= 0.0 || tr2 <= 0.0) return RefDistribution::degenerate();
  return RefDistribution::gamma_law({tr * tr / (2.0 * tr2), tr / (2.0 * tr2)});
}

}  // namespace

int EstimateBundle::dim() const {
  return estimates.empty() ? 0 : estimates.front().dim();
}

long EstimateBundle::min_n() const {
  long n = 0;
  for (const auto& e : estimates) n = (n == 0) ? e.n : std::min(n, e.n);
  return n;
}

void EstimateBundle::validate() const {
  if (estimates.size() < 2) {
    throw std::invalid_argument("EstimateBundle: at least 2 estimates required");
  }
  const int d = dim();
  for (const auto& e : estimates) {
    if (e.dim() != d) throw std::invalid_argument("EstimateBundle: mixed dimensions");
    if (e.sigma_hat.rows() != static_cast<Eigen::Index>(d) * d) {
      throw std::invalid_argument("EstimateBundle: covariance dimension mismatch");
    }
  }
}

double default_epsilon(long n) {
  if (n <= 0) throw std::invalid_argument("default_epsilon: n > 0 required");
  return std::pow(static_cast<double>(n), -1.0 / 3.0);
}

TestReport generalized_wald(const Vec& residual, const Mat& sigma_hat, double c_n,
                            double epsilon) {
  if (sigma_hat.rows() != sigma_hat.cols() || sigma_hat.rows() != residual.size()) {
    throw std::invalid_argument("generalized_wald: dimension mismatch");
  }
  const TruncatedSvd tsvd = truncated_svd(sigma_hat, epsilon);
  TestReport report;
  report.epsilon_used = tsvd.epsilon;
  if (tsvd.epsilon_nudged) {
    report.warnings.push_back("epsilon collided with a singular value and was nudged upward");
  }
  report.statistic = std::max(0.0, c_n * c_n * residual.dot(tsvd.pinverse_apply(residual)));
  report.distribution = RefDistribution::chi_squared(tsvd.effective_rank);
  report.p_value = report.distribution.sf(report.statistic);
  report.rank_diagnostics.emplace_back("rank", tsvd.effective_rank);
  return report;
}

TestReport commutator_test(const MatrixEstimate& e1, const MatrixEstimate& e2,
                           double epsilon) {
  const int d = e1.dim();
  if (e2.dim() != d) throw std::invalid_argument("commutator_test: dimension mismatch");
  if (d == 1) {
    // Scalars always commute; the statistic is identically zero.
    TestReport report;
    report.distribution = RefDistribution::degenerate();
    report.p_value = 1.0;
    report.warnings.push_back("d=1: commutator identically zero, degenerate reference law");
    return report;
  }
  if (epsilon < 0.0) epsilon = default_epsilon(std::min(e1.n, e2.n));

  std::vector<std::string> warnings;
  const double c_n = combined_rate(e1, e2, warnings);

  const Vec eta = vectorize(commutator(e1.a, e2.a));
  const Mat l2 = lambda_op(e2.a);
  const Mat l1 = lambda_op(e1.a);
  Mat sigma_eta = l2 * e1.sigma_hat * l2.transpose() + l1 * e2.sigma_hat * l1.transpose();
  sigma_eta = 0.5 * (sigma_eta + sigma_eta.transpose()).eval();

  TestReport report = generalized_wald(eta, sigma_eta, c_n, epsilon);
  const int rank = report.rank_diagnostics.front().second;
  report.rank_diagnostics.front().first = "r1";
  if (rank >= d * d) {
    report.warnings.push_back("estimated rank of Sigma_eta not below d^2; vec(I) null "
                              "direction was not detected");
  }
  report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());
  return report;
}

Mat llr_projection(const Mat& a, const Mat& sigma, const Mat& p, double epsilon) {
  if (p.rows() != sigma.rows() || sigma.rows() != a.size()) {
    throw std::invalid_argument("llr_projection: dimension mismatch");
  }
  const Mat w = truncated_svd(sigma, epsilon).pinverse();
  const Mat m = p.transpose() * w * p;
  const Mat m_pinv = truncated_svd(m, 0.0).pinverse();
  const Vec projected = p * (m_pinv * (p.transpose() * (w * vectorize(a))));
  return unvectorize(projected, static_cast<int>(a.rows()), static_cast<int>(a.cols()));
}

namespace {

struct LlrSide {
  double quad = 0.0;   // vec(A)' Qhat[eps] vec(A)
  int rank_sigma = 0;
  int rank_projected = 0;  // rank(P' Sigma^+(eps) P)
};

LlrSide llr_side(const MatrixEstimate& e, const Mat& p_basis, double epsilon) {
  const TruncatedSvd tsvd = truncated_svd(e.sigma_hat, epsilon);
  const Mat w = tsvd.pinverse();
  const Mat m = p_basis.transpose() * w * p_basis;
  const TruncatedSvd m_svd = truncated_svd(m, 0.0);
  const Vec va = vectorize(e.a);
  const Vec wa = w * va;
  const Vec pwa = p_basis.transpose() * wa;
  LlrSide side;
  side.quad = va.dot(wa) - pwa.dot(m_svd.pinverse_apply(pwa));
  side.rank_sigma = tsvd.effective_rank;
  side.rank_projected = m_svd.effective_rank;
  return side;
}

}  // namespace

TestReport llr_test(const MatrixEstimate& e1, const MatrixEstimate& e2,
                    const Mat& p1_source, const Mat& p2_source, double epsilon) {
  const int d = e1.dim();
  if (e2.dim() != d) throw std::invalid_argument("llr_test: dimension mismatch");
  if (epsilon < 0.0) epsilon = default_epsilon(std::min(e1.n, e2.n));

  const Mat p1 = power_basis(p1_source);
  const Mat p2 = power_basis(p2_source);

  // Side k uses the other side's basis: Qhat_{1,2} pairs Sigma_1 with P_2.
  const LlrSide s1 = llr_side(e1, p2, epsilon);
  const LlrSide s2 = llr_side(e2, p1, epsilon);

  TestReport report;
  report.epsilon_used = epsilon;
  report.statistic = std::max(0.0, e1.c_n * e1.c_n * s1.quad + e2.c_n * e2.c_n * s2.quad);

  const int r12 = std::max(0, s1.rank_sigma - s1.rank_projected);
  const int r21 = std::max(0, s2.rank_sigma - s2.rank_projected);
  const int df = r12 + r21;
  const int df_lower = std::max(0, s1.rank_sigma + s2.rank_sigma - 2 * d);
  const int df_upper = s1.rank_sigma + s2.rank_sigma;

  report.distribution = RefDistribution::chi_squared(df);
  report.p_value = report.distribution.sf(report.statistic);
  report.p_lower = chi2_sf(report.statistic, df_lower);
  report.p_upper = chi2_sf(report.statistic, df_upper);
  report.rank_diagnostics.emplace_back("r2", df);
  report.rank_diagnostics.emplace_back("r2_lower", df_lower);
  report.rank_diagnostics.emplace_back("r2_upper", df_upper);
  report.rank_diagnostics.emplace_back("rank_sigma1", s1.rank_sigma);
  report.rank_diagnostics.emplace_back("rank_sigma2", s2.rank_sigma);
  report.warnings.push_back(kLlrPlugInWarning);

  if (std::abs(e1.c_n - e2.c_n) > 0.01 * std::max(e1.c_n, e2.c_n)) {
    report.warnings.push_back("normalization rates differ by more than 1%");
  }
  return report;
}

TestReport multi_eig_test(const EstimateBundle& bundle, const Mat& v, double epsilon) {
  bundle.validate();
  const int d = bundle.dim();
  if (v.rows() != d || v.cols() != d) {
    throw std::invalid_argument("multi_eig_test: V dimension mismatch");
  }
  if (epsilon < 0.0) epsilon = default_epsilon(bundle.min_n());

  const Mat v_inv = inverse_with_guard(v);
  const Mat s_d = offdiag_selector(d);
  const Mat s_vd = s_d * kron(v.transpose(), v_inv);

  TestReport report;
  report.epsilon_used = epsilon;
  double statistic = 0.0;
  int df = 0;
  int idx = 0;
  for (const auto& e : bundle.estimates) {
    const Vec zeta = s_d * vectorize(v_inv * e.a * v);
    Mat theta = s_vd * e.sigma_hat * s_vd.transpose();
    theta = 0.5 * (theta + theta.transpose()).eval();
    const TruncatedSvd tsvd = truncated_svd(theta, epsilon);
    statistic += e.c_n * e.c_n * zeta.dot(tsvd.pinverse_apply(zeta));
    df += tsvd.effective_rank;
    report.rank_diagnostics.emplace_back("rank_theta_" + std::to_string(++idx),
                                         tsvd.effective_rank);
    if (tsvd.epsilon_nudged) {
      report.warnings.push_back("epsilon nudge applied for estimate " + std::to_string(idx));
    }
  }
  report.statistic = std::max(0.0, statistic);
  report.distribution = RefDistribution::chi_squared(df);
  report.p_value = report.distribution.sf(report.statistic);
  return report;
}

TestReport multi_eig_gamma_test(const EstimateBundle& bundle, const Mat& v) {
  bundle.validate();
  const int d = bundle.dim();
  if (v.rows() != d || v.cols() != d) {
    throw std::invalid_argument("multi_eig_gamma_test: V dimension mismatch");
  }
  const Mat v_inv = inverse_with_guard(v);
  const Mat s_d = offdiag_selector(d);
  const Mat s_vd = s_d * kron(v.transpose(), v_inv);

  TestReport report;
  double statistic = 0.0;
  double tr = 0.0;
  double tr2 = 0.0;
  for (const auto& e : bundle.estimates) {
    const Vec zeta = s_d * vectorize(v_inv * e.a * v);
    statistic += e.c_n * e.c_n * zeta.squaredNorm();
    Mat theta = s_vd * e.sigma_hat * s_vd.transpose();
    theta = 0.5 * (theta + theta.transpose()).eval();
    tr += theta.trace();
    tr2 += theta.squaredNorm();  // blkdiag trace of Theta^2 is the block sum
  }
  report.statistic = statistic;
  report.distribution = box_from_trace_sums(tr, tr2);
  report.p_value = report.distribution.sf(report.statistic);
  return report;
}

Mat partial_selector(const Mat& q_hat, int k, const Mat& v_tilde) {
  const int d = static_cast<int>(q_hat.rows());
  const Eigen::Index d2 = static_cast<Eigen::Index>(d) * d;

  // S_B vec(Q'AQ) = vec(B), S_C vec(Q'AQ) = vec(C); vec index (r,s) -> s*d+r.
  Mat s_b = Mat::Zero(static_cast<Eigen::Index>(k) * k, d2);
  Mat s_c = Mat::Zero(static_cast<Eigen::Index>(k) * (d - k), d2);
  for (int s = 0; s < k; ++s) {
    for (int r = 0; r < k; ++r) {
      s_b(static_cast<Eigen::Index>(s) * k + r, static_cast<Eigen::Index>(s) * d + r) = 1.0;
    }
  }
  for (int s = k; s < d; ++s) {
    for (int r = 0; r < k; ++r) {
      s_c(static_cast<Eigen::Index>(s - k) * k + r, static_cast<Eigen::Index>(s) * d + r) = 1.0;
    }
  }

  const Mat qq = kron(q_hat.transpose(), q_hat.transpose());
  const Mat top = s_b * qq;     // k^2 x d^2, feeds the eigenvector test on B
  const Mat bottom = s_c * qq;  // k(d-k) x d^2, feeds the zero-block test on C

  if (k == 1) return bottom;  // S_{Vtilde,1} has no rows

  const Mat v_tilde_inv = inverse_with_guard(v_tilde);
  const Mat s_vk = offdiag_selector(k) * kron(v_tilde.transpose(), v_tilde_inv);

  Mat p_w(static_cast<Eigen::Index>(k) * (k - 1) + static_cast<Eigen::Index>(k) * (d - k), d2);
  p_w.topRows(s_vk.rows()) = s_vk * top;
  p_w.bottomRows(bottom.rows()) = bottom;
  return p_w;
}

TestReport partial_test(const EstimateBundle& bundle, const Mat& q_hat, int k,
                        const Mat& v_tilde, double epsilon, PartialVariant variant) {
  bundle.validate();
  const int d = bundle.dim();
  if (q_hat.rows() != d || q_hat.cols() != d) {
    throw std::invalid_argument("partial_test: Q dimension mismatch");
  }
  if (k < 1 || k >= d) throw std::invalid_argument("partial_test: 1 <= k < d required");
  if (v_tilde.rows() != k || v_tilde.cols() != k) {
    throw std::invalid_argument("partial_test: v_tilde must be k x k");
  }
  const double orth = (q_hat.transpose() * q_hat - Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  if (orth > 1e-8) throw std::invalid_argument("partial_test: q_hat is not orthogonal");
  if (epsilon < 0.0) epsilon = default_epsilon(bundle.min_n());

  const Mat p_w = partial_selector(q_hat, k, v_tilde);

  TestReport report;
  report.epsilon_used = epsilon;
  double statistic = 0.0;
  int df = 0;
  double tr = 0.0;
  double tr2 = 0.0;
  int idx = 0;
  for (const auto& e : bundle.estimates) {
    const Vec w = p_w * vectorize(e.a);
    Mat omega = p_w * e.sigma_hat * p_w.transpose();
    omega = 0.5 * (omega + omega.transpose()).eval();
    if (variant == PartialVariant::ChiSquared) {
      const TruncatedSvd tsvd = truncated_svd(omega, epsilon);
      statistic += e.c_n * e.c_n * w.dot(tsvd.pinverse_apply(w));
      df += tsvd.effective_rank;
      report.rank_diagnostics.emplace_back("rank_omega_" + std::to_string(++idx),
                                           tsvd.effective_rank);
    } else {
      statistic += e.c_n * e.c_n * w.squaredNorm();
      tr += omega.trace();
      tr2 += omega.squaredNorm();
    }
  }
  report.statistic = std::max(0.0, statistic);
  report.distribution = (variant == PartialVariant::ChiSquared)
                            ? RefDistribution::chi_squared(df)
                            : box_from_trace_sums(tr, tr2);
  report.p_value = report.distribution.sf(report.statistic);
  return report;
}

Mat pairwise_pvalue_matrix(const EstimateBundle& bundle, double epsilon) {
  bundle.validate();
  const int p = static_cast<int>(bundle.estimates.size());
  Mat out = Mat::Ones(p, p);
  for (int i = 0; i < p; ++i) {
    for (int j = i + 1; j < p; ++j) {
      const double pv = commutator_test(bundle.estimates[i], bundle.estimates[j], epsilon).p_value;
      out(i, j) = pv;
      out(j, i) = pv;
    }
  }
  return out;
}

}  // namespace simdiag
