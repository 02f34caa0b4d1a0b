#ifndef SIMDIAG_TESTING_HPP_
#define SIMDIAG_TESTING_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "simdiag/estimators.hpp"
#include "simdiag/statdist.hpp"

namespace simdiag {

struct TestReport {
  double statistic = 0.0;
  RefDistribution distribution;
  double p_value = 1.0;
  std::optional<double> p_lower;  // LLR bound pair only
  std::optional<double> p_upper;
  double epsilon_used = 0.0;
  std::vector<std::pair<std::string, int>> rank_diagnostics;
  std::vector<std::string> warnings;
};

struct EstimateBundle {
  std::vector<MatrixEstimate> estimates;

  int dim() const;
  long min_n() const;
  void validate() const;  // throws unless >= 2 estimates of one dimension
};

// Negative epsilon means "use the default rule n^{-1/3}".
inline constexpr double kAutoEpsilon = -1.0;
double default_epsilon(long n);

// Gamma^#(eps) = c_n^2 r' Sigma^+(eps) r against chi^2(rank(Sigma; eps)).
TestReport generalized_wald(const Vec& residual, const Mat& sigma_hat, double c_n,
                            double epsilon);

// Two-sample commutator test (Gamma_1^#).  eta = vec([A1, A2]),
// Sigma_eta = Lambda(A2) Sigma_1 Lambda'(A2) + Lambda(A1) Sigma_2 Lambda'(A1).
TestReport commutator_test(const MatrixEstimate& e1, const MatrixEstimate& e2,
                           double epsilon = kAutoEpsilon);

// Weighted projection of vec(A) onto span(P):
// P (P' Sigma^+(eps) P)^+ P' Sigma^+(eps) vec(A), mapped back to a matrix.
Mat llr_projection(const Mat& a, const Mat& sigma, const Mat& p, double epsilon);

// Two-sample LLR test (Gamma_2^#) with the df bound pair of the p-value.
// The P_i bases are built from caller-supplied reference matrices; plugging
// estimated references invalidates the asymptotic law, and every report
// carries a warning to that effect.
TestReport llr_test(const MatrixEstimate& e1, const MatrixEstimate& e2,
                    const Mat& p1_source, const Mat& p2_source,
                    double epsilon = kAutoEpsilon);

// Multi-sample eigenvector test (Gamma_3^#) for a supplied invertible V.
TestReport multi_eig_test(const EstimateBundle& bundle, const Mat& v,
                          double epsilon = kAutoEpsilon);

// Gamma_3^*: squared-norm statistic against the Box gamma approximation.
TestReport multi_eig_gamma_test(const EstimateBundle& bundle, const Mat& v);

enum class PartialVariant { ChiSquared, Gamma };

// Partial tests (Gamma_4^# / Gamma_4^*) for k shared left eigenvectors,
// given orthogonal q_hat and the k x k common-eigenvector estimate v_tilde
// of the B blocks.
TestReport partial_test(const EstimateBundle& bundle, const Mat& q_hat, int k,
                        const Mat& v_tilde, double epsilon, PartialVariant variant);

// Symmetric matrix of pairwise commutator-test p-values; unit diagonal.
Mat pairwise_pvalue_matrix(const EstimateBundle& bundle, double epsilon = kAutoEpsilon);

// Selector stack P_w of the partial tests; exposed for reuse and testing.
Mat partial_selector(const Mat& q_hat, int k, const Mat& v_tilde);

}  // namespace simdiag

#endif  // SIMDIAG_TESTING_HPP_
