#ifndef SIMDIAG_ESTIMATORS_HPP_
#define SIMDIAG_ESTIMATORS_HPP_

#include <vector>

#include "simdiag/linalg.hpp"

namespace simdiag {

// An estimated d x d matrix together with the limiting covariance of
// vec(a): c_n * vec(a - M) -> N(0, sigma_hat) approximately.  sigma_hat
// rows/columns are indexed column-major over vec(a).
struct MatrixEstimate {
  Mat a;
  Mat sigma_hat;  // d^2 x d^2, symmetric PSD
  double c_n = 0.0;
  long n = 0;

  int dim() const { return static_cast<int>(a.rows()); }
};

// Streaming mean/covariance over vec(sample); finish() yields the mean
// matrix, the n-1 denominator covariance and c_n = sqrt(n).
class MeanAccumulator {
 public:
  explicit MeanAccumulator(int d);
  void add(const Mat& sample);
  long count() const { return count_; }
  MatrixEstimate finish() const;

 private:
  int d_;
  long count_ = 0;
  Vec sum_;
  Mat scatter_;  // sum of vec(x) vec(x)'
};

MatrixEstimate mean_estimator(const std::vector<Mat>& samples);

// Least-squares VAR(p) fit of a T x d series.
struct VarFit {
  Vec intercept;            // zero vector when the model has no intercept
  std::vector<Mat> phi;     // coefficient matrices, lag 1..p
  Mat sigma_e;              // innovation covariance estimate
  long t_effective = 0;     // T - p
  std::vector<MatrixEstimate> lag_estimates;  // per-lag (Phi_i, Sigma_i, sqrt(T-p))
};

VarFit var_ls_estimator(const Mat& series, int order, bool include_intercept);

// Transition-count estimate of a finite Markov chain on states 1..d.
struct MarkovFit {
  Mat p_hat;       // row-stochastic
  Vec pi_hat;      // empirical visit frequencies, on the simplex
  MatrixEstimate estimate;
};

// Covariance of vec(p_hat) is block structured: entries (r,s) and (u,v)
// covary only when r = u, with within-row block (diag(p_r) - p_r p_r')/pi_r,
// mapped to column-major vec indices (r,s) -> s*d + r.
MarkovFit markov_transition_estimator(const std::vector<int>& chain, int d);

// Left Perron eigenvector of a row-stochastic matrix, normalized to the
// simplex.  Throws std::domain_error when the eigenvalue-1 eigenspace is
// not simple (reducible chain).
Vec stationary_from_transition(const Mat& p);

}  // namespace simdiag

#endif  // SIMDIAG_ESTIMATORS_HPP_
