#ifndef SIMDIAG_APPS_HPP_
#define SIMDIAG_APPS_HPP_

#include <vector>

#include "simdiag/estimators.hpp"
#include "simdiag/testing.hpp"

namespace simdiag {

struct PartialReportPair {
  int k = 0;
  TestReport chi2;
  TestReport gamma;
};

struct VarAnalysis {
  std::vector<VarFit> fits;
  Mat pairwise_pvalues;       // commutator tests on the lag-1 coefficients
  TestReport multi_gamma;     // squared-norm test with the optimized V-hat
  std::vector<PartialReportPair> partial;  // k = 1 .. d-1
  Mat v_hat;                  // decoupling transform, z_t = v_hat * y_t
  bool decoupled_emitted = false;  // only when multi_gamma.p_value >= alpha
  std::vector<Mat> decoupled;      // per subject, same length as its series
  double alpha = 0.05;
};

struct MarkovAnalysis {
  std::vector<MarkovFit> fits;
  Vec pi_common;              // candidate common stationary distribution
  double qp_objective = 0.0;  // sum_i ||pi'(P_i - I)||^2 at pi_common
  bool qp_converged = false;
  TestReport partial_chi2;    // k = 1, tested direction pi_common
  TestReport partial_gamma;
};

// Fits a VAR(order) to every subject and tests whether the lag-1
// coefficient matrices are simultaneously diagonalizable: pairwise
// commutator p-values, the squared-norm multi-sample test with the jointly
// optimized eigenvector estimate, and partial tests for every k.  When the
// multi-sample test does not reject at alpha, each series is decoupled by
// z_t = V-hat y_t with V-hat the inverse of the joint diagonalizer.
VarAnalysis var_pipeline(const std::vector<Mat>& series_list, int order,
                         double epsilon, double alpha = 0.05);

// Fits transition matrices to every chain, solves for the simplex vector
// closest to being a common stationary distribution, and runs the k = 1
// partial tests with that direction as the tested left eigenvector.
MarkovAnalysis markov_pipeline(const std::vector<std::vector<int>>& chains, int d,
                               double epsilon);

}  // namespace simdiag

#endif  // SIMDIAG_APPS_HPP_
