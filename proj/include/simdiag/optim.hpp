#ifndef SIMDIAG_OPTIM_HPP_
#define SIMDIAG_OPTIM_HPP_

#include <cstdint>
#include <vector>

#include "simdiag/linalg.hpp"

namespace simdiag {

struct OptimOptions {
  int max_iter = 200;
  double tol = 1e-10;
  std::uint64_t seed = 0;
};

// sum_i off2(V^{-1} A_i V) with off2 the off-diagonal sum of squares.
double off_criterion(const std::vector<Mat>& matrices, const Mat& v);

// f(Q; A, k) = sum_i sum_{r<=k<s} (q_r' A_i q_s)^2.
double partial_objective(const std::vector<Mat>& matrices, const Mat& q, int k);

struct JointDiagResult {
  Mat v_hat;          // invertible, unit columns, sign-fixed, ordered by
                      // descending eigenvalue of the first input
  double off_value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Approximate joint diagonalizer: multiplicative updates V <- V(I + W)
// where W (zero diagonal) solves the linearized least-squares reduction of
// the off-criterion, with step halving until the criterion decreases.
JointDiagResult joint_diagonalize(const std::vector<Mat>& matrices,
                                  const OptimOptions& opts = {});

struct PartialSubspaceResult {
  Mat q_hat;  // orthogonal
  int k = 0;
  double objective = 0.0;
  double warmup_objective = 0.0;
  bool converged = false;
};

// Finds orthogonal Q whose first k columns span a common invariant
// subspace: warm-up sweeps columns one at a time (single-vector
// minimization plus Householder completion), then Gauss-Newton refinement
// on the orthogonal group via skew-symmetric exponential steps restricted
// to the k x (d-k) off-block generators.
PartialSubspaceResult partial_subspace(const std::vector<Mat>& matrices, int k,
                                       const OptimOptions& opts = {});

struct PartialPairResult {
  Mat q_hat;    // orthogonal
  Mat v_tilde;  // k x k, unit columns
  double objective = 0.0;  // joint residual at the returned pair
  bool converged = false;
};

// Couples partial_subspace with the joint diagonalizer of the leading
// k x k blocks, then refines the pair by descending the full residual
// h(Q, V~) = sum_i ||offdiag(V~^{-1} B_i V~)||^2 + ||C_i||^2 over the
// cross-block rotation generators of Q (re-fitting V~ between steps).
// Minimizing the same residual the partial test statistics are built from
// keeps their plug-in versions from exceeding the value at the true pair.
PartialPairResult partial_pair(const std::vector<Mat>& matrices, int k,
                               const OptimOptions& opts = {});

struct SimplexQpResult {
  Vec x;  // on the probability simplex
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
};

// minimize sum_i x'(P_i - I)(P_i' - I)x over the probability simplex,
// solved by away-step Frank-Wolfe with exact line search on the quadratic.
// Negative tol means the default 1e-12 * p * d Frank-Wolfe gap.
SimplexQpResult simplex_qp_stationary(const std::vector<Mat>& p_hats,
                                      const OptimOptions& opts = {20000, -1.0, 0});

}  // namespace simdiag

#endif  // SIMDIAG_OPTIM_HPP_
