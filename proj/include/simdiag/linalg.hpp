#ifndef SIMDIAG_LINALG_HPP_
#define SIMDIAG_LINALG_HPP_

#include <Eigen/Dense>

namespace simdiag {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Column-stacking vectorization and its inverse mat_{rows}(.).
Vec vectorize(const Mat& a);
Mat unvectorize(const Vec& v, int rows, int cols);

// Kronecker product, blocks a(i,j) * b.
Mat kron(const Mat& a, const Mat& b);

// [A, B] = AB - BA. Throws std::invalid_argument on dimension mismatch.
Mat commutator(const Mat& a, const Mat& b);

// Lambda(X) = I_d (x) X - X' (x) I_d.  Annihilates vec(I_d) for any X.
Mat lambda_op(const Mat& x);

// Off-diagonal selection matrix S_d of size d(d-1) x d^2 such that
// S_d vec(X) stacks all off-diagonal entries of X.  Row ordering is
// column-major traversal of vec(X) skipping diagonal slots.
Mat offdiag_selector(int d);

// Duplication matrix G_d with G_d vech(A) = vec(A) for symmetric A;
// vech stacks the lower triangle column by column.
Mat duplication_matrix(int d);

// Commutation matrix K_d with K_d vec(A) = vec(A') for any d x d A.
Mat commutation_matrix(int d);

// P = (vec(M^1)/||M^1||_F, ..., vec(M^d)/||M^d||_F).  Throws
// std::domain_error if some power is the zero matrix.
Mat power_basis(const Mat& m);

// Truncated SVD: singular values <= epsilon are zeroed
// before forming the truncated matrix and its Moore-Penrose inverse.
//
// Singular values below 1e-14 * sigma_max are treated as exactly zero.
// If epsilon collides with a singular value (within 1e-12 * sigma_max)
// it is nudged upward by 1e-9 * sigma_max; epsilon_nudged records this.
struct TruncatedSvd {
  Mat u;                 // left singular vectors (thin)
  Mat w;                 // right singular vectors (thin)
  Vec singular_values;   // non-increasing, non-negative
  double epsilon = 0.0;  // threshold actually used (after any nudge)
  int effective_rank = 0;
  bool epsilon_nudged = false;

  Mat truncated() const;  // Psi(eps)
  Mat pinverse() const;   // Psi^+(eps)

  // Psi^+(eps) * v without forming the d^2 x d^2 inverse.
  Vec pinverse_apply(const Vec& v) const;
};

TruncatedSvd truncated_svd(const Mat& psi, double epsilon);

}  // namespace simdiag

#endif  // SIMDIAG_LINALG_HPP_
