#include "simdiag/linalg.hpp"

#include <cmath>
#include <stdexcept>

namespace simdiag {

Vec vectorize(const Mat& a) {
  return Eigen::Map<const Vec>(a.data(), a.size());
}

Mat unvectorize(const Vec& v, int rows, int cols) {
  if (v.size() != static_cast<Eigen::Index>(rows) * cols) {
    throw std::invalid_argument("unvectorize: size mismatch");
  }
  return Eigen::Map<const Mat>(v.data(), rows, cols);
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Mat commutator(const Mat& a, const Mat& b) {
  if (a.rows() != a.cols() || b.rows() != b.cols() || a.rows() != b.rows()) {
    throw std::invalid_argument("commutator: square matrices of equal dimension required");
  }
  return a * b - b * a;
}

Mat lambda_op(const Mat& x) {
  if (x.rows() != x.cols()) {
    throw std::invalid_argument("lambda_op: square matrix required");
  }
  const int d = static_cast<int>(x.rows());
  return kron(Mat::Identity(d, d), x) - kron(x.transpose(), Mat::Identity(d, d));
}

Mat offdiag_selector(int d) {
  if (d < 2) throw std::invalid_argument("offdiag_selector: d >= 2 required");
  Mat s = Mat::Zero(static_cast<Eigen::Index>(d) * (d - 1), static_cast<Eigen::Index>(d) * d);
  Eigen::Index row = 0;
  for (int c = 0; c < d; ++c) {
    for (int r = 0; r < d; ++r) {
      if (r == c) continue;
      s(row++, static_cast<Eigen::Index>(c) * d + r) = 1.0;
    }
  }
  return s;
}

Mat duplication_matrix(int d) {
  if (d < 1) throw std::invalid_argument("duplication_matrix: d >= 1 required");
  const int nvech = d * (d + 1) / 2;
  Mat g = Mat::Zero(static_cast<Eigen::Index>(d) * d, nvech);
  int col = 0;
  for (int c = 0; c < d; ++c) {
    for (int r = c; r < d; ++r) {
      g(static_cast<Eigen::Index>(c) * d + r, col) = 1.0;
      g(static_cast<Eigen::Index>(r) * d + c, col) = 1.0;
      ++col;
    }
  }
  return g;
}

Mat commutation_matrix(int d) {
  Mat k = Mat::Zero(static_cast<Eigen::Index>(d) * d, static_cast<Eigen::Index>(d) * d);
  for (int c = 0; c < d; ++c) {
    for (int r = 0; r < d; ++r) {
      // vec(A')[r*d+c] = vec(A)[c*d+r]
      k(static_cast<Eigen::Index>(r) * d + c, static_cast<Eigen::Index>(c) * d + r) = 1.0;
    }
  }
  return k;
}

Mat power_basis(const Mat& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("power_basis: square matrix required");
  }
  const int d = static_cast<int>(m.rows());
  Mat p(static_cast<Eigen::Index>(d) * d, d);
  Mat cur = m;
  for (int j = 0; j < d; ++j) {
    if (j > 0) cur = cur * m;
    const double fro = cur.norm();
    if (!(fro > 0.0)) {
      throw std::domain_error("power_basis: zero matrix power encountered");
    }
    p.col(j) = vectorize(cur) / fro;
  }
  return p;
}

namespace {
constexpr double kZeroRel = 1e-14;    // singular values below this * max are zero
constexpr double kCollideRel = 1e-12; // collision detection band around epsilon
constexpr double kNudgeRel = 1e-9;    // upward nudge applied on collision
}  // namespace

Mat TruncatedSvd::truncated() const {
  Vec s = Vec::Zero(singular_values.size());
  s.head(effective_rank) = singular_values.head(effective_rank);
  return u * s.asDiagonal() * w.transpose();
}

Mat TruncatedSvd::pinverse() const {
  Vec s = Vec::Zero(singular_values.size());
  for (int i = 0; i < effective_rank; ++i) s(i) = 1.0 / singular_values(i);
  return w * s.asDiagonal() * u.transpose();
}

Vec TruncatedSvd::pinverse_apply(const Vec& v) const {
  Vec c = u.leftCols(effective_rank).transpose() * v;
  for (int i = 0; i < effective_rank; ++i) c(i) /= singular_values(i);
  return w.leftCols(effective_rank) * c;
}

TruncatedSvd truncated_svd(const Mat& psi, double epsilon) {
  if (epsilon < 0.0) throw std::invalid_argument("truncated_svd: epsilon >= 0 required");
  Eigen::JacobiSVD<Mat> svd(psi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  TruncatedSvd out;
  out.u = svd.matrixU();
  out.w = svd.matrixV();
  out.singular_values = svd.singularValues();

  const double smax = out.singular_values.size() > 0 ? out.singular_values(0) : 0.0;
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values(i) < kZeroRel * smax) out.singular_values(i) = 0.0;
  }

  // Lemma-1 hypothesis: epsilon must not equal a singular value.
  double eps = epsilon;
  bool nudged = false;
  bool collide = true;
  while (collide && smax > 0.0) {
    collide = false;
    for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
      if (std::abs(out.singular_values(i) - eps) <= kCollideRel * smax) {
        eps += kNudgeRel * smax;
        nudged = true;
        collide = true;
        break;
      }
    }
  }
  out.epsilon = eps;
  out.epsilon_nudged = nudged;

  int rank = 0;
  for (Eigen::Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values(i) > eps) ++rank;
  }
  out.effective_rank = rank;
  return out;
}

}  // namespace simdiag
