#include "simdiag/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "simdiag/statdist.hpp"

namespace simdiag {

namespace {

double off2(const Mat& x) {
  return x.squaredNorm() - x.diagonal().squaredNorm();
}

void check_pool(const std::vector<Mat>& matrices) {
  if (matrices.empty()) throw std::invalid_argument("optim: empty matrix pool");
  const Eigen::Index d = matrices.front().rows();
  double scale = 0.0;
  for (const Mat& a : matrices) {
    if (a.rows() != d || a.cols() != d) {
      throw std::invalid_argument("optim: pool matrices must share one square dimension");
    }
    scale = std::max(scale, a.cwiseAbs().maxCoeff());
  }
  if (!(scale > 0.0)) throw std::invalid_argument("optim: all-zero inputs");
}

// Real eigenvector matrix of a, or empty when the spectrum is complex.
Mat real_eigenvectors(const Mat& a) {
  Eigen::EigenSolver<Mat> es(a);
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (es.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-9 * scale) return Mat();
  return es.eigenvectors().real();
}

bool well_conditioned(const Mat& v) {
  Eigen::JacobiSVD<Mat> svd(v);
  const double smin = svd.singularValues().minCoeff();
  return smin > 0.0 && svd.singularValues().maxCoeff() / smin < 1e12;
}

// Householder reflector H (orthogonal, symmetric) with H e1 = q, unit q.
Mat householder_completion(const Vec& q) {
  const Eigen::Index m = q.size();
  Mat h = Mat::Identity(m, m);
  Vec v = q;
  v(0) -= 1.0;
  const double vv = v.squaredNorm();
  if (vv < 1e-24) return h;
  h -= (2.0 / vv) * v * v.transpose();
  return h;
}

// Single-vector warm-up objective: g(q) = sum_j ||A_j' q||^2 - (q' A_j q)^2,
// zero exactly when q is a common left eigenvector of the pool.
double single_vector_objective(const std::vector<Mat>& pool, const Vec& q) {
  double val = 0.0;
  for (const Mat& a : pool) {
    const Vec atq = a.transpose() * q;
    const double rayleigh = q.dot(a * q);
    val += atq.squaredNorm() - rayleigh * rayleigh;
  }
  return val;
}

Vec single_vector_gradient(const std::vector<Mat>& pool, const Vec& q) {
  Vec grad = Vec::Zero(q.size());
  for (const Mat& a : pool) {
    const double rayleigh = q.dot(a * q);
    grad += 2.0 * (a * (a.transpose() * q));
    grad -= 2.0 * rayleigh * (a * q + a.transpose() * q);
  }
  return grad;
}

// Minimizes g over the unit sphere: candidate left eigenvectors of random
// pool combinations, then projected gradient descent with backtracking.
Vec best_common_left_vector(const std::vector<Mat>& pool, const OptimOptions& opts, Rng& rng) {
  const Eigen::Index m = pool.front().rows();
  Vec best = Vec::Unit(m, 0);
  double best_val = single_vector_objective(pool, best);

  auto consider = [&](const Vec& cand) {
    const double norm = cand.norm();
    if (!(norm > 0.0)) return;
    const Vec q = cand / norm;
    const double val = single_vector_objective(pool, q);
    if (val < best_val) {
      best_val = val;
      best = q;
    }
  };

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < 6; ++attempt) {
    Mat combo = Mat::Zero(m, m);
    if (attempt == 0) {
      for (const Mat& a : pool) combo += a;
    } else {
      for (const Mat& a : pool) combo += unif(rng) * a;
    }
    // Left eigenvectors of the combination are eigenvectors of its transpose.
    Eigen::EigenSolver<Mat> es(combo.transpose());
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::abs(es.eigenvalues()(i).imag()) <
          1e-9 * std::max(1.0, combo.cwiseAbs().maxCoeff())) {
        consider(es.eigenvectors().col(i).real());
      }
    }
  }

  // Projected gradient polish on the sphere.
  Vec q = best;
  double val = best_val;
  for (int it = 0; it < opts.max_iter; ++it) {
    Vec grad = single_vector_gradient(pool, q);
    grad -= q.dot(grad) * q;
    const double gnorm = grad.norm();
    if (gnorm < 1e-14 * std::max(1.0, std::abs(val))) break;
    double step = 1.0 / std::max(1.0, gnorm);
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      Vec trial = q - step * grad;
      trial.normalize();
      const double trial_val = single_vector_objective(pool, trial);
      if (trial_val < val) {
        const double drop = val - trial_val;
        q = trial;
        val = trial_val;
        accepted = true;
        if (drop < opts.tol * std::max(1.0, val)) it = opts.max_iter;  // converged
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return val < best_val ? q : best;
}

}  // namespace

double off_criterion(const std::vector<Mat>& matrices, const Mat& v) {
  Eigen::PartialPivLU<Mat> lu(v);
  double total = 0.0;
  for (const Mat& a : matrices) total += off2(lu.solve(a * v));
  return total;
}

double partial_objective(const std::vector<Mat>& matrices, const Mat& q, int k) {
  const int d = static_cast<int>(q.rows());
  double total = 0.0;
  for (const Mat& a : matrices) {
    total += (q.leftCols(k).transpose() * a * q.rightCols(d - k)).squaredNorm();
  }
  return total;
}

JointDiagResult joint_diagonalize(const std::vector<Mat>& matrices, const OptimOptions& opts) {
  check_pool(matrices);
  const int d = static_cast<int>(matrices.front().rows());

  // Initialization: eigenvectors of the first input, then of random convex
  // combinations, then the real Schur vectors as a last resort.
  Mat v = real_eigenvectors(matrices.front());
  if (v.size() == 0 || !well_conditioned(v)) {
    Rng rng = make_rng(opts.seed, 0x6a6f696e74ULL);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int attempt = 0; attempt < 5 && (v.size() == 0 || !well_conditioned(v)); ++attempt) {
      Mat combo = Mat::Zero(d, d);
      double total = 0.0;
      std::vector<double> weights(matrices.size());
      for (double& wgt : weights) {
        wgt = unif(rng);
        total += wgt;
      }
      for (std::size_t i = 0; i < matrices.size(); ++i) combo += (weights[i] / total) * matrices[i];
      v = real_eigenvectors(combo);
    }
  }
  if (v.size() == 0) {
    // Complex spectrum everywhere (outside the distinct-real-eigenvalue
    // contract); fall back to orthogonal Schur vectors of the first input.
    Eigen::RealSchur<Mat> schur(matrices.front());
    v = schur.matrixU();
  }
  if (!well_conditioned(v)) {
    throw std::domain_error("joint_diagonalize: no invertible initialization found");
  }

  JointDiagResult result;
  double off = off_criterion(matrices, v);
  const double floor_tol = 1e-30;
  int iter = 0;
  for (; iter < opts.max_iter; ++iter) {
    if (off < floor_tol) {
      result.converged = true;
      break;
    }
    Eigen::PartialPivLU<Mat> lu(v);
    std::vector<Mat> t(matrices.size());
    for (std::size_t i = 0; i < matrices.size(); ++i) t[i] = lu.solve(matrices[i] * v);

    // Linearized least squares per off-diagonal slot.
    Mat w = Mat::Zero(d, d);
    for (int r = 0; r < d; ++r) {
      for (int s = 0; s < d; ++s) {
        if (r == s) continue;
        double num = 0.0;
        double den = 0.0;
        for (const Mat& ti : t) {
          const double gap = ti(r, r) - ti(s, s);
          num += ti(r, s) * gap;
          den += gap * gap;
        }
        if (den > 1e-300) w(r, s) = -num / den;
      }
    }

    double step = 1.0;
    bool accepted = false;
    double off_new = off;
    for (int half = 0; half < 30; ++half) {
      const Mat v_trial = v + step * (v * w);
      if (well_conditioned(v_trial)) {
        off_new = off_criterion(matrices, v_trial);
        if (off_new < off) {
          v = v_trial;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double decrease = (off - off_new) / std::max(off, floor_tol);
    off = off_new;
    if (decrease < opts.tol) {
      result.converged = true;
      ++iter;
      break;
    }
  }

  // Normalization: unit columns, largest-magnitude entry positive, ordered
  // by descending eigenvalue of the first input.
  for (int c = 0; c < d; ++c) {
    v.col(c).normalize();
    Eigen::Index argmax;
    v.col(c).cwiseAbs().maxCoeff(&argmax);
    if (v(argmax, c) < 0.0) v.col(c) = -v.col(c);
  }
  const Mat t1 = Eigen::PartialPivLU<Mat>(v).solve(matrices.front() * v);
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return t1(a, a) > t1(b, b); });
  Mat v_sorted(d, d);
  for (int c = 0; c < d; ++c) v_sorted.col(c) = v.col(order[c]);
  v = std::move(v_sorted);

  result.v_hat = v;
  result.off_value = off_criterion(matrices, v);
  result.iterations = iter;
  return result;
}

PartialSubspaceResult partial_subspace(const std::vector<Mat>& matrices, int k,
                                       const OptimOptions& opts) {
  check_pool(matrices);
  const int d = static_cast<int>(matrices.front().rows());
  if (k < 1 || k >= d) throw std::invalid_argument("partial_subspace: 1 <= k < d required");
  const int p = static_cast<int>(matrices.size());

  Rng rng = make_rng(opts.seed, 0x7061727469616cULL);

  // Warm-up: peel off one common left-eigenvector direction at a time in
  // the shrinking residual space, completing each to an orthogonal basis.
  Mat q = Mat::Identity(d, d);
  std::vector<Mat> pool = matrices;
  for (int i = 0; i < k; ++i) {
    const Vec qi = best_common_left_vector(pool, opts, rng);
    const Mat h = householder_completion(qi);
    q.rightCols(d - i) = q.rightCols(d - i) * h;
    const Mat completion = h.rightCols(d - i - 1);
    for (Mat& a : pool) a = (completion.transpose() * a * completion).eval();
  }
  const double warmup = partial_objective(matrices, q, k);

  PartialSubspaceResult result;
  result.k = k;
  result.warmup_objective = warmup;

  // Gauss-Newton on Q exp(S(x)) with S skew from the k x (d-k) block.
  const int nparam = k * (d - k);
  const int nres = p * nparam;
  double objective = warmup;
  bool any_step = false;
  bool converged = warmup < 1e-30;
  int iter = 0;
  for (; iter < opts.max_iter && !converged; ++iter) {
    std::vector<Mat> t(p);
    Vec residual(nres);
    for (int i = 0; i < p; ++i) {
      t[i] = q.transpose() * matrices[i] * q;
      const Mat c = t[i].topRightCorner(k, d - k);
      residual.segment(static_cast<Eigen::Index>(i) * nparam, nparam) =
          Eigen::Map<const Vec>(c.data(), nparam);
    }

    Mat jac(nres, nparam);
    int col = 0;
    for (int s = k; s < d; ++s) {
      for (int r = 0; r < k; ++r) {
        Mat skew = Mat::Zero(d, d);
        skew(r, s) = 1.0;
        skew(s, r) = -1.0;
        for (int i = 0; i < p; ++i) {
          const Mat dt = t[i] * skew - skew * t[i];
          const Mat dc = dt.topRightCorner(k, d - k);
          jac.block(static_cast<Eigen::Index>(i) * nparam, col, nparam, 1) =
              Eigen::Map<const Vec>(dc.data(), nparam);
        }
        ++col;
      }
    }

    const Vec delta = jac.colPivHouseholderQr().solve(-residual);
    if (!delta.allFinite() || delta.norm() < 1e-300) break;

    double step = 1.0;
    bool accepted = false;
    for (int half = 0; half < 30; ++half) {
      Mat skew = Mat::Zero(d, d);
      int idx = 0;
      for (int s = k; s < d; ++s) {
        for (int r = 0; r < k; ++r) {
          skew(r, s) = step * delta(idx);
          skew(s, r) = -step * delta(idx);
          ++idx;
        }
      }
      const Mat q_trial = q * skew.exp();
      const double trial = partial_objective(matrices, q_trial, k);
      if (trial < objective) {
        const double decrease = (objective - trial) / std::max(objective, 1e-30);
        q = q_trial;
        objective = trial;
        accepted = true;
        any_step = true;
        if (decrease < opts.tol || objective < 1e-30) converged = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // No descent direction left; treat as converged if refinement ever
      // made progress (or the warm-up already solved the problem).
      converged = any_step || warmup < opts.tol;
      break;
    }
  }

  // Keep the exact-orthogonality contract after repeated exponentials.
  if ((q.transpose() * q - Mat::Identity(d, d)).norm() > 1e-12) {
    Eigen::HouseholderQR<Mat> qr(q);
    Mat qq = qr.householderQ();
    const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int c = 0; c < d; ++c) {
      if (r(c, c) < 0.0) qq.col(c) = -qq.col(c);
    }
    q = qq;
  }
  const double final_obj = partial_objective(matrices, q, k);

  result.q_hat = q;
  result.objective = final_obj;
  result.converged = converged;
  if (final_obj > warmup) {
    // Refinement drifted above the warm-up value (can only happen through
    // the re-orthogonalization); report the warm-up point instead.
    result.objective = warmup;
    result.converged = false;
  }
  return result;
}

namespace {

double pair_objective(const std::vector<Mat>& matrices, const Mat& q, int k,
                      const Mat& v_tilde) {
  const int d = static_cast<int>(q.rows());
  Eigen::PartialPivLU<Mat> lu(v_tilde);
  double h = 0.0;
  for (const Mat& a : matrices) {
    const Mat t = q.transpose() * a * q;
    const Mat b = lu.solve(t.topLeftCorner(k, k) * v_tilde);
    h += b.squaredNorm() - b.diagonal().squaredNorm();
    h += t.topRightCorner(k, d - k).squaredNorm();
  }
  return h;
}

Mat fit_v_tilde(const std::vector<Mat>& matrices, const Mat& q, int k,
                const OptimOptions& opts) {
  if (k == 1) return Mat::Identity(1, 1);
  std::vector<Mat> blocks;
  for (const Mat& a : matrices) {
    blocks.push_back(q.leftCols(k).transpose() * a * q.leftCols(k));
  }
  return joint_diagonalize(blocks, opts).v_hat;
}

}  // namespace

PartialPairResult partial_pair(const std::vector<Mat>& matrices, int k,
                               const OptimOptions& opts) {
  const PartialSubspaceResult ps = partial_subspace(matrices, k, opts);
  const int d = static_cast<int>(ps.q_hat.rows());
  const int nparam = k * (d - k);

  PartialPairResult result;
  Mat q = ps.q_hat;
  Mat v_tilde = fit_v_tilde(matrices, q, k, opts);
  double h = pair_objective(matrices, q, k, v_tilde);
  result.converged = ps.converged;

  const auto with_skew = [&](const Mat& base, const Vec& x) {
    Mat skew = Mat::Zero(d, d);
    for (int j = 0; j < nparam; ++j) {
      const int r = j % k;
      const int c = k + j / k;
      skew(r, c) = x(j);
      skew(c, r) = -x(j);
    }
    return Mat(base * skew.exp());
  };

  for (int outer = 0; outer < opts.max_iter; ++outer) {
    // Central-difference gradient over the cross-block generators.
    Vec grad(nparam);
    const double fd = 1e-6;
    for (int j = 0; j < nparam; ++j) {
      Vec x = Vec::Zero(nparam);
      x(j) = fd;
      const double hp = pair_objective(matrices, with_skew(q, x), k, v_tilde);
      x(j) = -fd;
      const double hm = pair_objective(matrices, with_skew(q, x), k, v_tilde);
      grad(j) = (hp - hm) / (2.0 * fd);
    }

    double step = 1.0 / std::max(1.0, 100.0 * grad.norm());
    bool moved = false;
    for (int half = 0; half < 25; ++half) {
      const Mat q_trial = with_skew(q, Vec(-step * grad));
      const double h_trial = pair_objective(matrices, q_trial, k, v_tilde);
      if (h_trial < h) {
        q = q_trial;
        h = h_trial;
        moved = true;
        break;
      }
      step *= 0.5;
    }

    const Mat v_refit = fit_v_tilde(matrices, q, k, opts);
    const double h_refit = pair_objective(matrices, q, k, v_refit);
    const bool settled = (h - h_refit) < opts.tol * std::max(h, 1e-30) && !moved;
    if (h_refit < h) {
      v_tilde = v_refit;
      h = h_refit;
    }
    if (settled) {
      result.converged = true;
      break;
    }
  }

  result.q_hat = q;
  result.v_tilde = v_tilde;
  result.objective = h;
  return result;
}

SimplexQpResult simplex_qp_stationary(const std::vector<Mat>& p_hats,
                                      const OptimOptions& opts) {
  if (p_hats.empty()) throw std::invalid_argument("simplex_qp_stationary: empty input");
  const int d = static_cast<int>(p_hats.front().rows());
  if (d < 2) throw std::invalid_argument("simplex_qp_stationary: d >= 2 required");
  for (const Mat& p : p_hats) {
    if (p.rows() != d || p.cols() != d) {
      throw std::invalid_argument("simplex_qp_stationary: dimension mismatch");
    }
    for (int r = 0; r < d; ++r) {
      if (std::abs(p.row(r).sum() - 1.0) > 1e-6 || p.row(r).minCoeff() < -1e-6) {
        throw std::invalid_argument("simplex_qp_stationary: input not row-stochastic");
      }
    }
  }

  Mat h = Mat::Zero(d, d);
  for (const Mat& p : p_hats) {
    const Mat b = p.transpose() - Mat::Identity(d, d);  // f = sum ||B x||^2
    h += b.transpose() * b;
  }

  const double tol = opts.tol >= 0.0 ? opts.tol
                                     : 1e-12 * static_cast<double>(p_hats.size()) * d;

  SimplexQpResult result;
  Vec x = Vec::Constant(d, 1.0 / d);
  int iter = 0;
  bool converged = false;
  for (; iter < opts.max_iter; ++iter) {
    const Vec grad = 2.0 * (h * x);
    Eigen::Index j_fw;
    grad.minCoeff(&j_fw);
    const double gap = grad.dot(x) - grad(j_fw);
    if (gap < tol) {
      converged = true;
      break;
    }

    // Away vertex: largest gradient among active coordinates.
    Eigen::Index j_aw = -1;
    double worst = -std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (x(j) > 0.0 && grad(j) > worst) {
        worst = grad(j);
        j_aw = j;
      }
    }

    Vec dir;
    double gamma_max;
    const double slope_fw = grad(j_fw) - grad.dot(x);
    const double slope_aw = grad.dot(x) - worst;
    if (slope_fw <= slope_aw || j_aw < 0 || x(j_aw) >= 1.0 - 1e-15) {
      dir = -x;
      dir(j_fw) += 1.0;
      gamma_max = 1.0;
    } else {
      dir = x;
      dir(j_aw) -= 1.0;
      gamma_max = x(j_aw) / (1.0 - x(j_aw));
    }

    const double curvature = 2.0 * dir.dot(h * dir);
    double gamma = gamma_max;
    if (curvature > 0.0) gamma = std::clamp(-grad.dot(dir) / curvature, 0.0, gamma_max);
    if (gamma <= 0.0) {
      converged = true;
      break;
    }
    x += gamma * dir;
    x = x.cwiseMax(0.0);
    x /= x.sum();
  }

  result.x = x;
  result.objective = x.dot(h * x);
  result.iterations = iter;
  result.converged = converged;
  return result;
}

}  // namespace simdiag
