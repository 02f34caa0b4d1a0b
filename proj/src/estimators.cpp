#include "simdiag/estimators.hpp"

#include <cmath>
#include <stdexcept>

namespace simdiag {

MeanAccumulator::MeanAccumulator(int d)
    : d_(d),
      sum_(Vec::Zero(static_cast<Eigen::Index>(d) * d)),
      scatter_(Mat::Zero(static_cast<Eigen::Index>(d) * d, static_cast<Eigen::Index>(d) * d)) {
  if (d < 1) throw std::invalid_argument("MeanAccumulator: d >= 1 required");
}

void MeanAccumulator::add(const Mat& sample) {
  if (sample.rows() != d_ || sample.cols() != d_) {
    throw std::invalid_argument("MeanAccumulator: sample dimension mismatch");
  }
  const Vec v = vectorize(sample);
  sum_ += v;
  scatter_.selfadjointView<Eigen::Lower>().rankUpdate(v);
  ++count_;
}

MatrixEstimate MeanAccumulator::finish() const {
  if (count_ < 2) throw std::invalid_argument("mean_estimator: at least 2 samples required");
  const Vec mean = sum_ / static_cast<double>(count_);
  Mat cov = Mat(scatter_.selfadjointView<Eigen::Lower>());
  cov -= static_cast<double>(count_) * mean * mean.transpose();
  cov /= static_cast<double>(count_ - 1);
  cov = 0.5 * (cov + cov.transpose());
  MatrixEstimate est;
  est.a = unvectorize(mean, d_, d_);
  est.sigma_hat = std::move(cov);
  est.c_n = std::sqrt(static_cast<double>(count_));
  est.n = count_;
  return est;
}

MatrixEstimate mean_estimator(const std::vector<Mat>& samples) {
  if (samples.size() < 2) {
    throw std::invalid_argument("mean_estimator: at least 2 samples required");
  }
  MeanAccumulator acc(static_cast<int>(samples.front().rows()));
  for (const Mat& s : samples) acc.add(s);
  return acc.finish();
}

VarFit var_ls_estimator(const Mat& series, int order, bool include_intercept) {
  const long t_total = series.rows();
  const int d = static_cast<int>(series.cols());
  if (order < 1) throw std::invalid_argument("var_ls_estimator: order >= 1 required");
  if (t_total <= static_cast<long>(d) * order + 1) {
    throw std::invalid_argument("var_ls_estimator: series too short");
  }
  const long t_eff = t_total - order;
  const int q = (include_intercept ? 1 : 0) + d * order;

  // Row t of X holds (1, y_{t-1}', ..., y_{t-p}').
  Mat x(t_eff, q);
  Mat y(t_eff, d);
  for (long t = 0; t < t_eff; ++t) {
    int col = 0;
    if (include_intercept) x(t, col++) = 1.0;
    for (int lag = 1; lag <= order; ++lag) {
      x.block(t, col, 1, d) = series.row(order + t - lag);
      col += d;
    }
    y.row(t) = series.row(order + t);
  }

  const Mat xtx = x.transpose() * x;
  Eigen::FullPivLU<Mat> lu(xtx);
  if (!lu.isInvertible()) {
    throw std::domain_error("var_ls_estimator: singular regressor moment matrix");
  }
  const Mat xtx_inv = lu.inverse();
  const Mat b = xtx_inv * (x.transpose() * y);  // q x d coefficient stack
  const Mat resid = y - x * b;

  VarFit fit;
  fit.t_effective = t_eff;
  const long dof = t_eff - q;
  fit.sigma_e = resid.transpose() * resid / static_cast<double>(dof > 0 ? dof : t_eff);
  fit.intercept = include_intercept ? Vec(b.row(0).transpose()) : Vec(Vec::Zero(d));

  const int base = include_intercept ? 1 : 0;
  for (int lag = 1; lag <= order; ++lag) {
    const int r0 = base + (lag - 1) * d;
    // Phi_lag = transpose of the corresponding block of b.
    Mat phi = b.block(r0, 0, d, d).transpose();

    // Cov(vec(B)) ~ Sigma_e (x) (X'X)^{-1}; the column-major covariance of
    // vec(Phi_lag) is then G (x) Sigma_e with G the matching diagonal block,
    // scaled by t_eff for c_n = sqrt(t_eff).
    const Mat g = xtx_inv.block(r0, r0, d, d);
    MatrixEstimate est;
    est.a = phi;
    est.sigma_hat = static_cast<double>(t_eff) * kron(g, fit.sigma_e);
    est.sigma_hat = 0.5 * (est.sigma_hat + est.sigma_hat.transpose()).eval();
    est.c_n = std::sqrt(static_cast<double>(t_eff));
    est.n = t_eff;
    fit.lag_estimates.push_back(est);
    fit.phi.push_back(std::move(phi));
  }
  return fit;
}

MarkovFit markov_transition_estimator(const std::vector<int>& chain, int d) {
  if (d < 2) throw std::invalid_argument("markov_transition_estimator: d >= 2 required");
  if (chain.size() < 2) {
    throw std::invalid_argument("markov_transition_estimator: chain too short");
  }
  const long n = static_cast<long>(chain.size()) - 1;  // transition count

  Mat counts = Mat::Zero(d, d);
  Vec visits = Vec::Zero(d);  // visits among positions 1..n
  for (long t = 0; t < n; ++t) {
    const int r = chain[t] - 1;
    const int s = chain[t + 1] - 1;
    if (r < 0 || r >= d || s < 0 || s >= d) {
      throw std::invalid_argument("markov_transition_estimator: label outside 1..d");
    }
    counts(r, s) += 1.0;
    visits(r) += 1.0;
  }
  for (int r = 0; r < d; ++r) {
    if (visits(r) == 0.0) {
      throw std::domain_error("markov_transition_estimator: unvisited state");
    }
  }

  MarkovFit fit;
  fit.p_hat = counts.array().colwise() / visits.array();
  fit.pi_hat = visits / static_cast<double>(n);

  // Sigma entries per the multinomial row structure, vec index (r,s) -> s*d+r.
  Mat sigma = Mat::Zero(static_cast<Eigen::Index>(d) * d, static_cast<Eigen::Index>(d) * d);
  for (int r = 0; r < d; ++r) {
    const double pir = fit.pi_hat(r);
    for (int s = 0; s < d; ++s) {
      for (int v = 0; v < d; ++v) {
        const double prs = fit.p_hat(r, s);
        const double prv = fit.p_hat(r, v);
        const double cov = (s == v) ? prs * (1.0 - prs) / pir : -prs * prv / pir;
        sigma(static_cast<Eigen::Index>(s) * d + r, static_cast<Eigen::Index>(v) * d + r) = cov;
      }
    }
  }

  fit.estimate.a = fit.p_hat;
  fit.estimate.sigma_hat = std::move(sigma);
  fit.estimate.c_n = std::sqrt(static_cast<double>(n));
  fit.estimate.n = n;
  return fit;
}

Vec stationary_from_transition(const Mat& p) {
  const int d = static_cast<int>(p.rows());
  if (p.cols() != d) throw std::invalid_argument("stationary_from_transition: square required");
  for (int r = 0; r < d; ++r) {
    if (std::abs(p.row(r).sum() - 1.0) > 1e-6) {
      throw std::invalid_argument("stationary_from_transition: rows must sum to 1");
    }
  }
  Eigen::EigenSolver<Mat> es(p.transpose());
  int best = -1;
  int near_one = 0;
  for (int i = 0; i < d; ++i) {
    const std::complex<double> ev = es.eigenvalues()(i);
    if (std::abs(ev - std::complex<double>(1.0, 0.0)) < 1e-8) {
      ++near_one;
      best = i;
    }
  }
  if (near_one == 0) throw std::domain_error("stationary_from_transition: no eigenvalue 1");
  if (near_one > 1) {
    throw std::domain_error("stationary_from_transition: eigenvalue-1 eigenspace not simple");
  }
  Vec pi = es.eigenvectors().col(best).real();
  if (pi.sum() < 0.0) pi = -pi;
  pi = pi.cwiseMax(0.0);
  const double total = pi.sum();
  if (!(total > 0.0)) throw std::domain_error("stationary_from_transition: degenerate eigenvector");
  return pi / total;
}

}  // namespace simdiag
