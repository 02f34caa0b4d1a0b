#include "simdiag/statdist.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace simdiag {

namespace {

// Regularized incomplete gamma: series for P(a,x) when x < a+1,
// continued fraction (modified Lentz) for Q(a,x) otherwise.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 2000; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::abs(del) < std::abs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 2000; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) = P(Gamma(shape a, rate 1) > x)
double gamma_q(double a, double x) {
  if (x < 0.0) throw std::invalid_argument("incomplete gamma: x >= 0 required");
  if (!(a > 0.0)) throw std::invalid_argument("incomplete gamma: a > 0 required");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_contfrac(a, x);
}

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Mat psd_factor(const Mat& cov) {
  if (cov.rows() != cov.cols()) {
    throw std::invalid_argument("mvn: covariance must be square");
  }
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) {
    return llt.matrixL();
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (cov + cov.transpose()));
  Vec ev = es.eigenvalues();
  const double scale = ev.size() > 0 ? ev.cwiseAbs().maxCoeff() : 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-8 * std::max(scale, 1.0)) {
      throw std::domain_error("mvn: covariance not PSD beyond tolerance");
    }
    ev(i) = ev(i) > 0.0 ? std::sqrt(ev(i)) : 0.0;
  }
  return es.eigenvectors() * ev.asDiagonal();
}

}  // namespace

RefDistribution RefDistribution::chi_squared(int df) {
  if (df < 0) throw std::invalid_argument("chi_squared: df >= 0 required");
  RefDistribution r;
  r.kind = Kind::ChiSquared;
  r.df = df;
  return r;
}

RefDistribution RefDistribution::gamma_law(GammaParams params) {
  if (!(params.shape > 0.0) || !(params.rate > 0.0) ||
      !std::isfinite(params.shape) || !std::isfinite(params.rate)) {
    throw std::invalid_argument("gamma_law: positive finite shape and rate required");
  }
  RefDistribution r;
  r.kind = Kind::Gamma;
  r.gamma = params;
  return r;
}

RefDistribution RefDistribution::degenerate() { return RefDistribution{}; }

double RefDistribution::sf(double x) const {
  switch (kind) {
    case Kind::ChiSquared:
      return chi2_sf(x, df);
    case Kind::Gamma:
      return gamma_sf(x, gamma);
    case Kind::Degenerate:
      return x > 0.0 ? 0.0 : 1.0;
  }
  return 0.0;
}

std::string RefDistribution::describe() const {
  switch (kind) {
    case Kind::ChiSquared:
      return "chi2(" + std::to_string(df) + ")";
    case Kind::Gamma:
      return "gamma(shape=" + std::to_string(gamma.shape) +
             ", rate=" + std::to_string(gamma.rate) + ")";
    case Kind::Degenerate:
      return "degenerate(0)";
  }
  return "";
}

double chi2_sf(double x, int df) {
  if (x < 0.0) throw std::invalid_argument("chi2_sf: x >= 0 required");
  if (df < 0) throw std::invalid_argument("chi2_sf: df >= 0 required");
  if (df == 0) return x > 0.0 ? 0.0 : 1.0;
  return gamma_q(0.5 * df, 0.5 * x);
}

double gamma_sf(double x, GammaParams params) {
  if (x < 0.0) throw std::invalid_argument("gamma_sf: x >= 0 required");
  if (!(params.shape > 0.0) || !(params.rate > 0.0)) {
    throw std::invalid_argument("gamma_sf: invalid parameters");
  }
  return gamma_q(params.shape, params.rate * x);
}

RefDistribution box_gamma_params(const Mat& theta) {
  if (theta.rows() != theta.cols()) {
    throw std::invalid_argument("box_gamma_params: square matrix required");
  }
  const Mat sym = 0.5 * (theta + theta.transpose());
  const double tr = sym.trace();
  const double tr2 = sym.squaredNorm();  // tr(Theta^2) for symmetric Theta
  const double scale = sym.cwiseAbs().maxCoeff();
  if (tr <= 1e-14 * std::max(scale, 1.0) || tr2 <= 0.0) {
    return RefDistribution::degenerate();
  }
  return RefDistribution::gamma_law({tr * tr / (2.0 * tr2), tr / (2.0 * tr2)});
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed ^ (0xa0761d6478bd642fULL * (stream + 1));
  const std::uint64_t a = splitmix64(state);
  const std::uint64_t b = splitmix64(state);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

double standard_normal(Rng& rng) {
  // Polar Box-Muller; the second member of each pair is discarded so the
  // draw sequence depends only on the stream state.
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double u, v, s;
  do {
    u = unif(rng);
    v = unif(rng);
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

Vec mvn_sample(const Vec& mean, const Mat& cov, Rng& rng) {
  MvnSampler sampler(mean, cov);
  return sampler.draw(rng);
}

MvnSampler::MvnSampler(Vec mean, const Mat& cov) : mean_(std::move(mean)) {
  if (cov.rows() != mean_.size()) {
    throw std::invalid_argument("mvn: mean/cov dimension mismatch");
  }
  factor_ = psd_factor(cov);
}

Vec MvnSampler::draw(Rng& rng) const {
  Vec z(factor_.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
  return mean_ + factor_ * z;
}

}  // namespace simdiag
