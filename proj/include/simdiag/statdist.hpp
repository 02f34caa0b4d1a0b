#ifndef SIMDIAG_STATDIST_HPP_
#define SIMDIAG_STATDIST_HPP_

#include <cstdint>
#include <random>
#include <string>

#include "simdiag/linalg.hpp"

namespace simdiag {

struct GammaParams {
  double shape = 0.0;  // alpha > 0
  double rate = 0.0;   // beta > 0
};

// Reference law of a test statistic: chi-squared, the Box gamma
// approximation, or degenerate at 0 (zero-trace limiting covariance).
struct RefDistribution {
  enum class Kind { ChiSquared, Gamma, Degenerate };
  Kind kind = Kind::Degenerate;
  int df = 0;
  GammaParams gamma;

  static RefDistribution chi_squared(int df);
  static RefDistribution gamma_law(GammaParams params);
  static RefDistribution degenerate();

  // Survival function P(X > x); for Degenerate: 1 at x = 0, else 0.
  double sf(double x) const;
  std::string describe() const;
};

// P(chi^2(df) > x).  df = 0 gives 1 at x = 0 and 0 for x > 0.
double chi2_sf(double x, int df);

// P(gamma(shape, rate) > x).
double gamma_sf(double x, GammaParams params);

// Box moment-matching approximation for sum_r lambda_r(Theta) chi^2(1):
// alpha = tr(Theta)^2 / (2 tr(Theta^2)), beta = tr(Theta) / (2 tr(Theta^2)).
// Theta is symmetrized as (Theta + Theta')/2 first; zero trace gives the
// Degenerate law.
RefDistribution box_gamma_params(const Mat& theta);

using Rng = std::mt19937_64;

// Deterministic per-stream seeding (splitmix64 over seed and stream index).
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

double standard_normal(Rng& rng);

// Draw mean + L z with L L' = cov.  Cholesky when it succeeds, otherwise
// an SVD square root; throws std::domain_error when cov is indefinite
// beyond tolerance.
Vec mvn_sample(const Vec& mean, const Mat& cov, Rng& rng);

// Factor once, draw many.
class MvnSampler {
 public:
  MvnSampler(Vec mean, const Mat& cov);
  Vec draw(Rng& rng) const;

 private:
  Vec mean_;
  Mat factor_;
};

}  // namespace simdiag

#endif  // SIMDIAG_STATDIST_HPP_
