#ifndef SIMDIAG_SIMHARNESS_HPP_
#define SIMDIAG_SIMHARNESS_HPP_

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "simdiag/statdist.hpp"
#include "simdiag/testing.hpp"

namespace simdiag {

enum class SimDesign { TwoSample, Multi, Partial };

struct SimConfig {
  SimDesign design = SimDesign::TwoSample;
  int d = 5;
  int p = 2;  // pool size; forced to 2 for the two-sample design
  int k = 1;  // partial design only
  long n = 250;
  int replicates = 500;
  double snr = std::numeric_limits<double>::infinity();
  double epsilon = kAutoEpsilon;
  std::uint64_t seed = 1;
  double alpha = 0.05;

  void validate() const;  // throws std::invalid_argument
};

struct HistogramBin {
  double left = 0.0;
  double right = 0.0;
  long count = 0;
  double fraction = 0.0;
};

struct VariantResult {
  std::string name;
  std::vector<double> p_values;  // successful replicates, replicate order
  double rejection_rate = 0.0;   // at config.alpha
  std::vector<HistogramBin> histogram;  // 20 equal bins over [0,1]
};

struct SimResult {
  SimConfig config;
  std::vector<VariantResult> variants;
  int failed_replicates = 0;
  std::vector<std::string> failure_messages;  // one per failed replicate
  double seconds_total = 0.0;
  double seconds_per_replicate = 0.0;
};

struct TwoSampleDraw {
  Mat m1, m2, v;
};
struct MultiDraw {
  std::vector<Mat> m;
  Mat v;  // shared base eigenvector matrix (exact under snr = inf)
};
struct PartialDraw {
  std::vector<Mat> m;
  Mat v_shared;  // d x k shared left-eigenvector columns (exact under snr = inf)
};

// Design generators (designs of the simulation study).  rho = snr^{-1/2},
// exactly zero when snr is infinite.
TwoSampleDraw gen_two_sample(int d, double snr, Rng& rng);
MultiDraw gen_multi(int d, int p, double snr, Rng& rng);
PartialDraw gen_partial(int d, int p, int k, double snr, Rng& rng);

// 20-bin histogram over [0,1]; fractions relative to the value count.
std::vector<HistogramBin> make_histogram(const std::vector<double>& values,
                                         int bins = 20);

// Worker cap: SIMDIAG_THREADS when set and positive, else hardware
// concurrency, never more than the replicate count.
int worker_count(int replicates);

// Runs the configured design: per replicate, generate the mean matrices,
// average n noisy observations of each into a MatrixEstimate, and apply the
// design's tests.  Deterministic for a fixed config regardless of the
// worker count (one RNG stream per replicate).  Replicates that throw are
// recorded and excluded from the p-value collections.
SimResult run_replicates(const SimConfig& config);

}  // namespace simdiag

#endif  // SIMDIAG_SIMHARNESS_HPP_
