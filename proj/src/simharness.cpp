#include "simdiag/simharness.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "simdiag/estimators.hpp"
#include "simdiag/optim.hpp"

namespace simdiag {

namespace {

double rho_from_snr(double snr) {
  if (std::isinf(snr)) return 0.0;
  if (!(snr > 0.0)) throw std::invalid_argument("simharness: snr must be positive");
  return 1.0 / std::sqrt(snr);
}

// Diagonal spectrum satisfying the separation the tests assume: magnitudes
// uniform on [0.5, 2] with random signs, pairwise gaps at least 0.1.
Vec draw_spectrum(int d, Rng& rng) {
  std::uniform_real_distribution<double> mag(0.5, 2.0);
  std::uniform_int_distribution<int> coin(0, 1);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    Vec diag(d);
    for (int i = 0; i < d; ++i) diag(i) = (coin(rng) ? 1.0 : -1.0) * mag(rng);
    bool ok = true;
    for (int i = 0; i < d && ok; ++i) {
      for (int j = i + 1; j < d; ++j) {
        if (std::abs(diag(i) - diag(j)) < 0.1) {
          ok = false;
          break;
        }
      }
    }
    if (ok) return diag;
  }
  throw std::domain_error("simharness: failed to draw a separated spectrum");
}

Mat draw_gaussian(int rows, int cols, Rng& rng) {
  Mat e(rows, cols);
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r < rows; ++r) e(r, c) = standard_normal(rng);
  }
  return e;
}

double condition_number(const Mat& m) {
  Eigen::JacobiSVD<Mat> svd(m);
  const double smin = svd.singularValues().minCoeff();
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return svd.singularValues().maxCoeff() / smin;
}

Mat draw_well_conditioned(int d, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Mat v = draw_gaussian(d, d, rng);
    if (condition_number(v) <= 1e6) return v;
  }
  throw std::domain_error("simharness: failed to draw a well-conditioned matrix");
}

int variant_count(SimDesign design) {
  switch (design) {
    case SimDesign::TwoSample:
      return 1;
    case SimDesign::Multi:
      return 3;
    case SimDesign::Partial:
      return 2;
  }
  throw std::logic_error("unreachable");
}

std::vector<std::string> variant_names(SimDesign design) {
  switch (design) {
    case SimDesign::TwoSample:
      return {"commutator"};
    case SimDesign::Multi:
      return {"chi2_exact_v", "chi2_v_hat", "gamma_v_hat"};
    case SimDesign::Partial:
      return {"chi2", "gamma"};
  }
  throw std::logic_error("unreachable");
}

MatrixEstimate noisy_mean_estimate(const Mat& m, long n, Rng& rng) {
  const int d = static_cast<int>(m.rows());
  MeanAccumulator acc(d);
  Mat sample(d, d);
  for (long t = 0; t < n; ++t) {
    for (int c = 0; c < d; ++c) {
      for (int r = 0; r < d; ++r) sample(r, c) = m(r, c) + standard_normal(rng);
    }
    acc.add(sample);
  }
  return acc.finish();
}

// One replicate worth of p-values, in the variant order of variant_names.
std::vector<double> run_one(const SimConfig& cfg, int replicate) {
  Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(replicate) + 1);
  OptimOptions opt_opts;
  opt_opts.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(replicate) + 1));

  switch (cfg.design) {
    case SimDesign::TwoSample: {
      const TwoSampleDraw draw = gen_two_sample(cfg.d, cfg.snr, rng);
      const MatrixEstimate e1 = noisy_mean_estimate(draw.m1, cfg.n, rng);
      const MatrixEstimate e2 = noisy_mean_estimate(draw.m2, cfg.n, rng);
      return {commutator_test(e1, e2, cfg.epsilon).p_value};
    }
    case SimDesign::Multi: {
      const MultiDraw draw = gen_multi(cfg.d, cfg.p, cfg.snr, rng);
      EstimateBundle bundle;
      std::vector<Mat> a_hats;
      for (const Mat& m : draw.m) {
        bundle.estimates.push_back(noisy_mean_estimate(m, cfg.n, rng));
        a_hats.push_back(bundle.estimates.back().a);
      }
      const double p_exact = multi_eig_test(bundle, draw.v, cfg.epsilon).p_value;
      const JointDiagResult jd = joint_diagonalize(a_hats, opt_opts);
      const double p_vhat = multi_eig_test(bundle, jd.v_hat, cfg.epsilon).p_value;
      const double p_gamma = multi_eig_gamma_test(bundle, jd.v_hat).p_value;
      return {p_exact, p_vhat, p_gamma};
    }
    case SimDesign::Partial: {
      const PartialDraw draw = gen_partial(cfg.d, cfg.p, cfg.k, cfg.snr, rng);
      EstimateBundle bundle;
      std::vector<Mat> a_hats;
      for (const Mat& m : draw.m) {
        bundle.estimates.push_back(noisy_mean_estimate(m, cfg.n, rng));
        a_hats.push_back(bundle.estimates.back().a);
      }
      const PartialPairResult pp = partial_pair(a_hats, cfg.k, opt_opts);
      const double p_chi2 = partial_test(bundle, pp.q_hat, cfg.k, pp.v_tilde, cfg.epsilon,
                                         PartialVariant::ChiSquared)
                                .p_value;
      const double p_gamma = partial_test(bundle, pp.q_hat, cfg.k, pp.v_tilde, cfg.epsilon,
                                          PartialVariant::Gamma)
                                 .p_value;
      return {p_chi2, p_gamma};
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace

void SimConfig::validate() const {
  if (d < 2) throw std::invalid_argument("SimConfig: d >= 2 required");
  if (n < 2) throw std::invalid_argument("SimConfig: n >= 2 required");
  if (replicates < 1) throw std::invalid_argument("SimConfig: replicates >= 1 required");
  if (!(snr > 0.0)) throw std::invalid_argument("SimConfig: snr must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("SimConfig: alpha in (0,1)");
  if (design != SimDesign::TwoSample && p < 2) {
    throw std::invalid_argument("SimConfig: p >= 2 required");
  }
  if (design == SimDesign::Partial && (k < 1 || k >= d)) {
    throw std::invalid_argument("SimConfig: 1 <= k < d required for the partial design");
  }
}

TwoSampleDraw gen_two_sample(int d, double snr, Rng& rng) {
  if (d < 2) throw std::invalid_argument("gen_two_sample: d >= 2 required");
  const double rho = rho_from_snr(snr);

  TwoSampleDraw draw;
  draw.v = draw_well_conditioned(d, rng);
  const Vec d1 = draw_spectrum(d, rng);
  const Vec d2 = draw_spectrum(d, rng);
  Mat v_star = draw.v;
  if (rho != 0.0) v_star += rho * draw_gaussian(d, d, rng);

  draw.m1 = draw.v * d1.asDiagonal() * draw.v.inverse();
  draw.m2 = v_star * d2.asDiagonal() * v_star.inverse();
  return draw;
}

MultiDraw gen_multi(int d, int p, double snr, Rng& rng) {
  if (d < 2 || p < 2) throw std::invalid_argument("gen_multi: d >= 2 and p >= 2 required");
  const double rho = rho_from_snr(snr);

  MultiDraw draw;
  draw.v = draw_well_conditioned(d, rng);
  for (int i = 0; i < p; ++i) {
    const Vec di = draw_spectrum(d, rng);
    Mat vi = draw.v;
    if (rho != 0.0) vi += rho * draw_gaussian(d, d, rng);
    draw.m.push_back(vi * di.asDiagonal() * vi.inverse());
  }
  return draw;
}

PartialDraw gen_partial(int d, int p, int k, double snr, Rng& rng) {
  if (d < 2 || p < 2) throw std::invalid_argument("gen_partial: d >= 2 and p >= 2 required");
  if (k < 1 || k >= d) throw std::invalid_argument("gen_partial: 1 <= k < d required");
  const double rho = rho_from_snr(snr);

  PartialDraw draw;
  draw.v_shared = draw_gaussian(d, k, rng);
  for (int i = 0; i < p; ++i) {
    Mat li(d, d);
    li.leftCols(k) = draw.v_shared;
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      li.rightCols(d - k) = draw_gaussian(d, d - k, rng);
      ok = condition_number(li) <= 1e6;
    }
    if (!ok) throw std::domain_error("gen_partial: failed to complete eigenvector basis");
    if (rho != 0.0) li += rho * draw_gaussian(d, d, rng);

    // The shared columns are common left eigenvectors at rho = 0:
    // M_i' L_i = L_i D_i, i.e. M_i = L_i^{-T} D_i L_i^T.
    const Vec di = draw_spectrum(d, rng);
    draw.m.push_back(li.transpose().inverse() * di.asDiagonal() * li.transpose());
  }
  return draw;
}

std::vector<HistogramBin> make_histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw std::invalid_argument("make_histogram: bins >= 1 required");
  std::vector<HistogramBin> hist(bins);
  for (int b = 0; b < bins; ++b) {
    hist[b].left = static_cast<double>(b) / bins;
    hist[b].right = static_cast<double>(b + 1) / bins;
  }
  for (double v : values) {
    int b = static_cast<int>(std::floor(v * bins));
    b = std::min(std::max(b, 0), bins - 1);  // p = 1 lands in the last bin
    ++hist[b].count;
  }
  if (!values.empty()) {
    for (auto& bin : hist) {
      bin.fraction = static_cast<double>(bin.count) / static_cast<double>(values.size());
    }
  }
  return hist;
}

int worker_count(int replicates) {
  int workers = 0;
  if (const char* env = std::getenv("SIMDIAG_THREADS")) {
    workers = std::atoi(env);
  }
  if (workers <= 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 0) workers = 1;
  }
  return std::max(1, std::min(workers, replicates));
}

SimResult run_replicates(const SimConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();

  const int nvar = variant_count(config.design);
  const int reps = config.replicates;
  std::vector<std::vector<double>> rows(reps);
  std::vector<std::string> errors(reps);

  const int workers = worker_count(reps);
  std::atomic<int> next{0};
  auto work = [&]() {
    for (;;) {
      const int rep = next.fetch_add(1);
      if (rep >= reps) return;
      try {
        rows[rep] = run_one(config, rep);
      } catch (const std::exception& ex) {
        errors[rep] = ex.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }

  SimResult result;
  result.config = config;
  const auto names = variant_names(config.design);
  result.variants.resize(nvar);
  for (int v = 0; v < nvar; ++v) result.variants[v].name = names[v];

  for (int rep = 0; rep < reps; ++rep) {
    if (rows[rep].empty()) {
      ++result.failed_replicates;
      result.failure_messages.push_back("replicate " + std::to_string(rep) + ": " + errors[rep]);
      continue;
    }
    for (int v = 0; v < nvar; ++v) result.variants[v].p_values.push_back(rows[rep][v]);
  }

  for (auto& variant : result.variants) {
    variant.histogram = make_histogram(variant.p_values);
    if (!variant.p_values.empty()) {
      long rejected = 0;
      for (double p : variant.p_values) {
        if (p < config.alpha) ++rejected;
      }
      variant.rejection_rate =
          static_cast<double>(rejected) / static_cast<double>(variant.p_values.size());
    }
  }

  const auto t1 = std::chrono::steady_clock::now();
  result.seconds_total = std::chrono::duration<double>(t1 - t0).count();
  result.seconds_per_replicate = result.seconds_total / static_cast<double>(reps);
  return result;
}

}  // namespace simdiag
