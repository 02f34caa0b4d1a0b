#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simdiag/apps.hpp"
#include "simdiag/io.hpp"
#include "simdiag/optim.hpp"
#include "simdiag/simharness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "1.0.0";
constexpr int kExitOk = 0;
constexpr int kExitNumeric = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double parse_snr(const std::string& text) {
  if (text == "inf" || text == "infinity") return std::numeric_limits<double>::infinity();
  try {
    const double snr = std::stod(text);
    if (!(snr > 0.0)) throw std::invalid_argument(text);
    return snr;
  } catch (const std::exception&) {
    throw UsageError("--snr must be a positive number or 'inf', got '" + text + "'");
  }
}

double parse_epsilon(const std::string& text) {
  if (text == "auto") return simdiag::kAutoEpsilon;
  try {
    const double eps = std::stod(text);
    if (!(eps >= 0.0)) throw std::invalid_argument(text);
    return eps;
  } catch (const std::exception&) {
    throw UsageError("--epsilon must be a nonnegative number or 'auto', got '" + text + "'");
  }
}

// FNV-1a over the raw bytes of every input file, in argument order.
std::string input_digest(const std::vector<std::string>& paths) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const std::string& path : paths) {
    std::ifstream in(path, std::ios::binary);
    char byte;
    while (in.get(byte)) {
      hash ^= static_cast<unsigned char>(byte);
      hash *= 1099511628211ULL;
    }
  }
  std::ostringstream out;
  out << std::hex << hash;
  return out.str();
}

void emit(const json& doc, const std::string& out_path) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    simdiag::write_text_file(out_path, text);
  }
}

json report_document(const json& config, const std::vector<std::string>& inputs) {
  json doc;
  doc["tool"] = "simdiag";
  doc["version"] = kVersion;
  doc["input_digest"] = input_digest(inputs);
  doc["config"] = config;
  return doc;
}

int cmd_simulate(const std::string& design, int d, int p, int k, long n, int replicates,
                 const std::string& snr_text, const std::string& eps_text,
                 std::uint64_t seed, double alpha, const std::string& out_dir) {
  simdiag::SimConfig config;
  if (design == "two-sample") {
    config.design = simdiag::SimDesign::TwoSample;
    config.p = 2;
  } else if (design == "multi") {
    config.design = simdiag::SimDesign::Multi;
    config.p = p;
  } else if (design == "partial") {
    config.design = simdiag::SimDesign::Partial;
    config.p = p;
    if (k < 1) throw UsageError("--design partial requires --k");
    config.k = k;
  } else {
    throw UsageError("--design must be one of two-sample, multi, partial");
  }
  config.d = d;
  config.n = n;
  config.replicates = replicates;
  config.snr = parse_snr(snr_text);
  config.epsilon = parse_epsilon(eps_text);
  config.seed = seed;
  config.alpha = alpha;
  try {
    config.validate();
  } catch (const std::invalid_argument& ex) {
    throw UsageError(ex.what());
  }

  const simdiag::SimResult result = simdiag::run_replicates(config);

  fs::create_directories(out_dir);
  emit(simdiag::sim_result_to_json(result), (fs::path(out_dir) / "result.json").string());
  for (const simdiag::VariantResult& variant : result.variants) {
    simdiag::write_histogram_csv(
        (fs::path(out_dir) / ("histogram_" + variant.name + ".csv")).string(),
        variant.histogram);
  }
  return kExitOk;
}

std::vector<simdiag::MatrixEstimate> load_estimates(const std::vector<std::string>& inputs,
                                                    const std::vector<std::string>& covs,
                                                    const std::vector<long>& nobs,
                                                    const std::vector<std::string>& sample_dirs) {
  std::vector<simdiag::MatrixEstimate> estimates;
  if (!sample_dirs.empty()) {
    if (!inputs.empty() || !covs.empty()) {
      throw UsageError("give either --samples directories or --input/--cov files, not both");
    }
    for (const std::string& dir : sample_dirs) {
      std::vector<fs::path> files;
      for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file()) files.push_back(entry.path());
      }
      std::sort(files.begin(), files.end());
      std::vector<simdiag::Mat> samples;
      for (const fs::path& file : files) samples.push_back(simdiag::read_matrix_csv(file.string()));
      if (samples.size() < 2) throw UsageError(dir + ": need at least 2 sample files");
      estimates.push_back(simdiag::mean_estimator(samples));
    }
    return estimates;
  }

  if (inputs.empty()) throw UsageError("--input (or --samples) is required");
  if (covs.size() != inputs.size()) {
    throw UsageError("--cov must be given once per --input");
  }
  if (nobs.size() != inputs.size()) {
    throw UsageError("--nobs must be given once per --input");
  }
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    simdiag::MatrixEstimate est;
    est.a = simdiag::read_matrix_csv(inputs[i]);
    est.sigma_hat = simdiag::read_matrix_csv(covs[i]);
    const Eigen::Index d2 = est.a.rows() * est.a.rows();
    if (est.sigma_hat.rows() != d2) {
      throw UsageError(covs[i] + ": covariance must be d^2 x d^2 for the paired estimate");
    }
    if (nobs[i] < 1) throw UsageError("--nobs entries must be positive");
    est.n = nobs[i];
    est.c_n = std::sqrt(static_cast<double>(nobs[i]));
    estimates.push_back(std::move(est));
  }
  return estimates;
}

int cmd_test(const std::string& method, const std::vector<std::string>& inputs,
             const std::vector<std::string>& covs, const std::vector<long>& nobs,
             const std::vector<std::string>& sample_dirs,
             const std::vector<std::string>& references, int k,
             const std::string& v_path, const std::string& eps_text, double alpha,
             const std::string& out_path) {
  const double epsilon = parse_epsilon(eps_text);
  const std::vector<simdiag::MatrixEstimate> estimates =
      load_estimates(inputs, covs, nobs, sample_dirs);

  std::vector<std::string> digest_inputs = inputs;
  digest_inputs.insert(digest_inputs.end(), covs.begin(), covs.end());
  digest_inputs.insert(digest_inputs.end(), references.begin(), references.end());

  json config;
  config["method"] = method;
  config["epsilon"] = eps_text;
  config["alpha"] = alpha;
  config["k"] = k;
  json doc = report_document(config, digest_inputs);

  simdiag::EstimateBundle bundle;
  bundle.estimates = estimates;

  if (method == "commutator") {
    if (estimates.size() != 2) throw UsageError("--method commutator needs exactly 2 estimates");
    doc["report"] = simdiag::report_to_json(
        simdiag::commutator_test(estimates[0], estimates[1], epsilon));
  } else if (method == "llr") {
    if (estimates.size() != 2) throw UsageError("--method llr needs exactly 2 estimates");
    if (references.size() != 2) {
      throw UsageError("--method llr requires two --reference matrices");
    }
    const simdiag::Mat r1 = simdiag::read_matrix_csv(references[0]);
    const simdiag::Mat r2 = simdiag::read_matrix_csv(references[1]);
    doc["report"] = simdiag::report_to_json(
        simdiag::llr_test(estimates[0], estimates[1], r1, r2, epsilon));
  } else if (method == "multi") {
    simdiag::Mat v;
    if (!v_path.empty()) {
      v = simdiag::read_matrix_csv(v_path);
    } else {
      std::vector<simdiag::Mat> a_hats;
      for (const auto& est : estimates) a_hats.push_back(est.a);
      v = simdiag::joint_diagonalize(a_hats).v_hat;
    }
    doc["report"] = simdiag::report_to_json(simdiag::multi_eig_test(bundle, v, epsilon));
    doc["report_gamma"] = simdiag::report_to_json(simdiag::multi_eig_gamma_test(bundle, v));
    doc["v"] = simdiag::matrix_to_json(v);
  } else if (method == "partial") {
    if (k < 1) throw UsageError("--method partial requires --k");
    std::vector<simdiag::Mat> a_hats;
    for (const auto& est : estimates) a_hats.push_back(est.a);
    const simdiag::PartialPairResult pp = simdiag::partial_pair(a_hats, k);
    doc["report"] = simdiag::report_to_json(simdiag::partial_test(
        bundle, pp.q_hat, k, pp.v_tilde, epsilon, simdiag::PartialVariant::ChiSquared));
    doc["report_gamma"] = simdiag::report_to_json(simdiag::partial_test(
        bundle, pp.q_hat, k, pp.v_tilde, epsilon, simdiag::PartialVariant::Gamma));
    doc["q_hat"] = simdiag::matrix_to_json(pp.q_hat);
  } else if (method == "pairwise") {
    doc["pairwise_pvalues"] =
        simdiag::matrix_to_json(simdiag::pairwise_pvalue_matrix(bundle, epsilon));
  } else {
    throw UsageError("--method must be one of commutator, llr, multi, partial, pairwise");
  }

  emit(doc, out_path);
  return kExitOk;
}

int cmd_var(const std::vector<std::string>& series_paths, int order,
            const std::string& eps_text, double alpha, const std::string& out_path) {
  const double epsilon = parse_epsilon(eps_text);
  std::vector<simdiag::Mat> series;
  for (const std::string& path : series_paths) {
    series.push_back(simdiag::read_series_csv(path));
  }
  const simdiag::VarAnalysis analysis = simdiag::var_pipeline(series, order, epsilon, alpha);

  json doc = report_document({{"order", order}, {"epsilon", eps_text}, {"alpha", alpha}},
                             series_paths);
  doc["analysis"] = simdiag::var_analysis_to_json(analysis);
  emit(doc, out_path);
  return kExitOk;
}

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> thresholds;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      thresholds.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw UsageError("--bins: malformed threshold '" + cell + "'");
    }
  }
  if (thresholds.empty()) throw UsageError("--bins: no thresholds given");
  return thresholds;
}

int cmd_markov(const std::vector<std::string>& chain_paths, int d,
               const std::string& bins_text, const std::string& eps_text,
               const std::string& out_path) {
  const double epsilon = parse_epsilon(eps_text);

  std::vector<std::vector<int>> chains;
  if (!bins_text.empty()) {
    // Quantile discretization of numeric series into state labels.
    const std::vector<double> thresholds = parse_thresholds(bins_text);
    for (const std::string& path : chain_paths) {
      const simdiag::Mat series = simdiag::read_series_csv(path);
      if (series.cols() != 1) {
        throw UsageError(path + ": --bins expects a single-column numeric series");
      }
      const std::vector<double> values(series.data(), series.data() + series.rows());
      chains.push_back(simdiag::quantile_bins(values, thresholds));
    }
    if (d <= 0) d = static_cast<int>(parse_thresholds(bins_text).size()) + 1;
  } else {
    if (d <= 0) throw UsageError("--d is required when chains are pre-labeled");
    for (const std::string& path : chain_paths) {
      chains.push_back(simdiag::read_chain(path));
    }
  }

  const simdiag::MarkovAnalysis analysis = simdiag::markov_pipeline(chains, d, epsilon);
  json doc = report_document({{"d", d}, {"epsilon", eps_text}, {"bins", bins_text}},
                             chain_paths);
  doc["analysis"] = simdiag::markov_analysis_to_json(analysis);
  emit(doc, out_path);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hypothesis tests for simultaneous diagonalizability of matrix estimates"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("simdiag ") + kVersion);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo simulation design");
  std::string design, snr_text = "inf", sim_eps = "auto", out_dir = ".";
  int d = 5, p = 8, k = 0, replicates = 500;
  long n = 250;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  sim->add_option("--design", design, "two-sample, multi, or partial")->required();
  sim->add_option("--d", d, "matrix dimension");
  sim->add_option("--p", p, "pool size (multi/partial)");
  sim->add_option("--k", k, "shared eigenvector count (partial)");
  sim->add_option("--n", n, "samples per estimate");
  sim->add_option("--snr", snr_text, "signal-to-noise ratio, number or 'inf'");
  sim->add_option("--replicates", replicates, "replicate count");
  sim->add_option("--seed", seed, "RNG seed");
  sim->add_option("--epsilon", sim_eps, "truncation level, number or 'auto'");
  sim->add_option("--alpha", alpha, "significance level");
  sim->add_option("--out", out_dir, "output directory");

  // test
  auto* test = app.add_subcommand("test", "Run a test on matrix estimates from files");
  std::string method, test_eps = "auto", v_path, test_out;
  std::vector<std::string> inputs, covs, sample_dirs, references;
  std::vector<long> nobs;
  int test_k = 0;
  double test_alpha = 0.05;
  test->add_option("--method", method, "commutator, llr, multi, partial, or pairwise")
      ->required();
  test->add_option("--input", inputs, "estimate matrix CSV (repeatable)");
  test->add_option("--cov", covs, "covariance CSV per input (d^2 x d^2)");
  test->add_option("--nobs", nobs, "sample size per input");
  test->add_option("--samples", sample_dirs, "directory of sample matrix CSVs (repeatable)");
  test->add_option("--reference", references, "reference matrix CSV (llr, exactly 2)");
  test->add_option("--k", test_k, "shared eigenvector count (partial)");
  test->add_option("--v", v_path, "eigenvector matrix CSV (multi; default optimized)");
  test->add_option("--epsilon", test_eps, "truncation level, number or 'auto'");
  test->add_option("--alpha", test_alpha, "significance level (echoed in the report)");
  test->add_option("--out", test_out, "report JSON path (default stdout)");

  // var
  auto* var = app.add_subcommand("var", "VAR joint-diagonalizability analysis");
  std::vector<std::string> series_paths;
  int order = 1;
  std::string var_eps = "auto", var_out;
  double var_alpha = 0.05;
  var->add_option("--series", series_paths, "per-subject series CSV (repeatable)")
      ->required();
  var->add_option("--order", order, "VAR order");
  var->add_option("--epsilon", var_eps, "truncation level, number or 'auto'");
  var->add_option("--alpha", var_alpha, "significance level for decoupling");
  var->add_option("--out", var_out, "analysis JSON path (default stdout)");

  // markov
  auto* markov = app.add_subcommand("markov", "Common stationary distribution analysis");
  std::vector<std::string> chain_paths;
  int markov_d = 0;
  std::string bins_text, markov_eps = "auto", markov_out;
  markov->add_option("--chain", chain_paths, "chain file, labels 1..d (repeatable)")
      ->required();
  markov->add_option("--d", markov_d, "state count");
  markov->add_option("--bins", bins_text,
                     "quantile thresholds (e.g. 0.25,0.75) to discretize numeric series");
  markov->add_option("--epsilon", markov_eps, "truncation level, number or 'auto'");
  markov->add_option("--out", markov_out, "analysis JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    if (ex.get_exit_code() == 0) return app.exit(ex);  // --help / --version
    app.exit(ex);
    return kExitUsage;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(design, d, p, k, n, replicates, snr_text, sim_eps, seed, alpha,
                          out_dir);
    }
    if (test->parsed()) {
      return cmd_test(method, inputs, covs, nobs, sample_dirs, references, test_k, v_path,
                      test_eps, test_alpha, test_out);
    }
    if (var->parsed()) {
      return cmd_var(series_paths, order, var_eps, var_alpha, var_out);
    }
    if (markov->parsed()) {
      return cmd_markov(chain_paths, markov_d, bins_text, markov_eps, markov_out);
    }
  } catch (const UsageError& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitNumeric;
  }
  return kExitUsage;
}
