#include "simdiag/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace simdiag {

namespace {

std::vector<double> parse_row(const std::string& line, const std::string& path) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      std::size_t pos = 0;
      values.push_back(std::stod(cell, &pos));
      while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
      if (pos != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw std::runtime_error(path + ": malformed numeric cell '" + cell + "'");
    }
  }
  return values;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

nlohmann::json distribution_to_json(const RefDistribution& dist) {
  nlohmann::json j;
  switch (dist.kind) {
    case RefDistribution::Kind::ChiSquared:
      j["kind"] = "chi_squared";
      j["df"] = dist.df;
      break;
    case RefDistribution::Kind::Gamma:
      j["kind"] = "gamma";
      j["shape"] = dist.gamma.shape;
      j["rate"] = dist.gamma.rate;
      break;
    case RefDistribution::Kind::Degenerate:
      j["kind"] = "degenerate";
      break;
  }
  j["description"] = dist.describe();
  return j;
}

}  // namespace

Mat read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line) || line.rfind("d=", 0) != 0) {
    throw std::runtime_error(path + ": expected a 'd=<int>' header line");
  }
  int d = 0;
  try {
    d = std::stoi(line.substr(2));
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": malformed dimension header '" + line + "'");
  }
  if (d < 1) throw std::runtime_error(path + ": dimension must be positive");

  Mat m(d, d);
  for (int r = 0; r < d; ++r) {
    do {
      if (!std::getline(in, line)) throw std::runtime_error(path + ": too few rows");
    } while (blank(line));
    const std::vector<double> row = parse_row(line, path);
    if (static_cast<int>(row.size()) != d) {
      throw std::runtime_error(path + ": row " + std::to_string(r + 1) + " has " +
                               std::to_string(row.size()) + " values, expected " +
                               std::to_string(d));
    }
    for (int c = 0; c < d; ++c) m(r, c) = row[c];
  }
  return m;
}

void write_matrix_csv(const std::string& path, const Mat& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument("write_matrix_csv: square matrix required");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.precision(17);
  out << "d=" << m.rows() << "\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c) out << ",";
      out << m(r, c);
    }
    out << "\n";
  }
}

Mat read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    rows.push_back(parse_row(line, path));
    if (rows.back().size() != rows.front().size()) {
      throw std::runtime_error(path + ": ragged rows");
    }
  }
  if (rows.empty()) throw std::runtime_error(path + ": empty series");
  Mat series(static_cast<Eigen::Index>(rows.size()),
             static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      series(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return series;
}

std::vector<int> read_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  std::vector<int> labels;
  std::string token;
  // Commas count as separators alongside whitespace.
  while (in >> token) {
    std::stringstream ss(token);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      if (cell.empty()) continue;
      try {
        std::size_t pos = 0;
        labels.push_back(std::stoi(cell, &pos));
        if (pos != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw std::runtime_error(path + ": malformed label '" + cell + "'");
      }
    }
  }
  if (labels.empty()) throw std::runtime_error(path + ": empty chain");
  return labels;
}

std::vector<int> quantile_bins(const std::vector<double>& values,
                               const std::vector<double>& thresholds) {
  if (values.empty()) throw std::invalid_argument("quantile_bins: empty input");
  if (thresholds.empty()) throw std::invalid_argument("quantile_bins: no thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0 && thresholds[i] < 1.0)) {
      throw std::invalid_argument("quantile_bins: thresholds must lie in (0,1)");
    }
    if (i > 0 && thresholds[i] <= thresholds[i - 1]) {
      throw std::invalid_argument("quantile_bins: thresholds must increase");
    }
  }

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  std::vector<double> cuts;
  for (double t : thresholds) cuts.push_back(quantile(t));

  std::vector<int> labels;
  labels.reserve(values.size());
  for (double v : values) {
    int label = static_cast<int>(cuts.size()) + 1;
    for (std::size_t j = 0; j < cuts.size(); ++j) {
      if (v < cuts[j]) {
        label = static_cast<int>(j) + 1;
        break;
      }
    }
    labels.push_back(label);
  }
  return labels;
}

void write_histogram_csv(const std::string& path,
                         const std::vector<HistogramBin>& bins) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out.precision(17);
  out << "bin_left,bin_right,count,fraction\n";
  for (const HistogramBin& b : bins) {
    out << b.left << "," << b.right << "," << b.count << "," << b.fraction << "\n";
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << content;
}

nlohmann::json matrix_to_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json report_to_json(const TestReport& report) {
  nlohmann::json j;
  j["statistic"] = report.statistic;
  j["distribution"] = distribution_to_json(report.distribution);
  j["p_value"] = report.p_value;
  if (report.p_lower) j["p_lower"] = *report.p_lower;
  if (report.p_upper) j["p_upper"] = *report.p_upper;
  j["epsilon_used"] = report.epsilon_used;
  nlohmann::json ranks = nlohmann::json::object();
  for (const auto& [name, rank] : report.rank_diagnostics) ranks[name] = rank;
  j["rank_diagnostics"] = std::move(ranks);
  j["warnings"] = report.warnings;
  return j;
}

nlohmann::json sim_result_to_json(const SimResult& result) {
  nlohmann::json j;
  const char* design = result.config.design == SimDesign::TwoSample ? "two-sample"
                       : result.config.design == SimDesign::Multi   ? "multi"
                                                                    : "partial";
  j["config"] = {
      {"design", design},
      {"d", result.config.d},
      {"p", result.config.p},
      {"k", result.config.k},
      {"n", result.config.n},
      {"replicates", result.config.replicates},
      {"snr", std::isinf(result.config.snr) ? nlohmann::json("inf")
                                            : nlohmann::json(result.config.snr)},
      {"epsilon", result.config.epsilon},
      {"seed", result.config.seed},
      {"alpha", result.config.alpha},
  };
  j["failed_replicates"] = result.failed_replicates;
  j["failure_messages"] = result.failure_messages;
  j["seconds_total"] = result.seconds_total;
  j["seconds_per_replicate"] = result.seconds_per_replicate;
  nlohmann::json variants = nlohmann::json::array();
  for (const VariantResult& v : result.variants) {
    nlohmann::json jv;
    jv["name"] = v.name;
    jv["rejection_rate"] = v.rejection_rate;
    jv["p_values"] = v.p_values;
    nlohmann::json hist = nlohmann::json::array();
    for (const HistogramBin& b : v.histogram) {
      hist.push_back({{"bin_left", b.left},
                      {"bin_right", b.right},
                      {"count", b.count},
                      {"fraction", b.fraction}});
    }
    jv["histogram"] = std::move(hist);
    variants.push_back(std::move(jv));
  }
  j["variants"] = std::move(variants);
  return j;
}

nlohmann::json var_analysis_to_json(const VarAnalysis& analysis) {
  nlohmann::json j;
  j["alpha"] = analysis.alpha;
  nlohmann::json subjects = nlohmann::json::array();
  for (const VarFit& fit : analysis.fits) {
    nlohmann::json js;
    js["t_effective"] = fit.t_effective;
    js["intercept"] = std::vector<double>(fit.intercept.data(),
                                          fit.intercept.data() + fit.intercept.size());
    nlohmann::json phis = nlohmann::json::array();
    for (const Mat& phi : fit.phi) phis.push_back(matrix_to_json(phi));
    js["phi"] = std::move(phis);
    js["sigma_e"] = matrix_to_json(fit.sigma_e);
    subjects.push_back(std::move(js));
  }
  j["subjects"] = std::move(subjects);
  j["pairwise_pvalues"] = matrix_to_json(analysis.pairwise_pvalues);
  j["multi_gamma"] = report_to_json(analysis.multi_gamma);
  nlohmann::json partial = nlohmann::json::array();
  for (const PartialReportPair& pair : analysis.partial) {
    partial.push_back({{"k", pair.k},
                       {"chi2", report_to_json(pair.chi2)},
                       {"gamma", report_to_json(pair.gamma)}});
  }
  j["partial"] = std::move(partial);
  j["v_hat"] = matrix_to_json(analysis.v_hat);
  j["decoupled_emitted"] = analysis.decoupled_emitted;
  return j;
}

nlohmann::json markov_analysis_to_json(const MarkovAnalysis& analysis) {
  nlohmann::json j;
  nlohmann::json chains = nlohmann::json::array();
  for (const MarkovFit& fit : analysis.fits) {
    nlohmann::json jc;
    jc["p_hat"] = matrix_to_json(fit.p_hat);
    jc["pi_hat"] = std::vector<double>(fit.pi_hat.data(),
                                       fit.pi_hat.data() + fit.pi_hat.size());
    jc["transitions"] = fit.estimate.n;
    chains.push_back(std::move(jc));
  }
  j["chains"] = std::move(chains);
  j["pi_common"] = std::vector<double>(analysis.pi_common.data(),
                                       analysis.pi_common.data() + analysis.pi_common.size());
  j["qp_objective"] = analysis.qp_objective;
  j["qp_converged"] = analysis.qp_converged;
  j["partial_chi2"] = report_to_json(analysis.partial_chi2);
  j["partial_gamma"] = report_to_json(analysis.partial_gamma);
  return j;
}

}  // namespace simdiag
