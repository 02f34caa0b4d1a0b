#ifndef SIMDIAG_IO_HPP_
#define SIMDIAG_IO_HPP_

#include <string>
#include <vector>

#include <json.hpp>

#include "simdiag/apps.hpp"
#include "simdiag/simharness.hpp"

namespace simdiag {

// Matrix CSV: first line "d=<int>", then d comma-separated rows of d values.
// Covariance matrices use the same format with d equal to the squared
// dimension.  Readers throw std::runtime_error on malformed input.
Mat read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Mat& m);

// Plain numeric CSV, one observation per row; all rows must agree in width.
Mat read_series_csv(const std::string& path);

// Integer state labels separated by commas, whitespace, or newlines.
std::vector<int> read_chain(const std::string& path);

// Quantile discretization: thresholds are probabilities in (0,1), strictly
// increasing; a value below the j-th empirical quantile (linear
// interpolation) gets label j, anything above them all gets the last label.
std::vector<int> quantile_bins(const std::vector<double>& values,
                               const std::vector<double>& thresholds);

// Histogram CSV with the exact header bin_left,bin_right,count,fraction.
void write_histogram_csv(const std::string& path,
                         const std::vector<HistogramBin>& bins);

void write_text_file(const std::string& path, const std::string& content);

nlohmann::json matrix_to_json(const Mat& m);
nlohmann::json report_to_json(const TestReport& report);
nlohmann::json sim_result_to_json(const SimResult& result);
nlohmann::json var_analysis_to_json(const VarAnalysis& analysis);
nlohmann::json markov_analysis_to_json(const MarkovAnalysis& analysis);

}  // namespace simdiag

#endif  // SIMDIAG_IO_HPP_
