#pragma once

#include <string>
#include <vector>

namespace latmap::report {

struct SeriesBands {
  std::vector<double> median, q25, q75, q10, q90;
};

// Interpolated sample quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

// Per-step quantile bands over per-seed series; series may differ in length
// (bands are computed over whichever series reach each step).
SeriesBands aggregate_series(const std::vector<std::vector<double>>& per_seed);

struct AggregateReport {
  SeriesBands bands;
  std::vector<double> finals;  // per-seed final values
  double final_median = 0.0;
};

AggregateReport aggregate(const std::vector<std::vector<double>>& per_seed);

void save_report_json(const AggregateReport& rep, const std::string& path);
void save_report_csv(const AggregateReport& rep, const std::string& path);

}  // namespace latmap::report
