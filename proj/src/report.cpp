#include "latmap/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "latmap/error.hpp"

namespace latmap::report {

using nlohmann::json;

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorCode::invalid_argument, "quantile of empty set");
  require(q >= 0.0 && q <= 1.0, ErrorCode::invalid_argument, "q must be in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const size_t lo = static_cast<size_t>(pos);
  const size_t hi = std::min(values.size() - 1, lo + 1);
  const double frac = pos - lo;
  return (1.0 - frac) * values[lo] + frac * values[hi];
}

SeriesBands aggregate_series(const std::vector<std::vector<double>>& per_seed) {
  require(!per_seed.empty(), ErrorCode::invalid_argument, "no series to aggregate");
  size_t max_len = 0;
  for (const auto& s : per_seed) max_len = std::max(max_len, s.size());
  SeriesBands bands;
  for (size_t t = 0; t < max_len; ++t) {
    std::vector<double> vals;
    for (const auto& s : per_seed)
      if (t < s.size()) vals.push_back(s[t]);
    bands.median.push_back(quantile(vals, 0.5));
    bands.q25.push_back(quantile(vals, 0.25));
    bands.q75.push_back(quantile(vals, 0.75));
    bands.q10.push_back(quantile(vals, 0.10));
    bands.q90.push_back(quantile(vals, 0.90));
  }
  return bands;
}

AggregateReport aggregate(const std::vector<std::vector<double>>& per_seed) {
  AggregateReport rep;
  rep.bands = aggregate_series(per_seed);
  for (const auto& s : per_seed)
    if (!s.empty()) rep.finals.push_back(s.back());
  rep.final_median = quantile(rep.finals, 0.5);
  return rep;
}

void save_report_json(const AggregateReport& rep, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["median"] = rep.bands.median;
  j["q25"] = rep.bands.q25;
  j["q75"] = rep.bands.q75;
  j["q10"] = rep.bands.q10;
  j["q90"] = rep.bands.q90;
  j["finals"] = rep.finals;
  j["final_median"] = rep.final_median;
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

void save_report_csv(const AggregateReport& rep, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), ErrorCode::io, "cannot open for writing: " + path);
  out << "step,median,q25,q75,q10,q90\n";
  char buf[220];
  for (size_t t = 0; t < rep.bands.median.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, rep.bands.median[t],
                  rep.bands.q25[t], rep.bands.q75[t], rep.bands.q10[t], rep.bands.q90[t]);
    out << buf;
  }
  require(out.good(), ErrorCode::io, "write failed: " + path);
}

}  // namespace latmap::report
