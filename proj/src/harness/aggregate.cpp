#include "camq/harness/aggregate.hpp"

#include <cmath>
#include <stdexcept>

namespace camq::harness {

using quant::Precision;

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Sim: return "SIM";
    case Metric::Cc: return "CC";
    case Metric::Kld: return "KLD";
  }
  return "?";
}

Metric parse_metric(std::string_view text) {
  for (Metric m : kMetrics)
    if (text == to_string(m)) return m;
  throw std::invalid_argument("unknown metric '" + std::string(text) + "'");
}

AggregateCell summarize(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("empty cell");
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n), values.size()};
}

std::vector<std::string> table_rows(const std::vector<Precision>& precisions) {
  auto has = [&](Precision p) {
    for (Precision q : precisions)
      if (q == p) return true;
    return false;
  };
  const Precision order[] = {Precision::F32, Precision::INT16, Precision::INT8};
  std::vector<std::string> rows;
  for (Precision p : order)
    if (has(p)) rows.push_back(row_label(p, Comparison::VsGt));
  for (Precision p : order)
    if (p != Precision::F32 && has(p)) rows.push_back(row_label(p, Comparison::VsF32));
  return rows;
}

std::optional<AggregateCell> AggregateTable::cell(const std::string& model, const std::string& row,
                                                  Metric metric) const {
  const auto it = cells.find({model, row, metric});
  if (it == cells.end()) return std::nullopt;
  return it->second;
}

AggregateTable aggregate(const std::vector<RunRecord>& records, const std::vector<std::string>& models,
                         const std::vector<Precision>& precisions) {
  AggregateTable table;
  table.models = models;
  table.rows = table_rows(precisions);

  std::map<std::tuple<std::string, std::string, Metric>, std::vector<double>> values;
  for (const RunRecord& r : records) {
    const std::string row = row_label(r.precision, r.comparison);
    values[{r.model, row, Metric::Sim}].push_back(r.metrics.sim);
    values[{r.model, row, Metric::Kld}].push_back(r.metrics.kld);
    if (r.metrics.cc) values[{r.model, row, Metric::Cc}].push_back(*r.metrics.cc);
  }
  for (const std::string& model : table.models)
    for (const std::string& row : table.rows)
      for (Metric m : kMetrics) {
        const auto it = values.find({model, row, m});
        if (it != values.end() && !it->second.empty()) table.cells[{model, row, m}] = summarize(it->second);
      }
  return table;
}

}  // namespace camq::harness
