#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "camq/harness/records.hpp"

namespace camq::harness {

enum class Metric { Sim, Cc, Kld };
inline constexpr Metric kMetrics[] = {Metric::Sim, Metric::Cc, Metric::Kld};

std::string_view to_string(Metric m);  // "SIM", "CC", "KLD"
Metric parse_metric(std::string_view text);

struct AggregateCell {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t n = 0;

  friend bool operator==(const AggregateCell&, const AggregateCell&) = default;
};

/// Mean and population std, accumulated in order. Throws on an empty input.
AggregateCell summarize(const std::vector<double>& values);

/// Comparison rows that apply to the given precisions, in report order:
/// "<p> v. GT" for every precision, then "<p> v. f32" for integer ones.
std::vector<std::string> table_rows(const std::vector<quant::Precision>& precisions);

struct AggregateTable {
  std::vector<std::string> models;  // column order
  std::vector<std::string> rows;    // row order
  std::map<std::tuple<std::string, std::string, Metric>, AggregateCell> cells;  // absent = missing

  std::optional<AggregateCell> cell(const std::string& model, const std::string& row, Metric metric) const;
  friend bool operator==(const AggregateTable&, const AggregateTable&) = default;
};

/// One cell per (model, row, metric). CC values of records whose CC is
/// missing are left out of CC cells; cells without values stay missing.
AggregateTable aggregate(const std::vector<RunRecord>& records, const std::vector<std::string>& models,
                         const std::vector<quant::Precision>& precisions);

}  // namespace camq::harness
