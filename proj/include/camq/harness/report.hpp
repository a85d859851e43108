#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "camq/harness/aggregate.hpp"
#include "camq/harness/records.hpp"

namespace camq::harness {

/// Everything a report is rendered from. records.json stores exactly this.
struct ReportInput {
  std::vector<std::string> models;
  std::vector<quant::Precision> precisions;
  std::vector<RunRecord> records;
  std::vector<Failure> failures;
  nlohmann::json provenance = nlohmann::json::object();
};

struct ReportFormats {
  bool csv = true;
  bool markdown = true;
  bool json = true;
};

/// Parses a comma list of "csv", "md", "json".
ReportFormats parse_formats(const std::string& list);

/// One line per cell: model,row,metric,mean,std,n. Missing cells have empty
/// mean/std and n = 0.
std::string render_csv(const AggregateTable& table);
AggregateTable parse_csv(const std::string& text);

/// The comparison grid alone: rows x metrics down, models across.
std::string render_table_markdown(const AggregateTable& table);

/// Full Markdown report: grid, conventions, failure summary, prediction
/// divergence and degenerate-record counts.
std::string render_markdown(const ReportInput& input, const AggregateTable& table);

std::string render_failures_log(const std::vector<Failure>& failures);

nlohmann::json report_to_json(const ReportInput& input);
ReportInput report_from_json(const nlohmann::json& j);

/// Writes report.csv, report.md, records.json (per formats) and
/// failures.log into out_dir.
void emit_report(const ReportInput& input, const std::filesystem::path& out_dir, const ReportFormats& formats = {});

/// Re-renders every report file from a records.json.
void rerender_report(const std::filesystem::path& records_json, const std::filesystem::path& out_dir,
                     const ReportFormats& formats = {});

}  // namespace camq::harness
