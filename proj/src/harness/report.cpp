#include "camq/harness/report.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace camq::harness {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string format_cell(const std::optional<AggregateCell>& c) {
  return c ? fmt::format("{:.3f} ± {:.3f}", c->mean, c->std) : std::string("n/a");
}

}  // namespace

ReportFormats parse_formats(const std::string& list) {
  ReportFormats f{false, false, false};
  for (const std::string& item : split(list, ',')) {
    if (item == "csv")
      f.csv = true;
    else if (item == "md" || item == "markdown")
      f.markdown = true;
    else if (item == "json")
      f.json = true;
    else
      throw std::invalid_argument("unknown report format '" + item + "' (expected csv, md, json)");
  }
  return f;
}

std::string render_csv(const AggregateTable& table) {
  std::string out = "model,row,metric,mean,std,n\n";
  for (const std::string& model : table.models)
    for (const std::string& row : table.rows)
      for (Metric m : kMetrics) {
        const auto c = table.cell(model, row, m);
        if (c)
          out += fmt::format("{},{},{},{:.17g},{:.17g},{}\n", model, row, to_string(m), c->mean, c->std, c->n);
        else
          out += fmt::format("{},{},{},,,0\n", model, row, to_string(m));
      }
  return out;
}

AggregateTable parse_csv(const std::string& text) {
  AggregateTable table;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "model,row,metric,mean,std,n")
    throw std::invalid_argument("not a report CSV (bad header)");
  auto remember = [](std::vector<std::string>& v, const std::string& s) {
    for (const auto& x : v)
      if (x == s) return;
    v.push_back(s);
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 6) throw std::invalid_argument("bad report CSV line: " + line);
    remember(table.models, f[0]);
    remember(table.rows, f[1]);
    const Metric m = parse_metric(f[2]);
    if (f[3].empty()) continue;
    table.cells[{f[0], f[1], m}] = AggregateCell{std::stod(f[3]), std::stod(f[4]), std::stoul(f[5])};
  }
  return table;
}

std::string render_table_markdown(const AggregateTable& table) {
  std::string out = "| Comparison | Metric |";
  for (const auto& m : table.models) out += " " + m + " |";
  out += "\n|---|---|";
  for (std::size_t i = 0; i < table.models.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& row : table.rows)
    for (Metric metric : kMetrics) {
      out += fmt::format("| {} | {} |", row, to_string(metric));
      for (const auto& model : table.models) out += " " + format_cell(table.cell(model, row, metric)) + " |";
      out += "\n";
    }
  return out;
}

std::string render_markdown(const ReportInput& input, const AggregateTable& table) {
  const json& p = input.provenance;
  std::string out = "# CAM quantization audit\n\n";
  out += render_table_markdown(table);
  out += "\nCells are mean ± population standard deviation over images; per-cell counts are in report.csv.\n";
  if (p.contains("epsilon") && p.contains("kld_orientation"))
    out += fmt::format("KLD uses epsilon {} with {} orientation.\n", p["epsilon"].dump(),
                       p["kld_orientation"].get<std::string>());
  if (p.contains("precision_ranges")) {
    out += "Integer grids:";
    for (const auto& [name, range] : p["precision_ranges"].items())
      out += fmt::format(" {} [{}, {}]", name, range.at(0).get<long long>(), range.at(1).get<long long>());
    out += ".\n";
  }
  if (p.contains("class_policy"))
    out += "Each precision explains its own predicted class (" + p["class_policy"].get<std::string>() + ").\n";

  out += "\n## Failures\n\n";
  if (input.failures.empty()) {
    out += "None.\n";
  } else {
    std::map<std::string, std::size_t> per_model;
    for (const auto& f : input.failures) ++per_model[f.model];
    out += fmt::format("{} (model, image) pairs failed and were skipped; see failures.log.\n\n",
                       input.failures.size());
    for (const auto& model : input.models)
      if (per_model.count(model)) out += fmt::format("- {}: {}\n", model, per_model[model]);
  }

  out += "\n## Prediction divergence and degenerate maps\n\n";
  out += "| Model | Precision | Images | Argmax differs from f32 | Degenerate records | Zero-gradient CAMs |\n";
  out += "|---|---|---|---|---|---|\n";
  for (const auto& model : input.models)
    for (quant::Precision prec : input.precisions) {
      std::size_t images = 0, diverging = 0, degenerate = 0, zero = 0;
      for (const auto& r : input.records) {
        if (r.model != model || r.precision != prec) continue;
        if (r.degenerate()) ++degenerate;
        if (r.comparison != Comparison::VsGt) continue;
        ++images;
        if (r.prediction_diverges()) ++diverging;
        if (r.zero_gradient) ++zero;
      }
      out += fmt::format("| {} | {} | {} | {} | {} | {} |\n", model, quant::to_string(prec), images, diverging,
                         degenerate, zero);
    }
  return out;
}

std::string render_failures_log(const std::vector<Failure>& failures) {
  std::string out;
  for (const auto& f : failures) out += f.model + "\t" + f.image_id + "\t" + f.message + "\n";
  return out;
}

json report_to_json(const ReportInput& input) {
  json j;
  j["format"] = "camq-records-v1";
  j["provenance"] = input.provenance;
  j["models"] = input.models;
  json precisions = json::array();
  for (auto p : input.precisions) precisions.push_back(std::string(quant::to_string(p)));
  j["precisions"] = precisions;
  json records = json::array();
  for (const RunRecord& r : input.records) {
    records.push_back({
        {"model", r.model},
        {"precision", std::string(quant::to_string(r.precision))},
        {"image_id", r.image_id},
        {"comparison", std::string(to_string(r.comparison))},
        {"sim", r.metrics.sim},
        {"cc", r.metrics.cc ? json(*r.metrics.cc) : json(nullptr)},
        {"kld", r.metrics.kld},
        {"degenerate", r.metrics.degenerate},
        {"class_index", r.class_index},
        {"predicted_class", r.predicted_class},
        {"f32_predicted_class", r.f32_predicted_class},
        {"zero_gradient", r.zero_gradient},
    });
  }
  j["records"] = records;
  json failures = json::array();
  for (const Failure& f : input.failures)
    failures.push_back({{"model", f.model}, {"image_id", f.image_id}, {"message", f.message}});
  j["failures"] = failures;
  return j;
}

ReportInput report_from_json(const json& j) {
  if (j.value("format", std::string()) != "camq-records-v1")
    throw std::invalid_argument("not a records file (format tag missing)");
  ReportInput in;
  in.provenance = j.at("provenance");
  in.models = j.at("models").get<std::vector<std::string>>();
  for (const auto& p : j.at("precisions")) in.precisions.push_back(quant::parse_precision(p.get<std::string>()).name);
  for (const auto& r : j.at("records")) {
    RunRecord rec;
    rec.model = r.at("model").get<std::string>();
    rec.precision = quant::parse_precision(r.at("precision").get<std::string>()).name;
    rec.image_id = r.at("image_id").get<std::string>();
    rec.comparison = parse_comparison(r.at("comparison").get<std::string>());
    rec.metrics.sim = r.at("sim").get<double>();
    if (!r.at("cc").is_null()) rec.metrics.cc = r.at("cc").get<double>();
    rec.metrics.kld = r.at("kld").get<double>();
    rec.metrics.degenerate = r.at("degenerate").get<bool>();
    rec.class_index = r.at("class_index").get<int>();
    rec.predicted_class = r.at("predicted_class").get<int>();
    rec.f32_predicted_class = r.at("f32_predicted_class").get<int>();
    rec.zero_gradient = r.at("zero_gradient").get<bool>();
    in.records.push_back(std::move(rec));
  }
  for (const auto& f : j.at("failures"))
    in.failures.push_back({f.at("model").get<std::string>(), f.at("image_id").get<std::string>(),
                           f.at("message").get<std::string>()});
  return in;
}

void emit_report(const ReportInput& input, const fs::path& out_dir, const ReportFormats& formats) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec || !fs::is_directory(out_dir))
    throw std::runtime_error("cannot create output directory '" + out_dir.string() + "'");
  const AggregateTable table = aggregate(input.records, input.models, input.precisions);
  if (formats.csv) write_file(out_dir / "report.csv", render_csv(table));
  if (formats.markdown) write_file(out_dir / "report.md", render_markdown(input, table));
  if (formats.json) write_file(out_dir / "records.json", report_to_json(input).dump(1) + "\n");
  write_file(out_dir / "failures.log", render_failures_log(input.failures));
}

void rerender_report(const fs::path& records_json, const fs::path& out_dir, const ReportFormats& formats) {
  const json j = json::parse(read_file(records_json));
  ReportFormats f = formats;
  if (fs::exists(out_dir / "records.json") && fs::equivalent(records_json, out_dir / "records.json"))
    f.json = false;
  emit_report(report_from_json(j), out_dir, f);
}

}  // namespace camq::harness
