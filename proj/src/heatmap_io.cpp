#include "camq/heatmap_io.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace camq {
namespace fs = std::filesystem;
namespace {

static_assert(sizeof(float) == 4);

void write_atomic(const fs::path& path, const char* data, std::size_t size) {
  static std::atomic<unsigned long> counter{0};
  std::ostringstream suffix;
  suffix << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id()) << "." << counter++;
  fs::path tmp = path;
  tmp += suffix.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename into '" + path.string() + "'");
  }
}

}  // namespace

fs::path sidecar_path(const fs::path& bin_path) {
  fs::path p = bin_path;
  p.replace_extension(".json");
  return p;
}

void write_heatmap(const fs::path& bin_path, const GridF& values, const HeatmapMeta& meta) {
  if (values.rows() != meta.height || values.cols() != meta.width)
    throw std::invalid_argument("heatmap size does not match its metadata");
  if (bin_path.has_parent_path()) fs::create_directories(bin_path.parent_path());
  write_atomic(bin_path, reinterpret_cast<const char*>(values.data()),
               static_cast<std::size_t>(values.size()) * sizeof(float));
  const nlohmann::json j = {
      {"model", meta.model},
      {"precision", meta.precision},
      {"image_id", meta.image_id},
      {"class_index", meta.class_index},
      {"height", meta.height},
      {"width", meta.width},
      {"predicted_class", meta.predicted_class},
      {"zero_gradient", meta.zero_gradient},
  };
  const std::string text = j.dump(2) + "\n";
  write_atomic(sidecar_path(bin_path), text.data(), text.size());
}

std::optional<StoredHeatmap> read_heatmap(const fs::path& bin_path) {
  const fs::path side = sidecar_path(bin_path);
  if (!fs::exists(side) || !fs::exists(bin_path)) return std::nullopt;
  std::ifstream js(side);
  const auto j = nlohmann::json::parse(js);
  StoredHeatmap out;
  out.meta.model = j.at("model").get<std::string>();
  out.meta.precision = j.at("precision").get<std::string>();
  out.meta.image_id = j.at("image_id").get<std::string>();
  out.meta.class_index = j.at("class_index").get<int>();
  out.meta.height = j.at("height").get<int>();
  out.meta.width = j.at("width").get<int>();
  out.meta.predicted_class = j.value("predicted_class", -1);
  out.meta.zero_gradient = j.value("zero_gradient", false);
  if (out.meta.height < 0 || out.meta.width < 0) throw std::runtime_error("bad heatmap dimensions");

  const auto expected = static_cast<std::uintmax_t>(out.meta.height) * out.meta.width * sizeof(float);
  if (fs::file_size(bin_path) != expected)
    throw std::runtime_error("heatmap '" + bin_path.string() + "' size does not match its sidecar");
  out.values.resize(out.meta.height, out.meta.width);
  std::ifstream in(bin_path, std::ios::binary);
  in.read(reinterpret_cast<char*>(out.values.data()), static_cast<std::streamsize>(expected));
  if (!in) throw std::runtime_error("failed reading '" + bin_path.string() + "'");
  return out;
}

}  // namespace camq
