#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "camq/grid.hpp"

// Heatmap files: raw little-endian float32 grid (row-major) plus a JSON
// sidecar with the same stem.
namespace camq {

struct HeatmapMeta {
  std::string model;
  std::string precision;
  std::string image_id;
  int class_index = -1;
  int height = 0;
  int width = 0;
  int predicted_class = -1;
  bool zero_gradient = false;

  friend bool operator==(const HeatmapMeta&, const HeatmapMeta&) = default;
};

struct StoredHeatmap {
  GridF values;
  HeatmapMeta meta;
};

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path);

/// Writes `<bin_path>` and its sidecar, each through a temporary file and a
/// rename, grid first. A reader that sees the sidecar sees a complete grid.
void write_heatmap(const std::filesystem::path& bin_path, const GridF& values, const HeatmapMeta& meta);

/// Empty when either file is missing. Throws on malformed or inconsistent files.
std::optional<StoredHeatmap> read_heatmap(const std::filesystem::path& bin_path);

}  // namespace camq
