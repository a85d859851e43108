#pragma once

#include <array>
#include <filesystem>
#include <vector>

#include <opencv2/core.hpp>

#include "camq/grid.hpp"

namespace camq::harness {

/// Jet colormap, v in [0, 1] mapped dark blue -> red. RGB in [0, 1].
std::array<float, 3> jet(float v);

/// Alpha blend weighted by the heatmap value itself:
/// out = img * (1 - alpha * c) + alpha * c * jet(c), so zero heat leaves
/// the pixel untouched. rgb is 8-bit RGB of the heatmap's size.
cv::Mat overlay_heatmap(const cv::Mat& rgb, const GridF& cam, float alpha = 0.6f);

/// One composite row: image | mask | one overlay per CAM.
struct OverlayRow {
  cv::Mat rgb;
  GridF mask;
  std::vector<GridF> cams;
};

/// Stacks the rows into one (rows * H) x ((2 + #cams) * W) RGB image.
/// Throws "size mismatch" when maps and images disagree, "no CAMs given"
/// when a row has no CAM.
cv::Mat compose_overlays(const std::vector<OverlayRow>& rows, float alpha = 0.6f);

/// compose_overlays written as PNG.
void emit_overlays(const std::vector<OverlayRow>& rows, const std::filesystem::path& out_path, float alpha = 0.6f);

}  // namespace camq::harness
