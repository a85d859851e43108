#include "camq/harness/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace camq::harness {

std::array<float, 3> jet(float v) {
  v = std::clamp(v, 0.0f, 1.0f);
  auto ramp = [v](float centre) { return std::clamp(1.5f - std::abs(4.0f * v - centre), 0.0f, 1.0f); };
  return {ramp(3.0f), ramp(2.0f), ramp(1.0f)};
}

cv::Mat overlay_heatmap(const cv::Mat& rgb, const GridF& cam, float alpha) {
  if (rgb.type() != CV_8UC3) throw std::invalid_argument("expected an 8-bit RGB image");
  if (cam.rows() != rgb.rows || cam.cols() != rgb.cols) throw std::invalid_argument("size mismatch");
  cv::Mat out(rgb.size(), CV_8UC3);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* src = rgb.ptr<cv::Vec3b>(y);
    auto* dst = out.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.cols; ++x) {
      const float c = std::clamp(cam(y, x), 0.0f, 1.0f);
      const float w = alpha * c;
      const auto colour = jet(c);
      for (int k = 0; k < 3; ++k)
        dst[x][k] = cv::saturate_cast<unsigned char>(src[x][k] * (1.0f - w) + 255.0f * w * colour[static_cast<std::size_t>(k)]);
    }
  }
  return out;
}

cv::Mat compose_overlays(const std::vector<OverlayRow>& rows, float alpha) {
  if (rows.empty()) throw std::invalid_argument("no overlay rows given");
  const int h = rows.front().rgb.rows;
  const int w = rows.front().rgb.cols;
  const std::size_t panels = 2 + rows.front().cams.size();
  std::vector<cv::Mat> stacked;
  for (const OverlayRow& row : rows) {
    if (row.cams.empty()) throw std::invalid_argument("no CAMs given");
    if (row.rgb.rows != h || row.rgb.cols != w || row.cams.size() + 2 != panels ||
        row.mask.rows() != h || row.mask.cols() != w)
      throw std::invalid_argument("size mismatch");
    std::vector<cv::Mat> tiles{row.rgb};
    cv::Mat mask8(h, w, CV_8UC1);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        mask8.at<unsigned char>(y, x) = cv::saturate_cast<unsigned char>(std::clamp(row.mask(y, x), 0.0f, 1.0f) * 255.0f);
    cv::Mat mask_rgb;
    cv::cvtColor(mask8, mask_rgb, cv::COLOR_GRAY2RGB);
    tiles.push_back(mask_rgb);
    for (const GridF& cam : row.cams) tiles.push_back(overlay_heatmap(row.rgb, cam, alpha));
    cv::Mat line;
    cv::hconcat(tiles, line);
    stacked.push_back(line);
  }
  cv::Mat out;
  cv::vconcat(stacked, out);
  return out;
}

void emit_overlays(const std::vector<OverlayRow>& rows, const std::filesystem::path& out_path, float alpha) {
  const cv::Mat rgb = compose_overlays(rows, alpha);
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  if (!cv::imwrite(out_path.string(), bgr)) throw std::runtime_error("cannot write '" + out_path.string() + "'");
}

}  // namespace camq::harness
