#include "camq/image.hpp"

#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace camq::image {

CropGeometry crop_geometry(int height, int width, const Preprocessing& pp) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("empty image");
  if (pp.crop <= 0 || pp.resize < pp.crop) throw std::invalid_argument("resize must be at least the crop size");
  CropGeometry g;
  g.crop = pp.crop;
  if (height <= width) {
    g.resized_h = pp.resize;
    g.resized_w = static_cast<int>(static_cast<long long>(pp.resize) * width / height);
  } else {
    g.resized_w = pp.resize;
    g.resized_h = static_cast<int>(static_cast<long long>(pp.resize) * height / width);
  }
  // round half to even, as torchvision's centre crop does
  g.top = static_cast<int>(std::nearbyint((g.resized_h - pp.crop) / 2.0));
  g.left = static_cast<int>(std::nearbyint((g.resized_w - pp.crop) / 2.0));
  return g;
}

cv::Mat read_rgb(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot read image '" + path.string() + "'");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

cv::Mat resize_and_crop(const cv::Mat& rgb, const Preprocessing& pp) {
  const CropGeometry g = crop_geometry(rgb.rows, rgb.cols, pp);
  cv::Mat resized;
  const bool shrinking = g.resized_h < rgb.rows;
  cv::resize(rgb, resized, cv::Size(g.resized_w, g.resized_h), 0, 0,
             shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  return resized(cv::Rect(g.left, g.top, g.crop, g.crop)).clone();
}

nn::Tensor to_tensor(const cv::Mat& rgb_crop, const Preprocessing& pp) {
  if (rgb_crop.type() != CV_8UC3) throw std::invalid_argument("expected an 8-bit RGB image");
  nn::Tensor t(3, rgb_crop.rows, rgb_crop.cols);
  for (int y = 0; y < rgb_crop.rows; ++y) {
    const auto* row = rgb_crop.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb_crop.cols; ++x)
      for (int c = 0; c < 3; ++c)
        t.at(c, y, x) = (static_cast<float>(row[x][c]) / 255.0f - pp.mean[static_cast<std::size_t>(c)]) /
                        pp.std[static_cast<std::size_t>(c)];
  }
  return t;
}

GridF crop_map(const GridF& map, int image_h, int image_w, const Preprocessing& pp) {
  const CropGeometry g = crop_geometry(image_h, image_w, pp);
  const GridF resized = resize_bilinear(map, g.resized_h, g.resized_w);
  return resized.block(g.top, g.left, g.crop, g.crop);
}

cv::Mat grid_to_mat(const GridF& g) {
  cv::Mat m(static_cast<int>(g.rows()), static_cast<int>(g.cols()), CV_32FC1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) m.at<float>(y, x) = g(y, x);
  return m;
}

GridF mat_to_grid(const cv::Mat& m) {
  cv::Mat f;
  m.convertTo(f, CV_32F);
  GridF g(f.rows, f.cols);
  for (int y = 0; y < f.rows; ++y)
    for (int x = 0; x < f.cols; ++x) g(y, x) = f.at<float>(y, x);
  return g;
}

}  // namespace camq::image
