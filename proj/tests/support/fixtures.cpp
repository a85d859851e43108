#include "fixtures.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "camq/image.hpp"
#include "camq/saliency.hpp"

namespace camq::testing {

cv::Mat synthetic_image(std::uint64_t seed, int height, int width) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  cv::Mat img(height, width, CV_8UC3);
  const double gx = u(rng), gy = u(rng);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double t = gx * x / width + gy * y / height;
      img.at<cv::Vec3b>(y, x) = cv::Vec3b(cv::saturate_cast<uchar>(60 + 80 * t), cv::saturate_cast<uchar>(90 + 40 * t),
                                          cv::saturate_cast<uchar>(120 - 50 * t));
    }
  for (int k = 0; k < 4; ++k) {
    const cv::Point c(static_cast<int>(u(rng) * width), static_cast<int>(u(rng) * height));
    const int r = 8 + static_cast<int>(u(rng) * std::min(height, width) / 4);
    const cv::Scalar colour(u(rng) * 255, u(rng) * 255, u(rng) * 255);
    cv::circle(img, c, r, colour, cv::FILLED, cv::LINE_AA);
  }
  cv::GaussianBlur(img, img, cv::Size(5, 5), 1.5);
  return img;
}

GridF synthetic_mask(std::uint64_t seed, int height, int width) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(0.25, 0.75), s(0.15, 0.3);
  const double cy = u(rng) * height, cx = u(rng) * width, ry = s(rng) * height, rx = s(rng) * width;
  GridF m(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double d = std::pow((y - cy) / ry, 2) + std::pow((x - cx) / rx, 2);
      m(y, x) = static_cast<float>(1.0 / (1.0 + std::exp(4.0 * (d - 1.0))));
    }
  return m;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("camq_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed, int height, int width) {
  std::filesystem::create_directories(dir / "images");
  std::filesystem::create_directories(dir / "masks");
  for (int i = 0; i < count; ++i) {
    const int h = height + (i % 3) * 7, w = width - (i % 2) * 11;
    const std::string id = fmt::format("im{:03d}", i);
    cv::Mat bgr;
    cv::cvtColor(synthetic_image(seed + static_cast<std::uint64_t>(i), h, w), bgr, cv::COLOR_RGB2BGR);
    cv::imwrite((dir / "images" / (id + ".png")).string(), bgr);
    saliency::save_mask(dir / "masks" / (id + ".png"), synthetic_mask(seed + static_cast<std::uint64_t>(i), h, w));
  }
}

}  // namespace camq::testing
