#include "camq/saliency.hpp"

#include <cstdlib>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "camq/image.hpp"

namespace camq::saliency {
namespace fs = std::filesystem;

SalientObjectMask load_mask(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("mask not found: " + path.string());
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw std::runtime_error("cannot decode mask '" + path.string() + "'");

  SalientObjectMask out;
  if (raw.channels() == 3 || raw.channels() == 4) {
    cv::Mat gray;
    cv::cvtColor(raw, gray, raw.channels() == 3 ? cv::COLOR_BGR2GRAY : cv::COLOR_BGRA2GRAY);
    raw = gray;
    out.converted = true;
  } else if (raw.channels() != 1) {
    throw std::runtime_error("unsupported mask channel count in '" + path.string() + "'");
  }
  double divisor = 0.0;
  if (raw.depth() == CV_8U)
    divisor = 255.0;
  else if (raw.depth() == CV_16U)
    divisor = 65535.0;
  else
    throw std::runtime_error("unsupported mask bit depth in '" + path.string() + "'");
  out.values = image::mat_to_grid(raw) / static_cast<float>(divisor);
  return out;
}

SalientObjectMask load_mask(const fs::path& path, int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0) throw std::invalid_argument("target dimensions must be positive");
  SalientObjectMask m = load_mask(path);
  if (m.values.rows() != target_h || m.values.cols() != target_w)
    m.values = resize_bilinear(m.values, target_h, target_w);
  return m;
}

void save_mask(const fs::path& path, const GridF& values) {
  cv::Mat m(static_cast<int>(values.rows()), static_cast<int>(values.cols()), CV_8UC1);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x)
      m.at<unsigned char>(y, x) = cv::saturate_cast<unsigned char>(values(y, x) * 255.0f);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw std::runtime_error("cannot write mask '" + path.string() + "'");
}

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

MaskGenerator::MaskGenerator(std::string command_template, fs::path cache_dir)
    : command_(std::move(command_template)), cache_dir_(std::move(cache_dir)) {}

fs::path MaskGenerator::cached_path(const std::string& image_id) const { return cache_dir_ / (image_id + ".png"); }

fs::path MaskGenerator::ensure(const fs::path& image, const std::string& image_id) const {
  if (!configured()) throw std::runtime_error("generator not configured");
  std::lock_guard lock(*mutex_);
  const fs::path target = cached_path(image_id);
  if (fs::exists(target)) return target;
  fs::create_directories(cache_dir_);
  const fs::path tmp = cache_dir_ / (image_id + ".partial.png");

  std::string cmd = command_;
  auto substitute = [&cmd](const std::string& key, const std::string& value) {
    for (std::size_t pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + value.size()))
      cmd.replace(pos, key.size(), value);
  };
  substitute("{input}", shell_quote(fs::absolute(image).string()));
  substitute("{output}", shell_quote(fs::absolute(tmp).string()));
  const int status = std::system(cmd.c_str());
  if (status != 0 || !fs::exists(tmp)) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw std::runtime_error("mask generator failed for '" + image.string() + "' (status " +
                             std::to_string(status) + ")");
  }
  // normalize whatever the tool wrote into the cache format
  save_mask(tmp, load_mask(tmp).values);
  fs::rename(tmp, target);
  return target;
}

SalientObjectMask generate_mask(const fs::path& image, const std::string& image_id, const MaskGenerator& generator) {
  return load_mask(generator.ensure(image, image_id));
}

}  // namespace camq::saliency
