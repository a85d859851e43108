#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "camq/grid.hpp"

// Salient-object ground truth: grayscale mask files, optionally produced on
// demand by an external segmentation command.
namespace camq::saliency {

struct SalientObjectMask {
  GridF values;             // in [0, 1], 1 = foreground
  bool converted = false;   // source had colour channels and was reduced by luminance
};

/// 8- or 16-bit mask at its native resolution. Throws "mask not found: <path>".
SalientObjectMask load_mask(const std::filesystem::path& path);

/// Mask bilinearly resized to target_h x target_w.
SalientObjectMask load_mask(const std::filesystem::path& path, int target_h, int target_w);

/// 8-bit grayscale PNG, values rounded to the nearest 1/255.
void save_mask(const std::filesystem::path& path, const GridF& values);

/// Runs an external command to segment an image. The command template gets
/// "{input}" and "{output}" replaced by shell-quoted paths and must write a
/// grayscale PNG to the output path. Results are cached as <cache_dir>/<id>.png.
/// Calls on one instance are serialized.
class MaskGenerator {
 public:
  MaskGenerator() = default;
  MaskGenerator(std::string command_template, std::filesystem::path cache_dir);

  bool configured() const { return !command_.empty(); }
  const std::string& command_template() const { return command_; }
  std::filesystem::path cached_path(const std::string& image_id) const;

  /// Path of the mask for this image, running the command on a cache miss.
  /// Throws "generator not configured" when no command was given.
  std::filesystem::path ensure(const std::filesystem::path& image, const std::string& image_id) const;

 private:
  std::string command_;
  std::filesystem::path cache_dir_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

SalientObjectMask generate_mask(const std::filesystem::path& image, const std::string& image_id,
                                const MaskGenerator& generator);

std::string shell_quote(const std::string& s);

}  // namespace camq::saliency
