#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <opencv2/core.hpp>

#include "camq/grid.hpp"

namespace camq::testing {

/// Smooth synthetic RGB picture: a few coloured blobs over a gradient.
cv::Mat synthetic_image(std::uint64_t seed, int height, int width);

/// Soft elliptical foreground mask in [0, 1].
GridF synthetic_mask(std::uint64_t seed, int height, int width);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

/// Writes <count> images (im000.png ...) to dir/images and matching masks to
/// dir/masks. Image sizes vary around height x width.
void write_dataset(const std::filesystem::path& dir, int count, std::uint64_t seed, int height = 180,
                   int width = 240);

}  // namespace camq::testing
