#pragma once

#include <filesystem>

#include <opencv2/core.hpp>

#include "camq/grid.hpp"
#include "camq/model_spec.hpp"
#include "camq/nn/tensor.hpp"

namespace camq::image {

/// Where the model input sits inside the source image: the source is resized
/// to resized_h x resized_w and a crop x crop window is taken at (top, left).
struct CropGeometry {
  int resized_h = 0;
  int resized_w = 0;
  int top = 0;
  int left = 0;
  int crop = 0;
};

CropGeometry crop_geometry(int height, int width, const Preprocessing& pp);

/// 8-bit RGB image. Throws "cannot read image '<path>'".
cv::Mat read_rgb(const std::filesystem::path& path);

/// Resized and centre-cropped 8-bit RGB image, crop x crop pixels.
cv::Mat resize_and_crop(const cv::Mat& rgb, const Preprocessing& pp);

/// Normalized CHW tensor from an 8-bit RGB crop.
nn::Tensor to_tensor(const cv::Mat& rgb_crop, const Preprocessing& pp);

/// Same geometry applied to a single-channel map in [0, 1].
GridF crop_map(const GridF& map, int image_h, int image_w, const Preprocessing& pp);

cv::Mat grid_to_mat(const GridF& g);
GridF mat_to_grid(const cv::Mat& m);

}  // namespace camq::image
