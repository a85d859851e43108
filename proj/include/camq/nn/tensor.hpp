#pragma once

#include <cassert>

#include <Eigen/Core>

namespace camq::nn {

using Matrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXf;

/// Single-image activation tensor of shape C x H x W, stored as a C x (H*W)
/// row-major matrix so every channel plane is one contiguous row.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, int height, int width)
      : height_(height), width_(width), data_(Matrix::Zero(channels, height * width)) {}
  Tensor(Matrix data, int height, int width)
      : height_(height), width_(width), data_(std::move(data)) {
    assert(data_.cols() == static_cast<Eigen::Index>(height) * width);
  }

  int channels() const { return static_cast<int>(data_.rows()); }
  int height() const { return height_; }
  int width() const { return width_; }
  int spatial() const { return height_ * width_; }
  Eigen::Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Matrix& data() { return data_; }
  const Matrix& data() const { return data_; }

  float& at(int c, int y, int x) { return data_(c, static_cast<Eigen::Index>(y) * width_ + x); }
  float at(int c, int y, int x) const {
    return data_(c, static_cast<Eigen::Index>(y) * width_ + x);
  }

  bool same_shape(const Tensor& other) const {
    return channels() == other.channels() && height_ == other.height_ && width_ == other.width_;
  }

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.channels(), t.height(), t.width()); }

 private:
  int height_ = 0;
  int width_ = 0;
  Matrix data_;
};

}  // namespace camq::nn
