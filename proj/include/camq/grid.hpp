#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Core>

namespace camq {

/// Row-major 2D grid. Rows index image height, columns index width.
template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GridF = Grid<float>;
using GridD = Grid<double>;

/// Min-max rescale to [0, 1]. A constant (or empty) grid maps to all zeros.
template <typename Derived>
Grid<typename Derived::Scalar> normalize_minmax(const Eigen::ArrayBase<Derived>& raw) {
  using Scalar = typename Derived::Scalar;
  Grid<Scalar> out = Grid<Scalar>::Zero(raw.rows(), raw.cols());
  if (raw.size() == 0) return out;
  const Scalar lo = raw.minCoeff();
  const Scalar hi = raw.maxCoeff();
  if (!(hi > lo)) return out;
  out = (raw - lo) / (hi - lo);
  return out;
}

/// Bilinear resampling with half-pixel centres and edge clamping (the
/// convention of cv::resize INTER_LINEAR and torch interpolate with
/// align_corners=false). Output values are convex combinations of inputs,
/// so the value range never grows.
template <typename Derived>
Grid<typename Derived::Scalar> resize_bilinear(const Eigen::ArrayBase<Derived>& src,
                                               Eigen::Index out_h, Eigen::Index out_w) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index in_h = src.rows();
  const Eigen::Index in_w = src.cols();
  Grid<Scalar> out(out_h, out_w);
  if (out_h == 0 || out_w == 0) return out;

  auto source_coord = [](Eigen::Index dst, Eigen::Index in, Eigen::Index outn, Eigen::Index& i0,
                         Eigen::Index& i1, double& frac) {
    const double scale = static_cast<double>(in) / static_cast<double>(outn);
    double s = (static_cast<double>(dst) + 0.5) * scale - 0.5;
    s = std::max(s, 0.0);
    i0 = std::min(static_cast<Eigen::Index>(std::floor(s)), in - 1);
    i1 = std::min(i0 + 1, in - 1);
    frac = (i0 == in - 1) ? 0.0 : s - static_cast<double>(i0);
  };

  for (Eigen::Index y = 0; y < out_h; ++y) {
    Eigen::Index y0, y1;
    double wy;
    source_coord(y, in_h, out_h, y0, y1, wy);
    for (Eigen::Index x = 0; x < out_w; ++x) {
      Eigen::Index x0, x1;
      double wx;
      source_coord(x, in_w, out_w, x0, x1, wx);
      const double top = (1.0 - wx) * static_cast<double>(src(y0, x0)) +
                         wx * static_cast<double>(src(y0, x1));
      const double bottom = (1.0 - wx) * static_cast<double>(src(y1, x0)) +
                            wx * static_cast<double>(src(y1, x1));
      out(y, x) = static_cast<Scalar>((1.0 - wy) * top + wy * bottom);
    }
  }
  return out;
}

}  // namespace camq
