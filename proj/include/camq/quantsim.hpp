#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

// Simulated ("fake") per-tensor affine quantization with dynamic min/max
// statistics. Everything here is a pure function of its arguments.
namespace camq::quant {

enum class Precision { F32, INT16, INT8 };

/// A precision level and its integer grid. F32 is the identity level and has
/// no grid (q_min == q_max == 0, never used).
struct PrecisionLevel {
  Precision name = Precision::F32;
  std::int64_t q_min = 0;
  std::int64_t q_max = 0;

  static constexpr PrecisionLevel f32() { return {Precision::F32, 0, 0}; }
  static constexpr PrecisionLevel int16() { return {Precision::INT16, 0, 65535}; }
  static constexpr PrecisionLevel int8() { return {Precision::INT8, 0, 255}; }

  bool is_identity() const { return name == Precision::F32; }
  friend bool operator==(const PrecisionLevel&, const PrecisionLevel&) = default;
};

std::string_view to_string(Precision p);
/// Accepts "f32", "int16", "int8" (case-insensitive). Throws std::invalid_argument.
PrecisionLevel parse_precision(std::string_view text);

struct TensorStats {
  double x_min = 0.0;
  double x_max = 0.0;
};

struct QuantParams {
  double scale = 1.0;
  double zero_point = 0.0;  // kept real, never rounded
  PrecisionLevel level;
};

/// Smallest admissible scale; constant tensors fall back to it.
inline constexpr double kMinScale = 1e-8;

using QuantizedGrid = Eigen::Array<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Derived>
TensorStats observe_minmax(const Eigen::DenseBase<Derived>& tensor) {
  if (tensor.size() == 0) throw std::invalid_argument("empty tensor");
  if (!tensor.derived().allFinite()) throw std::invalid_argument("non-finite input");
  return {static_cast<double>(tensor.minCoeff()), static_cast<double>(tensor.maxCoeff())};
}

QuantParams compute_qparams(const TensorStats& stats, const PrecisionLevel& level);

/// round(x / s + z), rounding half away from zero, clamped to the grid.
inline std::int64_t quantize_value(double x, const QuantParams& qp) {
  const double q = std::round(x / qp.scale + qp.zero_point);
  return static_cast<std::int64_t>(std::clamp(q, static_cast<double>(qp.level.q_min),
                                              static_cast<double>(qp.level.q_max)));
}

inline double dequantize_value(std::int64_t q, const QuantParams& qp) {
  return (static_cast<double>(q) - qp.zero_point) * qp.scale;
}

template <typename Derived>
QuantizedGrid quantize(const Eigen::DenseBase<Derived>& x, const QuantParams& qp) {
  if (qp.level.is_identity()) throw std::invalid_argument("F32 has no integer grid");
  QuantizedGrid q(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      q(r, c) = static_cast<std::int32_t>(quantize_value(static_cast<double>(x(r, c)), qp));
  return q;
}

template <typename Scalar = float, typename Derived>
Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> dequantize(
    const Eigen::DenseBase<Derived>& q, const QuantParams& qp) {
  Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> x(q.rows(), q.cols());
  for (Eigen::Index r = 0; r < q.rows(); ++r) {
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
      const auto v = static_cast<std::int64_t>(q(r, c));
      if (v < qp.level.q_min || v > qp.level.q_max)
        throw std::out_of_range("quantized value out of range");
      x(r, c) = static_cast<Scalar>(dequantize_value(v, qp));
    }
  }
  return x;
}

/// Quantize-then-dequantize in place with caller-supplied parameters.
template <typename Derived>
void fake_quant_inplace(Eigen::DenseBase<Derived>& x, const QuantParams& qp) {
  using Scalar = typename Derived::Scalar;
  x.derived() = x.derived().unaryExpr([&qp](Scalar v) {
    return static_cast<Scalar>(dequantize_value(quantize_value(static_cast<double>(v), qp), qp));
  });
}

/// Dynamic fake quantization: statistics come from x itself. The identity
/// level leaves x untouched.
template <typename Derived>
QuantParams fake_quant_inplace(Eigen::DenseBase<Derived>& x, const PrecisionLevel& level) {
  if (level.is_identity()) return QuantParams{1.0, 0.0, level};
  const QuantParams qp = compute_qparams(observe_minmax(x), level);
  fake_quant_inplace(x, qp);
  return qp;
}

template <typename Derived>
typename Derived::PlainObject fake_quant(const Eigen::DenseBase<Derived>& x,
                                         const PrecisionLevel& level) {
  typename Derived::PlainObject out = x.derived();
  if (level.is_identity()) return out;
  if (!out.allFinite()) throw std::invalid_argument("non-finite input");
  fake_quant_inplace(out, level);
  return out;
}

/// Straight-through backward rule: the round/clamp is treated as identity for
/// inputs inside the observed range and blocks gradient outside it.
template <typename GradDerived, typename InputDerived>
typename GradDerived::PlainObject fake_quant_backward(const Eigen::DenseBase<GradDerived>& grad,
                                                      const Eigen::DenseBase<InputDerived>& x,
                                                      const TensorStats& observed) {
  using Scalar = typename GradDerived::Scalar;
  typename GradDerived::PlainObject out = grad.derived();
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    for (Eigen::Index c = 0; c < out.cols(); ++c) {
      const double v = static_cast<double>(x(r, c));
      if (v < observed.x_min || v > observed.x_max) out(r, c) = Scalar(0);
    }
  }
  return out;
}

}  // namespace camq::quant
