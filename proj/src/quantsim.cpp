#include "camq/quantsim.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace camq::quant {

std::string_view to_string(Precision p) {
  switch (p) {
    case Precision::F32: return "f32";
    case Precision::INT16: return "int16";
    case Precision::INT8: return "int8";
  }
  return "?";
}

PrecisionLevel parse_precision(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "f32" || lower == "float32") return PrecisionLevel::f32();
  if (lower == "int16") return PrecisionLevel::int16();
  if (lower == "int8") return PrecisionLevel::int8();
  throw std::invalid_argument("unknown precision '" + std::string(text) + "'");
}

QuantParams compute_qparams(const TensorStats& stats, const PrecisionLevel& level) {
  if (level.is_identity()) throw std::invalid_argument("F32 has no integer grid");
  if (!(level.q_min < level.q_max)) throw std::invalid_argument("q_min must be below q_max");
  if (!std::isfinite(stats.x_min) || !std::isfinite(stats.x_max) || stats.x_min > stats.x_max)
    throw std::invalid_argument("invalid tensor statistics");

  QuantParams qp;
  qp.level = level;
  qp.scale = (stats.x_max - stats.x_min) / static_cast<double>(level.q_max - level.q_min);
  // A constant tensor (or a range so small the division underflows) gets the
  // floor scale; the zero point still maps x_min onto q_min so the constant
  // survives the round trip.
  if (!(qp.scale > 0.0)) qp.scale = kMinScale;
  qp.zero_point = static_cast<double>(level.q_min) - stats.x_min / qp.scale;
  return qp;
}

}  // namespace camq::quant
