#include "camq/harness/records.hpp"

#include <stdexcept>

namespace camq::harness {

std::string_view to_string(Comparison c) { return c == Comparison::VsGt ? "vs_gt" : "vs_f32"; }

Comparison parse_comparison(std::string_view text) {
  if (text == "vs_gt") return Comparison::VsGt;
  if (text == "vs_f32") return Comparison::VsF32;
  throw std::invalid_argument("unknown comparison '" + std::string(text) + "'");
}

std::string row_label(quant::Precision precision, Comparison comparison) {
  return std::string(quant::to_string(precision)) + (comparison == Comparison::VsGt ? " v. GT" : " v. f32");
}

}  // namespace camq::harness
