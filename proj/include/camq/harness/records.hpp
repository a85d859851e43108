#pragma once

#include <string>
#include <string_view>

#include "camq/metrics.hpp"
#include "camq/quantsim.hpp"

namespace camq::harness {

enum class Comparison { VsGt, VsF32 };

std::string_view to_string(Comparison c);
Comparison parse_comparison(std::string_view text);

/// Report row label such as "int8 v. GT" or "int16 v. f32".
std::string row_label(quant::Precision precision, Comparison comparison);

/// One metric triple for (model, precision, image, comparison target).
struct RunRecord {
  std::string model;
  quant::Precision precision = quant::Precision::F32;
  std::string image_id;
  Comparison comparison = Comparison::VsGt;
  metrics::MetricTriple metrics;
  int class_index = -1;         // class the CAM explains
  int predicted_class = -1;     // argmax at this precision
  int f32_predicted_class = -1;
  bool zero_gradient = false;

  bool degenerate() const { return metrics.degenerate; }
  bool prediction_diverges() const { return predicted_class != f32_predicted_class; }
};

struct Failure {
  std::string model;
  std::string image_id;
  std::string message;
};

}  // namespace camq::harness
