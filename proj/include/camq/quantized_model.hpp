#pragma once

#include <memory>
#include <string>
#include <vector>

#include "camq/model_spec.hpp"
#include "camq/nn/network.hpp"
#include "camq/quantsim.hpp"

namespace camq {

/// A network evaluated at one precision. Integer levels fake-quantize every
/// conv/linear weight once at construction and every block-output activation
/// on each forward pass, using per-tensor dynamic min/max statistics.
/// Gradients pass the activation quantizers straight through. The F32 level
/// shares the base network and installs no hooks.
///
/// forward() keeps all per-pass state in the returned trace, so one instance
/// may serve several threads.
class QuantizedModel {
 public:
  QuantizedModel(std::shared_ptr<const nn::Network> base, quant::PrecisionLevel level,
                 std::string model_id = "custom");

  const quant::PrecisionLevel& precision() const { return level_; }
  const std::string& model_id() const { return model_id_; }
  const nn::Network& network() const { return *net_; }
  std::shared_ptr<const nn::Network> network_ptr() const { return net_; }

  /// Weight sites ("<node>.weight") followed by activation sites ("<node>").
  /// Empty for F32.
  std::vector<std::string> instrumented_sites() const;

  nn::Trace forward(const nn::Tensor& input) const;
  nn::Vector logits(const nn::Tensor& input) const { return nn::flatten_output(forward(input)); }
  /// Activation fake-quant hook; empty for F32.
  nn::OutputHook hook() const;

 private:
  std::shared_ptr<const nn::Network> net_;
  quant::PrecisionLevel level_;
  std::string model_id_;
};

/// Loads the architecture with the given weights and wraps it. Throws
/// "unsupported model: ..." for unknown architectures.
QuantizedModel wrap_model(const ModelSpec& spec, const quant::PrecisionLevel& level);
QuantizedModel wrap_model(std::shared_ptr<const nn::Network> base, const quant::PrecisionLevel& level,
                          std::string model_id = "custom");

}  // namespace camq
