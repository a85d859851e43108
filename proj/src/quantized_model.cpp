#include "camq/quantized_model.hpp"

#include <stdexcept>
#include <variant>

#include "camq/nn/zoo.hpp"

namespace camq {

ModelSpec make_model_spec(const std::string& architecture, const std::string& weights) {
  ModelSpec spec;
  spec.architecture = architecture;
  spec.weights = weights;
  spec.target_layer = nn::default_target_layer(architecture);
  return spec;
}

std::string select_target_layer(const ModelSpec& spec) {
  if (!spec.target_layer.empty()) return spec.target_layer;
  return nn::default_target_layer(spec.architecture);
}

QuantizedModel::QuantizedModel(std::shared_ptr<const nn::Network> base, quant::PrecisionLevel level,
                               std::string model_id)
    : level_(level), model_id_(std::move(model_id)) {
  if (!base) throw std::invalid_argument("null network");
  if (level_.is_identity()) {
    net_ = std::move(base);
    return;
  }
  auto copy = std::make_shared<nn::Network>(*base);
  for (std::size_t i = 0; i < copy->size(); ++i) {
    nn::Node& node = copy->node(static_cast<int>(i));
    if (auto* conv = std::get_if<nn::Conv2d>(&node.op))
      quant::fake_quant_inplace(conv->weight, level_);
    else if (auto* fc = std::get_if<nn::Linear>(&node.op))
      quant::fake_quant_inplace(fc->weight, level_);
  }
  net_ = std::move(copy);
}

std::vector<std::string> QuantizedModel::instrumented_sites() const {
  std::vector<std::string> sites;
  if (level_.is_identity()) return sites;
  for (const nn::Node& node : net_->nodes())
    if (std::holds_alternative<nn::Conv2d>(node.op) || std::holds_alternative<nn::Linear>(node.op))
      sites.push_back(node.name + ".weight");
  for (const nn::Node& node : net_->nodes())
    if (node.quant_site) sites.push_back(node.name);
  return sites;
}

nn::OutputHook QuantizedModel::hook() const {
  if (level_.is_identity()) return {};
  return [level = level_](const nn::Node& node, nn::Tensor& out) {
    if (node.quant_site) quant::fake_quant_inplace(out.data(), level);
  };
}

nn::Trace QuantizedModel::forward(const nn::Tensor& input) const { return net_->forward(input, hook()); }

QuantizedModel wrap_model(std::shared_ptr<const nn::Network> base, const quant::PrecisionLevel& level,
                          std::string model_id) {
  return QuantizedModel(std::move(base), level, std::move(model_id));
}

QuantizedModel wrap_model(const ModelSpec& spec, const quant::PrecisionLevel& level) {
  if (!nn::is_supported_architecture(spec.architecture))
    throw std::invalid_argument("unsupported model: " + spec.architecture);
  auto weights = nn::open_weights(spec.weights);
  auto net = std::make_shared<const nn::Network>(nn::build_model(spec.architecture, *weights));
  return QuantizedModel(std::move(net), level, spec.architecture);
}

}  // namespace camq
