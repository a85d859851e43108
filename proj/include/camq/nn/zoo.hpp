#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "camq/nn/network.hpp"
#include "camq/nn/weights.hpp"

// torchvision classifier architectures rebuilt on camq::nn. Parameter names
// follow the torchvision state_dict keys so exported weights load directly.
namespace camq::nn {

inline constexpr double kBatchNormEps = 1e-5;

const std::vector<std::string>& supported_architectures();
bool is_supported_architecture(std::string_view arch);

/// Node whose output is explained by Grad-CAM++ for this architecture.
std::string default_target_layer(std::string_view arch);

/// Throws "unsupported model: <arch>" for unknown names.
Network build_model(std::string_view arch, WeightSource& weights, int num_classes = 1000);

}  // namespace camq::nn
