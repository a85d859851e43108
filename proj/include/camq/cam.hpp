#pragma once

#include <optional>
#include <string>

#include "camq/grid.hpp"
#include "camq/nn/network.hpp"
#include "camq/quantized_model.hpp"

// Grad-CAM++ heatmaps for networks built on camq::nn.
namespace camq {

struct CamResult {
  GridF heatmap;            // input resolution, values in [0, 1]
  int class_index = -1;     // class that was explained
  int predicted_class = -1; // argmax of the model's logits
  bool zero_gradient = false;  // no gradient reached the target layer; heatmap is all zero
};

/// Min-max rescale to [0, 1]; a constant map becomes all zeros.
GridF normalize_heatmap(const GridF& raw);

/// Bilinear resize of a heatmap.
GridF upsample(const GridF& map, int target_h, int target_w);

/// Grad-CAM++ on the raw network. `hook` is applied to node outputs during
/// the forward pass and is transparent to gradients. Without a class index
/// the network's own argmax is explained.
///
/// Throws "invalid target layer" when the layer is unknown or its output has
/// no spatial extent.
CamResult compute_gradcampp(const nn::Network& net, const nn::Tensor& image,
                            const std::string& target_layer,
                            std::optional<int> class_index = std::nullopt,
                            const nn::OutputHook& hook = {});

CamResult compute_gradcampp(const QuantizedModel& model, const nn::Tensor& image,
                            const std::string& target_layer,
                            std::optional<int> class_index = std::nullopt);

}  // namespace camq
