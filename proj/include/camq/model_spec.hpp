#pragma once

#include <array>
#include <string>

namespace camq {

/// Image preprocessing: shorter side resized to `resize`, centre crop of
/// `crop` pixels, then per-channel (x - mean) / std on RGB values in [0, 1].
struct Preprocessing {
  int resize = 256;
  int crop = 224;
  std::array<float, 3> mean{0.485f, 0.456f, 0.406f};
  std::array<float, 3> std{0.229f, 0.224f, 0.225f};

  friend bool operator==(const Preprocessing&, const Preprocessing&) = default;
};

struct ModelSpec {
  std::string architecture;
  /// "random:<seed>" or a .safetensors path.
  std::string weights;
  /// Empty selects the registered layer for the architecture.
  std::string target_layer;
  Preprocessing preprocessing;
};

/// Spec with the registered target layer. Throws "unsupported model: ..." for
/// unknown architectures.
ModelSpec make_model_spec(const std::string& architecture, const std::string& weights);

/// Explicit target layer, or the registry entry for the architecture.
std::string select_target_layer(const ModelSpec& spec);

}  // namespace camq
