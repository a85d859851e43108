#include "camq/cam.hpp"

#include <stdexcept>

namespace camq {

GridF normalize_heatmap(const GridF& raw) {
  if (!raw.allFinite()) throw std::invalid_argument("non-finite input");
  return normalize_minmax(raw);
}

GridF upsample(const GridF& map, int target_h, int target_w) {
  if (target_h <= 0 || target_w <= 0) throw std::invalid_argument("target dimensions must be positive");
  if (map.size() == 0) throw std::invalid_argument("empty heatmap");
  return resize_bilinear(map, target_h, target_w);
}

CamResult compute_gradcampp(const nn::Network& net, const nn::Tensor& image,
                            const std::string& target_layer, std::optional<int> class_index,
                            const nn::OutputHook& hook) {
  const auto target = net.find(target_layer);
  if (!target || *target == 0) throw std::invalid_argument("invalid target layer");

  const nn::Trace trace = net.forward(image, hook);
  const nn::Tensor& acts = trace.out[static_cast<std::size_t>(*target)];
  if (acts.spatial() < 2 || *target == net.output()) throw std::invalid_argument("invalid target layer");

  const nn::Vector logits = nn::flatten_output(trace);
  if (!logits.allFinite()) throw std::runtime_error("non-finite logits");
  CamResult result;
  Eigen::Index arg = 0;
  logits.maxCoeff(&arg);
  result.predicted_class = static_cast<int>(arg);
  result.class_index = class_index.value_or(result.predicted_class);
  if (result.class_index < 0 || result.class_index >= logits.size())
    throw std::out_of_range("class index out of range");

  nn::Tensor seed = nn::Tensor::zeros_like(trace.out.back());
  seed.data()(result.class_index) = 1.0f;
  const auto grads = net.backward(trace, seed, *target);
  const nn::Tensor& grad = grads[static_cast<std::size_t>(*target)];

  const int channels = acts.channels();
  GridD cam = GridD::Zero(acts.height(), acts.width());
  Eigen::Map<Eigen::Array<double, 1, Eigen::Dynamic>> flat(cam.data(), cam.size());
  bool any_gradient = false;
  if (!grad.empty()) {
    for (int c = 0; c < channels; ++c) {
      const auto a = acts.data().row(c).cast<double>().array();
      const auto g = grad.data().row(c).cast<double>().array();
      const double sum_a = a.sum();
      double weight = 0.0;
      for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double gi = g(i);
        if (gi == 0.0) continue;
        any_gradient = true;
        const double g2 = gi * gi;
        const double denom = 2.0 * g2 + sum_a * g2 * gi;
        if (denom == 0.0 || gi < 0.0) continue;
        weight += g2 / denom * gi;
      }
      if (weight != 0.0) flat += weight * a;
    }
  }
  result.zero_gradient = !any_gradient;
  cam = cam.max(0.0);
  if (!cam.allFinite()) throw std::runtime_error("non-finite CAM");

  const GridF coarse = normalize_heatmap(cam.cast<float>());
  result.heatmap = normalize_minmax(upsample(coarse, image.height(), image.width()));
  return result;
}

CamResult compute_gradcampp(const QuantizedModel& model, const nn::Tensor& image,
                            const std::string& target_layer, std::optional<int> class_index) {
  return compute_gradcampp(model.network(), image, target_layer, class_index, model.hook());
}

}  // namespace camq
