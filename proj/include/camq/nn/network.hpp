#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "camq/nn/tensor.hpp"

// A minimal inference graph with reverse-mode gradients, enough for
// Grad-CAM style analysis of torchvision-style CNN classifiers and for
// training tiny synthetic models.
namespace camq::nn {

enum class Activation { None, ReLU, ReLU6, SiLU, Sigmoid };

struct Input {};

struct Conv2d {
  Matrix weight;  // out x (in/groups * k * k), PyTorch (out, in, kh, kw) order
  Vector bias;    // out
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int groups = 1;
};

/// Eval-mode batch norm reduced to a per-channel affine map.
struct BatchNorm {
  Vector scale;
  Vector shift;
};

/// Activation only; the node's activation field does the work.
struct Elementwise {};

struct MaxPool {
  int kernel = 2;
  int stride = 2;
  int padding = 0;
  bool ceil_mode = false;
};

struct AvgPool {
  int kernel = 2;
  int stride = 2;
};

struct AdaptiveAvgPool {
  int out_h = 1;
  int out_w = 1;
};

/// Fully connected layer over the flattened (C, H, W) input; output is out x 1 x 1.
struct Linear {
  Matrix weight;  // out x in
  Vector bias;
};

struct Add {};
struct Concat {};
/// inputs[0] * inputs[1] where inputs[1] is C x 1 x 1 (squeeze-excitation gate).
struct ChannelScale {};

using Op = std::variant<Input, Conv2d, BatchNorm, Elementwise, MaxPool, AvgPool, AdaptiveAvgPool,
                        Linear, Add, Concat, ChannelScale>;

struct Node {
  std::string name;
  Op op;
  std::vector<int> inputs;
  Activation activation = Activation::None;
  bool quant_site = false;  // block output whose activations get fake-quantized
};

/// Values recorded by a forward pass. pre[i] holds the pre-activation value of
/// node i when it has an activation, out[i] is what downstream nodes consume.
struct Trace {
  std::vector<Tensor> pre;
  std::vector<Tensor> out;
};

struct ParamGrad {
  Matrix weight;
  Vector bias;
};

/// Called on each node output after its activation. Used to inject
/// fake quantization; gradients treat the hook as identity.
using OutputHook = std::function<void(const Node&, Tensor&)>;

class Network {
 public:
  int add_input(std::string name = "input");
  int add(std::string name, Op op, std::vector<int> inputs,
          Activation activation = Activation::None, bool quant_site = false);

  std::span<const Node> nodes() const { return nodes_; }
  const Node& node(int index) const { return nodes_.at(static_cast<std::size_t>(index)); }
  Node& node(int index) { return nodes_.at(static_cast<std::size_t>(index)); }
  std::optional<int> find(std::string_view name) const;
  int output() const { return static_cast<int>(nodes_.size()) - 1; }
  std::size_t size() const { return nodes_.size(); }

  Trace forward(const Tensor& input, const OutputHook& hook = {}) const;

  /// Reverse pass seeded with the gradient of node output(). Gradients are
  /// propagated through nodes with index > stop and accumulated for every
  /// node with index >= stop; entries for other nodes stay empty. When
  /// param_grads is given it is filled for Conv2d/Linear nodes.
  std::vector<Tensor> backward(const Trace& trace, const Tensor& output_grad, int stop = 0,
                               std::vector<std::optional<ParamGrad>>* param_grads = nullptr) const;

 private:
  std::vector<Node> nodes_;
};

/// Logits of a trace's final node, flattened.
Vector flatten_output(const Trace& trace);

Tensor apply_activation(Activation act, const Tensor& pre);

}  // namespace camq::nn
