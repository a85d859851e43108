#include "camq/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace camq::nn {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

int conv_out_size(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

int pool_out_size(int in, int kernel, int stride, int padding, bool ceil_mode) {
  const int span = in + 2 * padding - kernel;
  int out = (ceil_mode ? (span + stride - 1) / stride : span / stride) + 1;
  // the last window must start inside the input or left padding
  if (ceil_mode && (out - 1) * stride >= in + padding) --out;
  return out;
}

// Rows of cols are ordered (channel, ky, kx), matching PyTorch weight layout.
void im2col(const Tensor& x, int c0, int channels, int kernel, int stride, int padding, int oh,
            int ow, Matrix& cols) {
  const int h = x.height();
  const int w = x.width();
  cols.resize(static_cast<Eigen::Index>(channels) * kernel * kernel,
              static_cast<Eigen::Index>(oh) * ow);
  for (int c = 0; c < channels; ++c) {
    const float* src = x.data().row(c0 + c).data();
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        float* dst = cols.row((static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx).data();
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - padding + ky;
          float* drow = dst + static_cast<std::ptrdiff_t>(oy) * ow;
          if (iy < 0 || iy >= h) {
            std::fill(drow, drow + ow, 0.0f);
            continue;
          }
          const float* srow = src + static_cast<std::ptrdiff_t>(iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - padding + kx;
            drow[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const Matrix& cols, int c0, int channels, int kernel, int stride, int padding,
                int oh, int ow, Tensor& dx) {
  const int h = dx.height();
  const int w = dx.width();
  for (int c = 0; c < channels; ++c) {
    float* dst = dx.data().row(c0 + c).data();
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const float* src =
            cols.row((static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx).data();
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - padding + kx;
            if (ix >= 0 && ix < w)
              dst[static_cast<std::ptrdiff_t>(iy) * w + ix] +=
                  src[static_cast<std::ptrdiff_t>(oy) * ow + ox];
          }
        }
      }
    }
  }
}

bool is_depthwise(const Conv2d& conv) {
  return conv.groups > 1 && conv.groups == conv.in_channels && conv.groups == conv.out_channels;
}

bool is_pointwise(const Conv2d& conv) {
  return conv.kernel == 1 && conv.stride == 1 && conv.padding == 0;
}

void check_conv_input(const Conv2d& conv, const Tensor& x, const std::string& name) {
  if (x.channels() != conv.in_channels)
    throw std::invalid_argument("conv '" + name + "': expected " +
                                std::to_string(conv.in_channels) + " input channels, got " +
                                std::to_string(x.channels()));
  if (x.height() + 2 * conv.padding < conv.kernel || x.width() + 2 * conv.padding < conv.kernel)
    throw std::invalid_argument("conv '" + name + "': input smaller than kernel");
}

Tensor conv_forward(const Conv2d& conv, const Tensor& x) {
  const int oh = conv_out_size(x.height(), conv.kernel, conv.stride, conv.padding);
  const int ow = conv_out_size(x.width(), conv.kernel, conv.stride, conv.padding);
  Tensor y(conv.out_channels, oh, ow);
  const int k = conv.kernel;

  if (is_depthwise(conv)) {
    for (int c = 0; c < conv.out_channels; ++c) {
      const float* wk = conv.weight.row(c).data();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          float acc = 0.0f;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * conv.stride - conv.padding + ky;
            if (iy < 0 || iy >= x.height()) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * conv.stride - conv.padding + kx;
              if (ix < 0 || ix >= x.width()) continue;
              acc += wk[ky * k + kx] * x.at(c, iy, ix);
            }
          }
          y.at(c, oy, ox) = acc;
        }
      }
    }
  } else {
    const int cin_g = conv.in_channels / conv.groups;
    const int cout_g = conv.out_channels / conv.groups;
    Matrix cols;
    for (int g = 0; g < conv.groups; ++g) {
      auto w = conv.weight.middleRows(static_cast<Eigen::Index>(g) * cout_g, cout_g);
      auto out = y.data().middleRows(static_cast<Eigen::Index>(g) * cout_g, cout_g);
      if (is_pointwise(conv)) {
        out.noalias() = w * x.data().middleRows(static_cast<Eigen::Index>(g) * cin_g, cin_g);
      } else {
        im2col(x, g * cin_g, cin_g, k, conv.stride, conv.padding, oh, ow, cols);
        out.noalias() = w * cols;
      }
    }
  }
  if (conv.bias.size() > 0) y.data().colwise() += conv.bias;
  return y;
}

Tensor conv_backward(const Conv2d& conv, const Tensor& x, const Tensor& dy, ParamGrad* pg) {
  Tensor dx = Tensor::zeros_like(x);
  const int oh = dy.height();
  const int ow = dy.width();
  const int k = conv.kernel;
  if (pg) {
    pg->weight = Matrix::Zero(conv.weight.rows(), conv.weight.cols());
    pg->bias = dy.data().rowwise().sum();
  }

  if (is_depthwise(conv)) {
    for (int c = 0; c < conv.out_channels; ++c) {
      const float* wk = conv.weight.row(c).data();
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const float g = dy.at(c, oy, ox);
          if (g == 0.0f) continue;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy * conv.stride - conv.padding + ky;
            if (iy < 0 || iy >= x.height()) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * conv.stride - conv.padding + kx;
              if (ix < 0 || ix >= x.width()) continue;
              dx.at(c, iy, ix) += wk[ky * k + kx] * g;
              if (pg) pg->weight(c, ky * k + kx) += g * x.at(c, iy, ix);
            }
          }
        }
      }
    }
    return dx;
  }

  const int cin_g = conv.in_channels / conv.groups;
  const int cout_g = conv.out_channels / conv.groups;
  Matrix cols;
  for (int g = 0; g < conv.groups; ++g) {
    auto w = conv.weight.middleRows(static_cast<Eigen::Index>(g) * cout_g, cout_g);
    auto dyg = dy.data().middleRows(static_cast<Eigen::Index>(g) * cout_g, cout_g);
    if (is_pointwise(conv)) {
      auto xg = x.data().middleRows(static_cast<Eigen::Index>(g) * cin_g, cin_g);
      dx.data().middleRows(static_cast<Eigen::Index>(g) * cin_g, cin_g).noalias() =
          w.transpose() * dyg;
      if (pg)
        pg->weight.middleRows(static_cast<Eigen::Index>(g) * cout_g, cout_g).noalias() =
            dyg * xg.transpose();
    } else {
      const Matrix dcols = w.transpose() * dyg;
      col2im_add(dcols, g * cin_g, cin_g, k, conv.stride, conv.padding, oh, ow, dx);
      if (pg) {
        im2col(x, g * cin_g, cin_g, k, conv.stride, conv.padding, oh, ow, cols);
        pg->weight.middleRows(static_cast<Eigen::Index>(g) * cout_g, cout_g).noalias() =
            dyg * cols.transpose();
      }
    }
  }
  return dx;
}

Tensor maxpool_forward(const MaxPool& p, const Tensor& x) {
  const int oh = pool_out_size(x.height(), p.kernel, p.stride, p.padding, p.ceil_mode);
  const int ow = pool_out_size(x.width(), p.kernel, p.stride, p.padding, p.ceil_mode);
  Tensor y(x.channels(), oh, ow);
  for (int c = 0; c < x.channels(); ++c) {
    for (int oy = 0; oy < oh; ++oy) {
      const int y0 = std::max(oy * p.stride - p.padding, 0);
      const int y1 = std::min(oy * p.stride - p.padding + p.kernel, x.height());
      for (int ox = 0; ox < ow; ++ox) {
        const int x0 = std::max(ox * p.stride - p.padding, 0);
        const int x1 = std::min(ox * p.stride - p.padding + p.kernel, x.width());
        float best = -std::numeric_limits<float>::infinity();
        for (int iy = y0; iy < y1; ++iy)
          for (int ix = x0; ix < x1; ++ix) best = std::max(best, x.at(c, iy, ix));
        y.at(c, oy, ox) = best;
      }
    }
  }
  return y;
}

Tensor maxpool_backward(const MaxPool& p, const Tensor& x, const Tensor& dy) {
  Tensor dx = Tensor::zeros_like(x);
  for (int c = 0; c < x.channels(); ++c) {
    for (int oy = 0; oy < dy.height(); ++oy) {
      const int y0 = std::max(oy * p.stride - p.padding, 0);
      const int y1 = std::min(oy * p.stride - p.padding + p.kernel, x.height());
      for (int ox = 0; ox < dy.width(); ++ox) {
        const int x0 = std::max(ox * p.stride - p.padding, 0);
        const int x1 = std::min(ox * p.stride - p.padding + p.kernel, x.width());
        int by = y0, bx = x0;
        float best = -std::numeric_limits<float>::infinity();
        for (int iy = y0; iy < y1; ++iy) {
          for (int ix = x0; ix < x1; ++ix) {
            if (x.at(c, iy, ix) > best) {
              best = x.at(c, iy, ix);
              by = iy;
              bx = ix;
            }
          }
        }
        dx.at(c, by, bx) += dy.at(c, oy, ox);
      }
    }
  }
  return dx;
}

Tensor avgpool_forward(const AvgPool& p, const Tensor& x) {
  const int oh = conv_out_size(x.height(), p.kernel, p.stride, 0);
  const int ow = conv_out_size(x.width(), p.kernel, p.stride, 0);
  Tensor y(x.channels(), oh, ow);
  const float inv = 1.0f / static_cast<float>(p.kernel * p.kernel);
  for (int c = 0; c < x.channels(); ++c)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        float acc = 0.0f;
        for (int ky = 0; ky < p.kernel; ++ky)
          for (int kx = 0; kx < p.kernel; ++kx)
            acc += x.at(c, oy * p.stride + ky, ox * p.stride + kx);
        y.at(c, oy, ox) = acc * inv;
      }
  return y;
}

Tensor avgpool_backward(const AvgPool& p, const Tensor& x, const Tensor& dy) {
  Tensor dx = Tensor::zeros_like(x);
  const float inv = 1.0f / static_cast<float>(p.kernel * p.kernel);
  for (int c = 0; c < x.channels(); ++c)
    for (int oy = 0; oy < dy.height(); ++oy)
      for (int ox = 0; ox < dy.width(); ++ox) {
        const float g = dy.at(c, oy, ox) * inv;
        for (int ky = 0; ky < p.kernel; ++ky)
          for (int kx = 0; kx < p.kernel; ++kx) dx.at(c, oy * p.stride + ky, ox * p.stride + kx) += g;
      }
  return dx;
}

// PyTorch adaptive pooling bins: [floor(i*in/out), ceil((i+1)*in/out)).
int bin_start(int i, int in, int out) { return (i * in) / out; }
int bin_end(int i, int in, int out) { return ((i + 1) * in + out - 1) / out; }

Tensor adaptive_forward(const AdaptiveAvgPool& p, const Tensor& x) {
  Tensor y(x.channels(), p.out_h, p.out_w);
  for (int oy = 0; oy < p.out_h; ++oy) {
    const int y0 = bin_start(oy, x.height(), p.out_h), y1 = bin_end(oy, x.height(), p.out_h);
    for (int ox = 0; ox < p.out_w; ++ox) {
      const int x0 = bin_start(ox, x.width(), p.out_w), x1 = bin_end(ox, x.width(), p.out_w);
      const float inv = 1.0f / static_cast<float>((y1 - y0) * (x1 - x0));
      for (int c = 0; c < x.channels(); ++c) {
        float acc = 0.0f;
        for (int iy = y0; iy < y1; ++iy)
          for (int ix = x0; ix < x1; ++ix) acc += x.at(c, iy, ix);
        y.at(c, oy, ox) = acc * inv;
      }
    }
  }
  return y;
}

Tensor adaptive_backward(const AdaptiveAvgPool& p, const Tensor& x, const Tensor& dy) {
  Tensor dx = Tensor::zeros_like(x);
  for (int oy = 0; oy < p.out_h; ++oy) {
    const int y0 = bin_start(oy, x.height(), p.out_h), y1 = bin_end(oy, x.height(), p.out_h);
    for (int ox = 0; ox < p.out_w; ++ox) {
      const int x0 = bin_start(ox, x.width(), p.out_w), x1 = bin_end(ox, x.width(), p.out_w);
      const float inv = 1.0f / static_cast<float>((y1 - y0) * (x1 - x0));
      for (int c = 0; c < x.channels(); ++c) {
        const float g = dy.at(c, oy, ox) * inv;
        for (int iy = y0; iy < y1; ++iy)
          for (int ix = x0; ix < x1; ++ix) dx.at(c, iy, ix) += g;
      }
    }
  }
  return dx;
}

Eigen::Map<const Vector> flat(const Tensor& t) { return {t.data().data(), t.size()}; }

Tensor activation_grad(Activation act, const Tensor& pre, const Tensor& dy) {
  Tensor dx = dy;
  auto g = dx.data().array();
  const auto z = pre.data().array();
  switch (act) {
    case Activation::None: break;
    case Activation::ReLU: g *= (z > 0.0f).cast<float>(); break;
    case Activation::ReLU6: g *= ((z > 0.0f) && (z < 6.0f)).cast<float>(); break;
    case Activation::SiLU: {
      const auto s = 1.0f / (1.0f + (-z).exp());
      g *= s * (1.0f + z * (1.0f - s));
      break;
    }
    case Activation::Sigmoid: {
      const auto s = 1.0f / (1.0f + (-z).exp());
      g *= s * (1.0f - s);
      break;
    }
  }
  return dx;
}

}  // namespace

Tensor apply_activation(Activation act, const Tensor& pre) {
  Tensor y = pre;
  auto v = y.data().array();
  switch (act) {
    case Activation::None: break;
    case Activation::ReLU: v = v.max(0.0f); break;
    case Activation::ReLU6: v = v.max(0.0f).min(6.0f); break;
    case Activation::SiLU: v = v / (1.0f + (-v).exp()); break;
    case Activation::Sigmoid: v = 1.0f / (1.0f + (-v).exp()); break;
  }
  return y;
}

int Network::add_input(std::string name) {
  if (!nodes_.empty()) throw std::logic_error("input must be the first node");
  nodes_.push_back(Node{std::move(name), Input{}, {}, Activation::None, false});
  return 0;
}

int Network::add(std::string name, Op op, std::vector<int> inputs, Activation activation,
                 bool quant_site) {
  const int index = static_cast<int>(nodes_.size());
  for (int in : inputs)
    if (in < 0 || in >= index) throw std::logic_error("node '" + name + "' has a forward reference");
  nodes_.push_back(Node{std::move(name), std::move(op), std::move(inputs), activation, quant_site});
  return index;
}

std::optional<int> Network::find(std::string_view name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].name == name) return static_cast<int>(i);
  return std::nullopt;
}

Trace Network::forward(const Tensor& input, const OutputHook& hook) const {
  if (nodes_.empty() || !std::holds_alternative<Input>(nodes_.front().op))
    throw std::logic_error("network has no input node");
  Trace t;
  t.pre.resize(nodes_.size());
  t.out.resize(nodes_.size());

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& node = nodes_[i];
    auto in = [&](std::size_t j) -> const Tensor& {
      return t.out[static_cast<std::size_t>(node.inputs.at(j))];
    };
    Tensor y = std::visit(
        overloaded{
            [&](const Input&) { return input; },
            [&](const Conv2d& op) {
              check_conv_input(op, in(0), node.name);
              return conv_forward(op, in(0));
            },
            [&](const BatchNorm& op) {
              const Tensor& x = in(0);
              if (x.channels() != op.scale.size())
                throw std::invalid_argument("batch norm '" + node.name + "': channel mismatch");
              Tensor r = x;
              r.data().array().colwise() *= op.scale.array();
              r.data().array().colwise() += op.shift.array();
              return r;
            },
            [&](const Elementwise&) { return in(0); },
            [&](const MaxPool& op) { return maxpool_forward(op, in(0)); },
            [&](const AvgPool& op) { return avgpool_forward(op, in(0)); },
            [&](const AdaptiveAvgPool& op) { return adaptive_forward(op, in(0)); },
            [&](const Linear& op) {
              if (in(0).size() != op.weight.cols())
                throw std::invalid_argument("linear '" + node.name + "': expected " +
                                            std::to_string(op.weight.cols()) + " inputs, got " +
                                            std::to_string(in(0).size()));
              Matrix r = op.weight * flat(in(0));
              if (op.bias.size() > 0) r.col(0) += op.bias;
              return Tensor(std::move(r), 1, 1);
            },
            [&](const Add&) {
              if (!in(0).same_shape(in(1)))
                throw std::invalid_argument("add '" + node.name + "': shape mismatch");
              Tensor r = in(0);
              r.data() += in(1).data();
              return r;
            },
            [&](const Concat&) {
              Eigen::Index rows = 0;
              for (std::size_t j = 0; j < node.inputs.size(); ++j) {
                if (in(j).height() != in(0).height() || in(j).width() != in(0).width())
                  throw std::invalid_argument("concat '" + node.name + "': spatial mismatch");
                rows += in(j).channels();
              }
              Matrix r(rows, in(0).spatial());
              Eigen::Index at = 0;
              for (std::size_t j = 0; j < node.inputs.size(); ++j) {
                r.middleRows(at, in(j).channels()) = in(j).data();
                at += in(j).channels();
              }
              return Tensor(std::move(r), in(0).height(), in(0).width());
            },
            [&](const ChannelScale&) {
              const Tensor& x = in(0);
              const Tensor& gate = in(1);
              if (gate.channels() != x.channels() || gate.spatial() != 1)
                throw std::invalid_argument("channel scale '" + node.name + "': bad gate shape");
              Tensor r = x;
              r.data().array().colwise() *= gate.data().col(0).array();
              return r;
            },
        },
        node.op);

    if (node.activation != Activation::None) {
      t.pre[i] = std::move(y);
      y = apply_activation(node.activation, t.pre[i]);
    }
    if (hook) hook(node, y);
    t.out[i] = std::move(y);
  }
  return t;
}

std::vector<Tensor> Network::backward(const Trace& trace, const Tensor& output_grad, int stop,
                                      std::vector<std::optional<ParamGrad>>* param_grads) const {
  const int n = static_cast<int>(nodes_.size());
  if (trace.out.size() != nodes_.size()) throw std::invalid_argument("trace does not match network");
  if (!output_grad.same_shape(trace.out.back()))
    throw std::invalid_argument("output gradient shape mismatch");
  if (stop < 0 || stop >= n) throw std::out_of_range("backward stop node out of range");

  std::vector<Tensor> grads(nodes_.size());
  grads.back() = output_grad;
  if (param_grads) param_grads->assign(nodes_.size(), std::nullopt);

  auto accumulate = [&](int j, Tensor&& d) {
    if (j < stop) return;
    Tensor& slot = grads[static_cast<std::size_t>(j)];
    if (slot.empty())
      slot = std::move(d);
    else
      slot.data() += d.data();
  };

  for (int i = n - 1; i > stop; --i) {
    const auto ui = static_cast<std::size_t>(i);
    if (grads[ui].empty()) continue;
    const Node& node = nodes_[ui];
    const Tensor g = node.activation == Activation::None
                         ? grads[ui]
                         : activation_grad(node.activation, trace.pre[ui], grads[ui]);
    auto in = [&](std::size_t j) -> const Tensor& {
      return trace.out[static_cast<std::size_t>(node.inputs.at(j))];
    };

    std::visit(
        overloaded{
            [&](const Input&) {},
            [&](const Conv2d& op) {
              ParamGrad pg;
              Tensor dx = conv_backward(op, in(0), g, param_grads ? &pg : nullptr);
              if (param_grads) (*param_grads)[ui] = std::move(pg);
              accumulate(node.inputs[0], std::move(dx));
            },
            [&](const BatchNorm& op) {
              Tensor dx = g;
              dx.data().array().colwise() *= op.scale.array();
              accumulate(node.inputs[0], std::move(dx));
            },
            [&](const Elementwise&) { accumulate(node.inputs[0], Tensor(g)); },
            [&](const MaxPool& op) { accumulate(node.inputs[0], maxpool_backward(op, in(0), g)); },
            [&](const AvgPool& op) { accumulate(node.inputs[0], avgpool_backward(op, in(0), g)); },
            [&](const AdaptiveAvgPool& op) {
              accumulate(node.inputs[0], adaptive_backward(op, in(0), g));
            },
            [&](const Linear& op) {
              const Tensor& x = in(0);
              Matrix dflat = op.weight.transpose() * g.data().col(0);
              Matrix dx = Eigen::Map<const Matrix>(dflat.data(), x.channels(), x.spatial());
              if (param_grads)
                (*param_grads)[ui] = ParamGrad{g.data().col(0) * flat(x).transpose(),
                                               g.data().col(0)};
              accumulate(node.inputs[0], Tensor(std::move(dx), x.height(), x.width()));
            },
            [&](const Add&) {
              accumulate(node.inputs[0], Tensor(g));
              accumulate(node.inputs[1], Tensor(g));
            },
            [&](const Concat&) {
              Eigen::Index at = 0;
              for (std::size_t j = 0; j < node.inputs.size(); ++j) {
                const Tensor& x = in(j);
                accumulate(node.inputs[j],
                           Tensor(g.data().middleRows(at, x.channels()), x.height(), x.width()));
                at += x.channels();
              }
            },
            [&](const ChannelScale&) {
              const Tensor& x = in(0);
              const Tensor& gate = in(1);
              Tensor dx = g;
              dx.data().array().colwise() *= gate.data().col(0).array();
              Matrix dgate = (g.data().array() * x.data().array()).rowwise().sum().matrix();
              accumulate(node.inputs[0], std::move(dx));
              accumulate(node.inputs[1], Tensor(std::move(dgate), 1, 1));
            },
        },
        node.op);
  }
  return grads;
}

Vector flatten_output(const Trace& trace) {
  const Tensor& out = trace.out.back();
  return Eigen::Map<const Vector>(out.data().data(), out.size());
}

}  // namespace camq::nn
