#include "camq/nn/zoo.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace camq::nn {
namespace {

std::string cat(const std::string& a, int i) { return a + "." + std::to_string(i); }

class Builder {
 public:
  Builder(Network& net, WeightSource& weights) : net_(net), w_(weights) {}

  int conv(const std::string& key, int in, int cin, int cout, int k, int s, int p, int groups = 1,
           bool bias = false, Activation act = Activation::None, bool site = false,
           std::string name = {}) {
    Conv2d op;
    op.in_channels = cin;
    op.out_channels = cout;
    op.kernel = k;
    op.stride = s;
    op.padding = p;
    op.groups = groups;
    const int fan = cin / groups * k * k;
    op.weight = matrix(w_.get(key + ".weight", {cout, cin / groups, k, k}, ParamKind::ConvWeight),
                       cout, fan);
    op.bias = bias ? vector(w_.get(key + ".bias", {cout}, ParamKind::ConvBias))
                   : Vector::Zero(cout);
    return net_.add(name.empty() ? key : std::move(name), std::move(op), {in}, act, site);
  }

  int bn(const std::string& key, int in, int channels, Activation act = Activation::None,
         bool site = false, std::string name = {}) {
    const std::vector<std::int64_t> shape{channels};
    const auto gamma = w_.get(key + ".weight", shape, ParamKind::BnWeight);
    const auto beta = w_.get(key + ".bias", shape, ParamKind::BnBias);
    const auto mean = w_.get(key + ".running_mean", shape, ParamKind::BnMean);
    const auto var = w_.get(key + ".running_var", shape, ParamKind::BnVar);
    BatchNorm op{Vector(channels), Vector(channels)};
    for (int c = 0; c < channels; ++c) {
      const double scale = gamma[c] / std::sqrt(static_cast<double>(var[c]) + kBatchNormEps);
      op.scale[c] = static_cast<float>(scale);
      op.shift[c] = static_cast<float>(beta[c] - mean[c] * scale);
    }
    return net_.add(name.empty() ? key : std::move(name), std::move(op), {in}, act, site);
  }

  int linear(const std::string& key, int in, int fin, int fout, Activation act = Activation::None) {
    Linear op{matrix(w_.get(key + ".weight", {fout, fin}, ParamKind::LinearWeight), fout, fin),
              vector(w_.get(key + ".bias", {fout}, ParamKind::LinearBias))};
    return net_.add(key, std::move(op), {in}, act);
  }

 private:
  static Matrix matrix(const std::vector<float>& v, int rows, int cols) {
    return Eigen::Map<const Matrix>(v.data(), rows, cols);
  }
  static Vector vector(const std::vector<float>& v) {
    return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  Network& net_;
  WeightSource& w_;
};

void build_vgg16(Network& net, Builder& b, int classes) {
  const std::array<int, 18> cfg{64, 64, 0, 128, 128, 0, 256, 256, 256, 0, 512, 512, 512, 0, 512, 512, 512, 0};
  int x = net.add_input();
  int idx = 0;
  int cin = 3;
  for (int v : cfg) {
    if (v == 0) {
      x = net.add(cat("features", idx), MaxPool{2, 2, 0, false}, {x});
      idx += 1;
    } else {
      x = b.conv(cat("features", idx), x, cin, v, 3, 1, 1, 1, true, Activation::ReLU, true);
      cin = v;
      idx += 2;
    }
  }
  x = net.add("avgpool", AdaptiveAvgPool{7, 7}, {x});
  x = b.linear("classifier.0", x, 512 * 7 * 7, 4096, Activation::ReLU);
  x = b.linear("classifier.3", x, 4096, 4096, Activation::ReLU);
  b.linear("classifier.6", x, 4096, classes);
}

void build_resnet50(Network& net, Builder& b, int classes) {
  int x = net.add_input();
  x = b.conv("conv1", x, 3, 64, 7, 2, 3);
  x = b.bn("bn1", x, 64, Activation::ReLU, true);
  x = net.add("maxpool", MaxPool{3, 2, 1, false}, {x});
  const std::array<int, 4> blocks{3, 4, 6, 3};
  int in = 64;
  for (int li = 0; li < 4; ++li) {
    const int width = 64 << li;
    const int out = width * 4;
    for (int bi = 0; bi < blocks[li]; ++bi) {
      const std::string pre = cat("layer" + std::to_string(li + 1), bi);
      const int s = (bi == 0 && li > 0) ? 2 : 1;
      int y = b.conv(pre + ".conv1", x, in, width, 1, 1, 0);
      y = b.bn(pre + ".bn1", y, width, Activation::ReLU);
      y = b.conv(pre + ".conv2", y, width, width, 3, s, 1);
      y = b.bn(pre + ".bn2", y, width, Activation::ReLU);
      y = b.conv(pre + ".conv3", y, width, out, 1, 1, 0);
      y = b.bn(pre + ".bn3", y, out);
      int shortcut = x;
      if (bi == 0) {
        shortcut = b.conv(pre + ".downsample.0", x, in, out, 1, s, 0);
        shortcut = b.bn(pre + ".downsample.1", shortcut, out);
      }
      x = net.add(pre, Add{}, {y, shortcut}, Activation::ReLU, true);
      in = out;
    }
  }
  x = net.add("avgpool", AdaptiveAvgPool{1, 1}, {x});
  b.linear("fc", x, 2048, classes);
}

void build_densenet121(Network& net, Builder& b, int classes) {
  constexpr int growth = 32;
  constexpr int bottleneck = 4 * growth;
  int x = net.add_input();
  x = b.conv("features.conv0", x, 3, 64, 7, 2, 3);
  x = b.bn("features.norm0", x, 64, Activation::ReLU);
  x = net.add("features.pool0", MaxPool{3, 2, 1, false}, {x}, Activation::None, true);
  const std::array<int, 4> layers{6, 12, 24, 16};
  int ch = 64;
  for (int bi = 0; bi < 4; ++bi) {
    const std::string block = "features.denseblock" + std::to_string(bi + 1);
    std::vector<int> feats{x};
    for (int li = 0; li < layers[bi]; ++li) {
      const std::string pre = block + ".denselayer" + std::to_string(li + 1);
      const int cin = ch + li * growth;
      const int in = feats.size() == 1 ? feats[0] : net.add(pre + ".cat", Concat{}, feats);
      int y = b.bn(pre + ".norm1", in, cin, Activation::ReLU);
      y = b.conv(pre + ".conv1", y, cin, bottleneck, 1, 1, 0);
      y = b.bn(pre + ".norm2", y, bottleneck, Activation::ReLU);
      y = b.conv(pre + ".conv2", y, bottleneck, growth, 3, 1, 1, 1, false, Activation::None, true);
      feats.push_back(y);
    }
    x = net.add(block, Concat{}, feats);
    ch += layers[bi] * growth;
    if (bi < 3) {
      const std::string pre = "features.transition" + std::to_string(bi + 1);
      x = b.bn(pre + ".norm", x, ch, Activation::ReLU);
      x = b.conv(pre + ".conv", x, ch, ch / 2, 1, 1, 0);
      x = net.add(pre + ".pool", AvgPool{2, 2}, {x}, Activation::None, true);
      ch /= 2;
    }
  }
  x = b.bn("features.norm5", x, ch, Activation::None, true);
  x = net.add("relu", Elementwise{}, {x}, Activation::ReLU);
  x = net.add("avgpool", AdaptiveAvgPool{1, 1}, {x});
  b.linear("classifier", x, ch, classes);
}

void build_mobilenet_v2(Network& net, Builder& b, int classes) {
  struct Stage { int t, c, n, s; };
  const std::array<Stage, 7> stages{{{1, 16, 1, 1}, {6, 24, 2, 2}, {6, 32, 3, 2}, {6, 64, 4, 2},
                                     {6, 96, 3, 1}, {6, 160, 3, 2}, {6, 320, 1, 1}}};
  int x = net.add_input();
  x = b.conv("features.0.0", x, 3, 32, 3, 2, 1);
  x = b.bn("features.0.1", x, 32, Activation::ReLU6, true, "features.0");
  int in = 32;
  int idx = 1;
  for (const Stage& st : stages) {
    for (int i = 0; i < st.n; ++i, ++idx) {
      const std::string pre = cat("features", idx) + ".conv";
      const int stride = i == 0 ? st.s : 1;
      const int hidden = in * st.t;
      int y = x;
      int j = 0;
      if (st.t != 1) {
        y = b.conv(cat(pre, 0) + ".0", y, in, hidden, 1, 1, 0);
        y = b.bn(cat(pre, 0) + ".1", y, hidden, Activation::ReLU6);
        j = 1;
      }
      y = b.conv(cat(pre, j) + ".0", y, hidden, hidden, 3, stride, 1, hidden);
      y = b.bn(cat(pre, j) + ".1", y, hidden, Activation::ReLU6);
      y = b.conv(cat(pre, j + 1), y, hidden, st.c, 1, 1, 0);
      const bool residual = stride == 1 && in == st.c;
      y = b.bn(cat(pre, j + 2), y, st.c, Activation::None, !residual,
               residual ? std::string{} : cat("features", idx));
      if (residual) y = net.add(cat("features", idx), Add{}, {x, y}, Activation::None, true);
      x = y;
      in = st.c;
    }
  }
  x = b.conv("features.18.0", x, in, 1280, 1, 1, 0);
  x = b.bn("features.18.1", x, 1280, Activation::ReLU6, true, "features.18");
  x = net.add("avgpool", AdaptiveAvgPool{1, 1}, {x});
  b.linear("classifier.1", x, 1280, classes);
}

void build_squeezenet1_0(Network& net, Builder& b, int classes) {
  struct Fire { int idx, in, squeeze, e1, e3; };
  int x = net.add_input();
  x = b.conv("features.0", x, 3, 96, 7, 2, 0, 1, true, Activation::ReLU, true);
  x = net.add("features.2", MaxPool{3, 2, 0, true}, {x});
  auto fire = [&](const Fire& f) {
    const std::string pre = cat("features", f.idx);
    const int s = b.conv(pre + ".squeeze", x, f.in, f.squeeze, 1, 1, 0, 1, true, Activation::ReLU);
    const int e1 = b.conv(pre + ".expand1x1", s, f.squeeze, f.e1, 1, 1, 0, 1, true, Activation::ReLU);
    const int e3 = b.conv(pre + ".expand3x3", s, f.squeeze, f.e3, 3, 1, 1, 1, true, Activation::ReLU);
    x = net.add(pre, Concat{}, {e1, e3}, Activation::None, true);
  };
  fire({3, 96, 16, 64, 64});
  fire({4, 128, 16, 64, 64});
  fire({5, 128, 32, 128, 128});
  x = net.add("features.6", MaxPool{3, 2, 0, true}, {x});
  fire({7, 256, 32, 128, 128});
  fire({8, 256, 48, 192, 192});
  fire({9, 384, 48, 192, 192});
  fire({10, 384, 64, 256, 256});
  x = net.add("features.11", MaxPool{3, 2, 0, true}, {x});
  fire({12, 512, 64, 256, 256});
  x = b.conv("classifier.1", x, 512, classes, 1, 1, 0, 1, true, Activation::ReLU);
  net.add("classifier.3", AdaptiveAvgPool{1, 1}, {x});
}

void build_efficientnet_b0(Network& net, Builder& b, int classes) {
  struct Stage { int expand, k, s, in, out, n; };
  const std::array<Stage, 7> stages{{{1, 3, 1, 32, 16, 1}, {6, 3, 2, 16, 24, 2}, {6, 5, 2, 24, 40, 2},
                                     {6, 3, 2, 40, 80, 3}, {6, 5, 1, 80, 112, 3}, {6, 5, 2, 112, 192, 4},
                                     {6, 3, 1, 192, 320, 1}}};
  int x = net.add_input();
  x = b.conv("features.0.0", x, 3, 32, 3, 2, 1);
  x = b.bn("features.0.1", x, 32, Activation::SiLU, true, "features.0");
  for (int si = 0; si < 7; ++si) {
    const Stage& st = stages[static_cast<std::size_t>(si)];
    for (int j = 0; j < st.n; ++j) {
      const std::string name = cat(cat("features", si + 1), j);
      const std::string pre = name + ".block";
      const int in = j == 0 ? st.in : st.out;
      const int stride = j == 0 ? st.s : 1;
      const int hidden = in * st.expand;
      int y = x;
      int bi = 0;
      if (st.expand != 1) {
        y = b.conv(cat(pre, bi) + ".0", y, in, hidden, 1, 1, 0);
        y = b.bn(cat(pre, bi) + ".1", y, hidden, Activation::SiLU);
        ++bi;
      }
      y = b.conv(cat(pre, bi) + ".0", y, hidden, hidden, st.k, stride, (st.k - 1) / 2, hidden);
      y = b.bn(cat(pre, bi) + ".1", y, hidden, Activation::SiLU);
      ++bi;
      const std::string se = cat(pre, bi);
      const int squeeze = std::max(1, in / 4);
      int g = net.add(se + ".avgpool", AdaptiveAvgPool{1, 1}, {y});
      g = b.conv(se + ".fc1", g, hidden, squeeze, 1, 1, 0, 1, true, Activation::SiLU);
      g = b.conv(se + ".fc2", g, squeeze, hidden, 1, 1, 0, 1, true, Activation::Sigmoid);
      y = net.add(se + ".scale", ChannelScale{}, {y, g});
      ++bi;
      y = b.conv(cat(pre, bi) + ".0", y, hidden, st.out, 1, 1, 0);
      const bool residual = stride == 1 && in == st.out;
      y = b.bn(cat(pre, bi) + ".1", y, st.out, Activation::None, !residual,
               residual ? std::string{} : name);
      if (residual) y = net.add(name, Add{}, {x, y}, Activation::None, true);
      x = y;
    }
  }
  x = b.conv("features.8.0", x, 320, 1280, 1, 1, 0);
  x = b.bn("features.8.1", x, 1280, Activation::SiLU, true, "features.8");
  x = net.add("avgpool", AdaptiveAvgPool{1, 1}, {x});
  b.linear("classifier.1", x, 1280, classes);
}

struct Entry {
  const char* name;
  const char* target;
  void (*build)(Network&, Builder&, int);
};

const std::array<Entry, 6> kRegistry{{
    {"vgg16", "features.28", build_vgg16},
    {"resnet50", "layer4.2", build_resnet50},
    {"densenet121", "features.norm5", build_densenet121},
    {"mobilenet_v2", "features.17", build_mobilenet_v2},
    {"squeezenet1_0", "features.12", build_squeezenet1_0},
    {"efficientnet_b0", "features.7.0", build_efficientnet_b0},
}};

const Entry& lookup(std::string_view arch) {
  for (const Entry& e : kRegistry)
    if (arch == e.name) return e;
  throw std::invalid_argument("unsupported model: " + std::string(arch));
}

}  // namespace

const std::vector<std::string>& supported_architectures() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const Entry& e : kRegistry) out.emplace_back(e.name);
    return out;
  }();
  return names;
}

bool is_supported_architecture(std::string_view arch) {
  return std::any_of(kRegistry.begin(), kRegistry.end(), [&](const Entry& e) { return arch == e.name; });
}

std::string default_target_layer(std::string_view arch) { return lookup(arch).target; }

Network build_model(std::string_view arch, WeightSource& weights, int num_classes) {
  const Entry& e = lookup(arch);
  if (num_classes < 1) throw std::invalid_argument("num_classes must be positive");
  Network net;
  Builder b(net, weights);
  e.build(net, b, num_classes);
  return net;
}

}  // namespace camq::nn
