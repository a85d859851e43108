#include "doctest.h"

#include <cstring>
#include <random>

#include "camq/cam.hpp"
#include "camq/metrics.hpp"
#include "quadrant_task.hpp"

using namespace camq;

namespace {

GridF grid(std::initializer_list<float> v, int h, int w) {
  GridF g(h, w);
  std::copy(v.begin(), v.end(), g.data());
  return g;
}

nn::Matrix randn(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, float sd) {
  std::normal_distribution<float> d(0.0f, sd);
  return nn::Matrix::NullaryExpr(r, c, [&] { return d(rng); });
}

/// input -> conv "feat" (ReLU) -> conv (SiLU) -> global pool -> linear.
nn::Network small_net(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  nn::Network net;
  int x = net.add_input();
  nn::Conv2d c1;
  c1.in_channels = 2;
  c1.out_channels = 4;
  c1.kernel = 3;
  c1.padding = 1;
  c1.weight = randn(rng, 4, 18, 0.5f);
  c1.bias = nn::Vector::Constant(4, 0.2f);
  x = net.add("feat", c1, {x}, nn::Activation::ReLU);
  nn::Conv2d c2;
  c2.in_channels = 4;
  c2.out_channels = 3;
  c2.kernel = 3;
  c2.weight = randn(rng, 3, 36, 0.5f);
  c2.bias = nn::Vector::Zero(3);
  x = net.add("head", c2, {x}, nn::Activation::SiLU);
  x = net.add("pool", nn::AdaptiveAvgPool{1, 1}, {x});
  net.add("fc", nn::Linear{randn(rng, 3, 3, 1.0f), nn::Vector::Zero(3)}, {x});
  return net;
}

nn::Tensor random_input(std::mt19937_64& rng, int c, int h, int w) {
  return nn::Tensor(randn(rng, c, h * w, 1.0f), h, w);
}

}  // namespace

TEST_CASE("normalize_heatmap") {
  const GridF n = normalize_heatmap(grid({0, 5, 10, 5}, 2, 2));
  CHECK((n == grid({0, 0.5f, 1, 0.5f}, 2, 2)).all());
  CHECK((normalize_heatmap(GridF::Constant(3, 3, 4.0f)) == 0.0f).all());
  std::mt19937_64 rng(1);
  for (int i = 0; i < 20; ++i) {
    const GridF r = normalize_heatmap(randn(rng, 6, 7, 3.0f).array());
    CHECK(r.minCoeff() == 0.0f);
    CHECK(r.maxCoeff() == 1.0f);
  }
  CHECK_THROWS_AS(normalize_heatmap(grid({0, NAN}, 1, 2)), std::invalid_argument);
}

TEST_CASE("upsample") {
  CHECK((upsample(GridF::Constant(1, 1, 0.3f), 5, 7) == 0.3f).all());
  const GridF g = grid({0.1f, 0.9f, 0.4f, 0.0f, 0.2f, 0.7f}, 2, 3);
  CHECK((upsample(g, 2, 3) == g).all());
  const GridF r = upsample(grid({0, 1, 2, 3}, 2, 2), 4, 4);
  const float a[4] = {0.0f, 0.25f, 0.75f, 1.0f};
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(r(y, x) == doctest::Approx(2 * a[y] + a[x]));
  CHECK_THROWS_AS(upsample(g, 0, 3), std::invalid_argument);
}

TEST_CASE("Grad-CAM++ matches a finite-difference reconstruction") {
  std::mt19937_64 rng(2);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const nn::Network net = small_net(seed);
    const nn::Tensor x = random_input(rng, 2, 6, 6);
    const CamResult res = compute_gradcampp(net, x, "feat");
    const int cls = res.class_index;
    const int target = *net.find("feat");
    const nn::Tensor acts = net.forward(x).out[static_cast<std::size_t>(target)];

    // gradient of the class score by perturbing the target activations
    auto score_with = [&](int c, int i, float delta) {
      nn::OutputHook hook = [&](const nn::Node& node, nn::Tensor& out) {
        if (node.name == "feat") out.data()(c, i) += delta;
      };
      return static_cast<double>(nn::flatten_output(net.forward(x, hook))(cls));
    };
    const float h = 1e-2f;
    GridD cam = GridD::Zero(6, 6);
    for (int c = 0; c < acts.channels(); ++c) {
      double sum_a = 0.0;
      for (int i = 0; i < 36; ++i) sum_a += acts.data()(c, i);
      double w = 0.0;
      for (int i = 0; i < 36; ++i) {
        const double g = (score_with(c, i, h) - score_with(c, i, -h)) / (2.0 * h);
        const double denom = 2 * g * g + sum_a * g * g * g;
        const double alpha = (g == 0.0 || denom == 0.0) ? 0.0 : g * g / denom;
        w += alpha * std::max(g, 0.0);
      }
      for (int i = 0; i < 36; ++i) cam(i / 6, i % 6) += w * acts.data()(c, i);
    }
    cam = cam.max(0.0);
    const GridF expected = normalize_minmax(cam.cast<float>());
    CHECK(res.heatmap.rows() == 6);
    CHECK((res.heatmap - expected).abs().maxCoeff() < 2e-3f);
  }
}

TEST_CASE("invalid targets and classes") {
  const nn::Network net = small_net(1);
  std::mt19937_64 rng(4);
  const nn::Tensor x = random_input(rng, 2, 6, 6);
  CHECK_THROWS_WITH(compute_gradcampp(net, x, "nope"), "invalid target layer");
  CHECK_THROWS_WITH(compute_gradcampp(net, x, "input"), "invalid target layer");
  CHECK_THROWS_WITH(compute_gradcampp(net, x, "pool"), "invalid target layer");
  CHECK_THROWS_WITH(compute_gradcampp(net, x, "fc"), "invalid target layer");
  CHECK_THROWS_AS(compute_gradcampp(net, x, "feat", 3), std::out_of_range);
  CHECK(compute_gradcampp(net, x, "feat", 2).class_index == 2);
}

TEST_CASE("zeroed target activations give the zero map") {
  const nn::Network net = small_net(2);
  std::mt19937_64 rng(5);
  const nn::Tensor x = random_input(rng, 2, 6, 6);
  nn::OutputHook zero = [](const nn::Node& node, nn::Tensor& out) {
    if (node.name == "feat") out.data().setZero();
  };
  const CamResult r = compute_gradcampp(net, x, "feat", std::nullopt, zero);
  CHECK((r.heatmap == 0.0f).all());
}

TEST_CASE("no gradient at the target sets the flag") {
  nn::Network net = small_net(3);
  nn::Node& head = net.node(*net.find("head"));
  head.activation = nn::Activation::ReLU;
  std::get<nn::Conv2d>(head.op).bias.setConstant(-1e6f);  // dead ReLU above the target
  std::mt19937_64 rng(6);
  const CamResult r = compute_gradcampp(net, random_input(rng, 2, 6, 6), "feat");
  CHECK(r.zero_gradient);
  CHECK((r.heatmap == 0.0f).all());
}

TEST_CASE("quadrant classifier localizes its evidence") {
  const auto train = testing::make_quadrant_samples(400, 11);
  const auto test = testing::make_quadrant_samples(40, 12);
  nn::Network net = testing::make_quadrant_net(13);
  const auto report = testing::train_quadrant_net(net, train, 14);
  REQUIRE(report.train_accuracy >= 0.99);
  const auto base = std::make_shared<const nn::Network>(std::move(net));
  const QuantizedModel f32(base, quant::PrecisionLevel::f32()), i8(base, quant::PrecisionLevel::int8());

  double mass = 0.0;
  for (const auto& s : test) {
    const CamResult a = compute_gradcampp(f32, s.image, "conv2");
    const CamResult b = compute_gradcampp(f32, s.image, "conv2");
    CHECK(std::memcmp(a.heatmap.data(), b.heatmap.data(), sizeof(float) * a.heatmap.size()) == 0);
    const CamResult raw = compute_gradcampp(*base, s.image, "conv2");
    CHECK((raw.heatmap == a.heatmap).all());
    const auto self = metrics::metric_triple(a.heatmap, a.heatmap);
    CHECK(self.sim == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(*self.cc == doctest::Approx(1.0).epsilon(1e-12));
    mass += testing::quadrant_mass(a.heatmap, s.label);
    CHECK(compute_gradcampp(i8, s.image, "conv2").heatmap.allFinite());
  }
  CHECK(mass / static_cast<double>(test.size()) >= 0.6);
}
