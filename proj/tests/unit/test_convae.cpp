#include <cmath>
#include <limits>

#include "doctest.h"
#include "gwe/convae.hpp"
#include "gwe/error.hpp"
#include "gwe/glyph.hpp"
#include "test_support.hpp"

using namespace gwe;
using namespace gwe::convae;

namespace {

// 12 -> 6 -> 3 -> 2 -> 1 -> 1, small enough for exhaustive finite differences.
Geometry small_geometry() {
  Geometry g;
  g.input_size = 12;
  g.levels[0] = {1, 2, 3, 2, 1};
  g.levels[1] = {2, 3, 3, 2, 1};
  g.levels[2] = {3, 3, 3, 2, 1};
  g.levels[3] = {3, 4, 2, 1, 0};
  g.levels[4] = {4, 5, 1, 1, 0};
  return g;
}

ConvAEParams random_params(const Geometry& g, std::uint64_t seed) {
  auto p = init_params(g, seed);
  Rng rng(seed + 100);
  for (int l = 0; l < kLevels; ++l) {
    testing::fill_random(p.kernels[l], rng, 0.6);
    for (auto& b : p.encoder_biases[l]) b = rng.uniform(0.0, 0.3);
    for (auto& b : p.decoder_biases[l]) b = rng.uniform(0.0, 0.3);
  }
  return p;
}

std::vector<FeatureMap> random_batch(int n, int side, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureMap> batch;
  for (int i = 0; i < n; ++i) {
    FeatureMap m(1, side, side);
    for (auto& v : m.data) v = rng.uniform();
    batch.push_back(m);
  }
  return batch;
}

double batch_loss(const std::vector<FeatureMap>& batch, const ConvAEParams& p, double l1) {
  double total = 0.0;
  for (const auto& x : batch) {
    const auto t = forward(x, p);
    total += loss(x, t.reconstruction(), std::span(t.encoded).subspan(1, kLevels), l1);
  }
  return total;
}

FeatureMap linear_map(int side, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMap m(1, side, side);
  for (auto& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

}  // namespace

TEST_CASE("layer size formula") {
  CHECK(ConvLayerSpec{1, 8, 5, 2, 2}.output_size(60) == 30);
  CHECK(ConvLayerSpec{1, 1, 3, 1, 1}.output_size(7) == 7);
  CHECK(ConvLayerSpec{1, 1, 4, 1, 0}.output_size(4) == 1);
  const auto sizes = Geometry::standard().sizes();
  CHECK(sizes == std::array<int, 6>{60, 30, 15, 8, 4, 1});
  CHECK(Geometry::standard().feature_dim() == 512);
  Geometry broken = Geometry::standard();
  broken.levels[2].in_channels = 7;
  CHECK_THROWS_AS(broken.validate(), Error);
}

TEST_CASE("conv_forward examples") {
  const ConvLayerSpec s{1, 1, 5, 2, 2};
  const FeatureMap x(1, 60, 60, 0.5);
  const std::vector<double> k(25, 0.1), b{0.0};
  const auto y = conv_forward(x, s, k, b, Activation::kLinear);
  CHECK(y.channels == 1);
  CHECK(y.height == 30);
  CHECK(y.width == 30);

  const ConvLayerSpec id{1, 1, 1, 1, 0};
  const auto m = linear_map(9, 3);
  const std::vector<double> one{1.0}, zero{0.0};
  CHECK(conv_forward(m, id, one, zero, Activation::kLinear) == m);

  const auto z = conv_forward(FeatureMap(1, 60, 60), s, k, b, Activation::kLinear);
  for (double v : z.data) CHECK(v == 0.0);

  try {
    conv_forward(FeatureMap(2, 10, 10), s, k, b, Activation::kLinear, 3);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("level 3") != std::string::npos);
  }
}

TEST_CASE("deconv_forward examples") {
  const auto g = Geometry::standard();
  const auto p = init_params(g, 4);
  const auto sizes = g.sizes();
  for (int l = 0; l < kLevels; ++l) {
    const auto& s = g.levels[l];
    FeatureMap x(s.in_channels, sizes[l], sizes[l], 0.3);
    const auto y = conv_forward(x, s, p.kernels[l], p.encoder_biases[l], Activation::kRelu);
    const auto back = deconv_forward(y, s, p.kernels[l], p.decoder_biases[l], Activation::kRelu, sizes[l]);
    CHECK(back.channels == x.channels);
    CHECK(back.height == x.height);
    CHECK(back.width == x.width);
  }

  const ConvLayerSpec id{1, 1, 1, 1, 0};
  const double w = 0.7;
  const std::vector<double> kw{w}, zero{0.0};
  const auto x = linear_map(6, 8);
  const auto y = deconv_forward(conv_forward(x, id, kw, zero, Activation::kLinear), id, kw, zero,
                                Activation::kLinear, 6);
  for (std::size_t i = 0; i < x.data.size(); ++i) CHECK(y.data[i] == doctest::Approx(w * w * x.data[i]));

  const ConvLayerSpec s{2, 3, 3, 2, 1};
  const std::vector<double> kzero(s.kernel_elements(), 0.0), bias{0.25, -1.5};
  const auto out = deconv_forward(FeatureMap(3, 4, 4, 1.0), s, kzero, bias, Activation::kLinear, 8);
  for (int y2 = 0; y2 < 8; ++y2) {
    CHECK(out.at(0, y2, 3) == 0.25);
    CHECK(out.at(1, y2, 5) == -1.5);
  }
}

TEST_CASE("correlate_adjoint is the adjoint of correlate") {
  const ConvLayerSpec s{2, 3, 3, 2, 1};
  Rng rng(5);
  std::vector<double> k(s.kernel_elements());
  testing::fill_random(k, rng);
  FeatureMap x(2, 7, 7);
  testing::fill_random(x.data, rng);
  FeatureMap u(3, 4, 4);
  testing::fill_random(u.data, rng);
  const auto cx = correlate(x, s, k);
  const auto au = correlate_adjoint(u, s, k, 7);
  CHECK(dot(cx.data, u.data) == doctest::Approx(dot(x.data, au.data)).epsilon(1e-12));
}

TEST_CASE("loss examples") {
  const FeatureMap zeros(1, 60, 60), ones(1, 60, 60, 1.0);
  CHECK(loss(ones, ones, {}, 0.0) == 0.0);
  CHECK(loss(zeros, ones, {}, 0.0) == 3600.0);
  FeatureMap act(1, 2, 2);
  act.data[1] = 2.5;
  const std::vector<FeatureMap> acts{act};
  CHECK(loss(zeros, zeros, acts, 0.1) == doctest::Approx(0.25));
  CHECK_THROWS_AS(loss(zeros, FeatureMap(1, 59, 59), {}, 0.0), Error);
}

TEST_CASE("backward matches finite differences on every level") {
  const auto g = small_geometry();
  auto p = random_params(g, 11);
  const auto batch = random_batch(2, 12, 12);
  const double l1 = 0.01;
  const auto grads = backward(batch, p, l1);
  CHECK(grads.loss == doctest::Approx(batch_loss(batch, p, l1)).epsilon(1e-12));
  const auto f = [&] { return batch_loss(batch, p, l1); };
  const double h = 1e-5;  // smaller steps drown in cancellation against an O(100) loss
  for (int l = 0; l < kLevels; ++l) {
    CAPTURE(l);
    CHECK(testing::max_fd_error(f, p.kernels[l], grads.kernels[l], h) < 1e-4);
    CHECK(testing::max_fd_error(f, p.encoder_biases[l], grads.encoder_biases[l], h) < 1e-4);
    CHECK(testing::max_fd_error(f, p.decoder_biases[l], grads.decoder_biases[l], h) < 1e-4);
  }
}

TEST_CASE("tied kernel gradient is the sum of both sides") {
  const auto g = small_geometry();
  const auto p = random_params(g, 21);
  const auto batch = random_batch(1, 12, 22);
  const auto grads = backward(batch, p, 0.0);

  // Untie level 2 by hand: differentiate with respect to the encoder copy only.
  auto enc_only = [&](std::vector<double> enc_kernel) {
    const auto sizes = g.sizes();
    const auto& x0 = batch[0];
    std::array<FeatureMap, kLevels + 1> e;
    e[0] = x0;
    for (int l = 0; l < kLevels; ++l) {
      const auto& k = l == 2 ? enc_kernel : p.kernels[l];
      e[l + 1] = conv_forward(e[l], g.levels[l], k, p.encoder_biases[l], Activation::kRelu);
    }
    FeatureMap d = e[kLevels];
    for (int l = kLevels - 1; l >= 0; --l) {
      d = deconv_forward(d, g.levels[l], p.kernels[l], p.decoder_biases[l],
                         l == 0 ? Activation::kLogistic : Activation::kRelu, sizes[l]);
    }
    return loss(x0, d, {}, 0.0);
  };
  std::vector<double> k = p.kernels[2];
  std::vector<double> enc_grad(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    enc_grad[i] = testing::central_difference([&] { return enc_only(k); }, &k[i]);
  }
  double enc_norm = norm(enc_grad), diff = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) diff += std::abs(enc_grad[i] - grads.kernels[2][i]);
  CHECK(enc_norm > 0.0);
  CHECK(diff > 1e-6);  // the decoder side contributes too
}

TEST_CASE("perfect reconstruction gives zero gradients") {
  // Zero kernels and biases decode everything to logistic(0) = 0.5.
  Geometry g;
  g.input_size = 4;
  g.levels.fill({1, 1, 1, 1, 0});
  auto p = init_params(g, 1);
  for (int l = 0; l < kLevels; ++l) {
    p.kernels[l] = {0.0};
    p.encoder_biases[l] = {0.0};
    p.decoder_biases[l] = {0.0};
  }
  const std::vector<FeatureMap> batch{FeatureMap(1, 4, 4, 0.5)};
  const auto grads = backward(batch, p, 0.0);
  CHECK(grads.loss == 0.0);
  for (int l = 0; l < kLevels; ++l) {
    for (double v : grads.kernels[l]) CHECK(v == 0.0);
    for (double v : grads.decoder_biases[l]) CHECK(v == 0.0);
  }
}

TEST_CASE("regularization gradient is linear in the weight") {
  const auto g = small_geometry();
  const auto p = random_params(g, 31);
  const auto batch = random_batch(2, 12, 32);
  const auto g0 = backward(batch, p, 0.0);
  const auto g1 = backward(batch, p, 0.05);
  const auto g2 = backward(batch, p, 0.1);
  for (int l = 0; l < kLevels; ++l) {
    for (std::size_t i = 0; i < g0.kernels[l].size(); ++i) {
      CHECK(g2.kernels[l][i] - g0.kernels[l][i] ==
            doctest::Approx(2.0 * (g1.kernels[l][i] - g0.kernels[l][i])).epsilon(1e-9).scale(1e-12));
    }
  }
}

TEST_CASE("layer-wise training freezes other levels and lowers loss") {
  const auto g = small_geometry();
  auto p = random_params(g, 41);
  const auto inputs = random_batch(8, 12, 42);
  TrainConfig cfg;
  cfg.epochs_per_level = 15;
  cfg.batch = 4;
  cfg.lr = 0.02;
  cfg.l1_weight = 0.0;
  for (int level = 0; level < kLevels; ++level) {
    const auto before = p;
    const auto log = train_level(inputs, p, level, cfg);
    REQUIRE(log.size() == 15);
    CHECK(log.front().level == level + 1);
    CHECK(log.back().loss <= log.front().loss);
    for (int other = 0; other < kLevels; ++other) {
      if (other == level) continue;
      CHECK(p.kernels[other] == before.kernels[other]);
      CHECK(p.encoder_biases[other] == before.encoder_biases[other]);
      CHECK(p.decoder_biases[other] == before.decoder_biases[other]);
    }
  }
}

TEST_CASE("training is deterministic and rejects bad input") {
  const auto g = small_geometry();
  const auto init = random_params(g, 51);
  const auto inputs = random_batch(5, 12, 52);
  TrainConfig cfg;
  cfg.epochs_per_level = 2;
  cfg.batch = 2;
  const auto a = train_layerwise(inputs, init, cfg);
  const auto b = train_layerwise(inputs, init, cfg);
  CHECK(a.params == b.params);
  CHECK(a.log.size() == 10);
  CHECK_THROWS_AS(train_layerwise(std::span<const FeatureMap>{}, init, cfg), Error);
}

TEST_CASE("divergence is reported with the level") {
  const auto g = small_geometry();
  auto p = random_params(g, 61);
  p.kernels[0][0] = std::numeric_limits<double>::infinity();
  const auto inputs = random_batch(2, 12, 62);
  TrainConfig cfg;
  cfg.epochs_per_level = 1;
  CHECK_THROWS_WITH(train_level(inputs, p, 0, cfg), doctest::Contains("level 1"));
}

TEST_CASE("encode and decode on the standard network") {
  const auto p = init_params(Geometry::standard(), 3);
  SyntheticRasterizer font(4, 1);
  const auto bm = render_bitmap(0x4E00, font, {});
  const auto f = encode(bm, p);
  CHECK(f.codepoint == 0x4E00);
  REQUIRE(f.values.size() == 512);
  for (double v : f.values) CHECK(std::isfinite(v));
  CHECK(encode(bm, p) == f);
  const auto r = decode(f, p);
  CHECK(r.height == 60);
  for (double v : r.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(decode(GlyphFeature{1, {1.0, 2.0}}, p), Error);
}

TEST_CASE("checkpoint and feature files round trip exactly") {
  const auto p = random_params(small_geometry(), 71);
  const auto dir = testing::temp_dir("convae");
  save_params(dir / "p.gwt", p);
  CHECK(load_params(dir / "p.gwt") == p);

  const std::vector<GlyphFeature> feats{{0x4E00, {1.0 / 3.0, -2.5e-300, 1e300, 0.0}},
                                        {0x20, {std::nextafter(1.0, 2.0), -0.1, 7.0, -0.0}}};
  save_features(dir / "f.tsv", feats);
  const auto back = load_features(dir / "f.tsv");
  CHECK(back == feats);

  testing::write_file(dir / "bad.tsv", "U+4E00\t1 2\nU+4E01\t1\n");
  CHECK_THROWS_AS(load_features(dir / "bad.tsv"), Error);
  testing::write_file(dir / "bad.gwt", "GWETNSR1junk");
  CHECK_THROWS_AS(load_params(dir / "bad.gwt"), Error);
}
