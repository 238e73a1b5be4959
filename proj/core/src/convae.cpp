#include "gwe/convae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "gwe/error.hpp"
#include "gwe/rng.hpp"
#include "gwe/utf8.hpp"

namespace gwe::convae {

int ConvLayerSpec::output_size(int input_size) const {
  if (stride < 1) throw usage_error("stride must be >= 1");
  const int span = input_size + 2 * padding - kernel_size;
  if (span < 0) return 0;
  return span / stride + 1;
}

Geometry Geometry::standard() {
  Geometry g;
  g.input_size = kBitmapSide;
  g.levels = {{{1, 8, 5, 2, 2}, {8, 16, 5, 2, 2}, {16, 32, 3, 2, 1}, {32, 64, 3, 2, 1}, {64, 512, 4, 1, 0}}};
  return g;
}

std::array<int, kLevels + 1> Geometry::sizes() const {
  std::array<int, kLevels + 1> s{};
  s[0] = input_size;
  for (int l = 0; l < kLevels; ++l) s[static_cast<std::size_t>(l + 1)] = levels[static_cast<std::size_t>(l)].output_size(s[static_cast<std::size_t>(l)]);
  return s;
}

int Geometry::feature_dim() const {
  const int side = sizes()[kLevels];
  return levels[kLevels - 1].out_channels * side * side;
}

void Geometry::validate() const {
  if (input_size < 1) throw usage_error("geometry: input size must be positive");
  const auto s = sizes();
  for (int l = 0; l < kLevels; ++l) {
    const auto& spec = levels[static_cast<std::size_t>(l)];
    const auto name = "geometry level " + std::to_string(l + 1);
    if (spec.stride < 1 || spec.kernel_size < 1 || spec.padding < 0) throw usage_error(name + ": bad kernel/stride/padding");
    if (spec.in_channels < 1 || spec.out_channels < 1) throw usage_error(name + ": bad channel count");
    if (l == 0 && spec.in_channels != 1) throw usage_error(name + ": input must have one channel");
    if (l > 0 && spec.in_channels != levels[static_cast<std::size_t>(l - 1)].out_channels) {
      throw usage_error(name + ": channels do not chain");
    }
    if (s[static_cast<std::size_t>(l + 1)] < 1) throw usage_error(name + ": spatial size collapses");
  }
}

ConvAEParams init_params(const Geometry& geometry, std::uint64_t seed) {
  geometry.validate();
  ConvAEParams p;
  p.geometry = geometry;
  Rng rng(derive_seed(seed, "convae-init"));
  for (int l = 0; l < kLevels; ++l) {
    const auto& spec = geometry.levels[static_cast<std::size_t>(l)];
    const double fan = static_cast<double>(spec.kernel_size * spec.kernel_size) * (spec.in_channels + spec.out_channels);
    const double bound = std::sqrt(6.0 / fan);
    auto& k = p.kernels[static_cast<std::size_t>(l)];
    k.resize(spec.kernel_elements());
    for (auto& w : k) w = rng.uniform(-bound, bound);
    p.encoder_biases[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(spec.out_channels), 0.0);
    p.decoder_biases[static_cast<std::size_t>(l)].assign(static_cast<std::size_t>(spec.in_channels), 0.0);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Primitives

namespace {

void check_kernel(const ConvLayerSpec& layer, std::span<const double> kernel, int level) {
  if (kernel.size() != layer.kernel_elements()) {
    throw usage_error("level " + std::to_string(level) + ": kernel has " + std::to_string(kernel.size()) +
                      " weights, expected " + std::to_string(layer.kernel_elements()));
  }
}

double activate(double z, Activation a) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? z : 0.0;
    case Activation::kLogistic:
      return 1.0 / (1.0 + std::exp(-z));
    case Activation::kLinear:
      break;
  }
  return z;
}

// Derivative expressed through the pre-activation z and output y.
double activate_grad(double z, double y, Activation a) {
  switch (a) {
    case Activation::kRelu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::kLogistic:
      return y * (1.0 - y);
    case Activation::kLinear:
      break;
  }
  return 1.0;
}

Activation encoder_activation(int /*level*/) { return Activation::kRelu; }
Activation decoder_activation(int level) { return level == 0 ? Activation::kLogistic : Activation::kRelu; }

FeatureMap apply(const FeatureMap& pre, Activation a) {
  FeatureMap out = pre;
  for (auto& v : out.data) v = activate(v, a);
  return out;
}

void add_bias(FeatureMap& m, std::span<const double> bias) {
  const std::size_t plane = static_cast<std::size_t>(m.height) * m.width;
  for (int c = 0; c < m.channels; ++c) {
    const double b = bias[static_cast<std::size_t>(c)];
    auto* p = m.data.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b;
  }
}

}  // namespace

namespace {

std::size_t patch_size(const ConvLayerSpec& layer) {
  return static_cast<std::size_t>(layer.in_channels) * layer.kernel_size * layer.kernel_size;
}

// Output-major patch matrix: row o = (oy, ox) holds the input values under the
// kernel footprint in (ci, ky, kx) order, zero where the footprint hits padding.
std::vector<double> im2col(const FeatureMap& x, const ConvLayerSpec& layer, int out_h, int out_w) {
  const int k = layer.kernel_size, s = layer.stride, p = layer.padding;
  const std::size_t patch = patch_size(layer);
  std::vector<double> cols(static_cast<std::size_t>(out_h) * out_w * patch, 0.0);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      double* row = &cols[(static_cast<std::size_t>(oy) * out_w + ox) * patch];
      for (int ci = 0; ci < layer.in_channels; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= x.height) continue;
          const double* src = &x.data[(static_cast<std::size_t>(ci) * x.height + iy) * x.width];
          double* dst = row + (static_cast<std::size_t>(ci) * k + ky) * k;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * s - p + kx;
            if (ix >= 0 && ix < x.width) dst[kx] = src[ix];
          }
        }
      }
    }
  }
  return cols;
}

// Scatter-add of a patch matrix back onto an h×w map (adjoint of im2col).
void col2im(std::span<const double> cols, const ConvLayerSpec& layer, int out_h, int out_w, FeatureMap& x) {
  const int k = layer.kernel_size, s = layer.stride, p = layer.padding;
  const std::size_t patch = patch_size(layer);
  for (int oy = 0; oy < out_h; ++oy) {
    for (int ox = 0; ox < out_w; ++ox) {
      const double* row = &cols[(static_cast<std::size_t>(oy) * out_w + ox) * patch];
      for (int ci = 0; ci < layer.in_channels; ++ci) {
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= x.height) continue;
          double* dst = &x.data[(static_cast<std::size_t>(ci) * x.height + iy) * x.width];
          const double* src = row + (static_cast<std::size_t>(ci) * k + ky) * k;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * s - p + kx;
            if (ix >= 0 && ix < x.width) dst[ix] += src[kx];
          }
        }
      }
    }
  }
}

}  // namespace

FeatureMap correlate(const FeatureMap& input, const ConvLayerSpec& layer, std::span<const double> kernel) {
  const int out_h = layer.output_size(input.height);
  const int out_w = layer.output_size(input.width);
  FeatureMap out(layer.out_channels, out_h, out_w);
  const std::size_t patch = patch_size(layer);
  const std::size_t positions = static_cast<std::size_t>(out_h) * out_w;
  const auto cols = im2col(input, layer, out_h, out_w);
  for (int co = 0; co < layer.out_channels; ++co) {
    const double* w = &kernel[static_cast<std::size_t>(co) * patch];
    double* y = &out.data[static_cast<std::size_t>(co) * positions];
    for (std::size_t o = 0; o < positions; ++o) {
      const double* c = &cols[o * patch];
      double acc = 0.0;
      for (std::size_t r = 0; r < patch; ++r) acc += w[r] * c[r];
      y[o] = acc;
    }
  }
  return out;
}

FeatureMap correlate_adjoint(const FeatureMap& input, const ConvLayerSpec& layer, std::span<const double> kernel,
                             int output_size) {
  FeatureMap out(layer.in_channels, output_size, output_size);
  const std::size_t patch = patch_size(layer);
  const std::size_t positions = static_cast<std::size_t>(input.height) * input.width;
  std::vector<double> cols(positions * patch, 0.0);
  for (int co = 0; co < layer.out_channels; ++co) {
    const double* w = &kernel[static_cast<std::size_t>(co) * patch];
    const double* y = &input.data[static_cast<std::size_t>(co) * positions];
    for (std::size_t o = 0; o < positions; ++o) {
      const double v = y[o];
      if (v == 0.0) continue;
      double* c = &cols[o * patch];
      for (std::size_t r = 0; r < patch; ++r) c[r] += v * w[r];
    }
  }
  col2im(cols, layer, input.height, input.width, out);
  return out;
}

std::vector<double> kernel_gradient(const FeatureMap& x, const FeatureMap& grad_y, const ConvLayerSpec& layer) {
  const std::size_t patch = patch_size(layer);
  const std::size_t positions = static_cast<std::size_t>(grad_y.height) * grad_y.width;
  std::vector<double> grad(layer.kernel_elements(), 0.0);
  const auto cols = im2col(x, layer, grad_y.height, grad_y.width);
  for (int co = 0; co < layer.out_channels; ++co) {
    double* g = &grad[static_cast<std::size_t>(co) * patch];
    const double* gy = &grad_y.data[static_cast<std::size_t>(co) * positions];
    for (std::size_t o = 0; o < positions; ++o) {
      const double v = gy[o];
      if (v == 0.0) continue;
      const double* c = &cols[o * patch];
      for (std::size_t r = 0; r < patch; ++r) g[r] += v * c[r];
    }
  }
  return grad;
}

FeatureMap conv_forward(const FeatureMap& input, const ConvLayerSpec& layer, std::span<const double> kernel,
                        std::span<const double> bias, Activation activation, int level) {
  if (input.channels != layer.in_channels) {
    throw usage_error("level " + std::to_string(level) + ": input has " + std::to_string(input.channels) +
                      " channels, layer expects " + std::to_string(layer.in_channels));
  }
  check_kernel(layer, kernel, level);
  if (bias.size() != static_cast<std::size_t>(layer.out_channels)) {
    throw usage_error("level " + std::to_string(level) + ": encoder bias size mismatch");
  }
  FeatureMap pre = correlate(input, layer, kernel);
  add_bias(pre, bias);
  return apply(pre, activation);
}

FeatureMap deconv_forward(const FeatureMap& input, const ConvLayerSpec& layer, std::span<const double> kernel,
                          std::span<const double> bias, Activation activation, int output_size, int level) {
  if (input.channels != layer.out_channels) {
    throw usage_error("level " + std::to_string(level) + ": decoder input has " + std::to_string(input.channels) +
                      " channels, layer expects " + std::to_string(layer.out_channels));
  }
  if (layer.output_size(output_size) != input.height || layer.output_size(output_size) != input.width) {
    throw usage_error("level " + std::to_string(level) + ": decoder output size " + std::to_string(output_size) +
                      " does not pair with input size " + std::to_string(input.height));
  }
  check_kernel(layer, kernel, level);
  if (bias.size() != static_cast<std::size_t>(layer.in_channels)) {
    throw usage_error("level " + std::to_string(level) + ": decoder bias size mismatch");
  }
  FeatureMap pre = correlate_adjoint(input, layer, kernel, output_size);
  add_bias(pre, bias);
  return apply(pre, activation);
}

// ---------------------------------------------------------------------------
// Network

ForwardTrace forward(const FeatureMap& input, const ConvAEParams& params, int depth) {
  const auto& g = params.geometry;
  if (depth < 1 || depth > kLevels) throw usage_error("forward: depth out of range");
  if (input.channels != 1 || input.height != g.input_size || input.width != g.input_size) {
    throw usage_error("convae: input must be 1x" + std::to_string(g.input_size) + "x" + std::to_string(g.input_size));
  }
  const auto sizes = g.sizes();
  ForwardTrace t;
  t.depth = depth;
  t.encoded[0] = input;
  for (int l = 0; l < depth; ++l) {
    const auto L = static_cast<std::size_t>(l);
    const auto& spec = g.levels[L];
    if (t.encoded[L].channels != spec.in_channels) throw usage_error("level " + std::to_string(l + 1) + ": channel mismatch");
    check_kernel(spec, params.kernels[L], l + 1);
    t.encoder_pre[L] = correlate(t.encoded[L], spec, params.kernels[L]);
    add_bias(t.encoder_pre[L], params.encoder_biases[L]);
    t.encoded[L + 1] = apply(t.encoder_pre[L], encoder_activation(l));
  }
  t.decoded[static_cast<std::size_t>(depth)] = t.encoded[static_cast<std::size_t>(depth)];
  for (int l = depth - 1; l >= 0; --l) {
    const auto L = static_cast<std::size_t>(l);
    t.decoder_pre[L] = correlate_adjoint(t.decoded[L + 1], g.levels[L], params.kernels[L], sizes[L]);
    add_bias(t.decoder_pre[L], params.decoder_biases[L]);
    t.decoded[L] = apply(t.decoder_pre[L], decoder_activation(l));
  }
  return t;
}

FeatureMap bitmap_to_map(const Bitmap& bitmap) {
  FeatureMap m(1, kBitmapSide, kBitmapSide);
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = bitmap.pixels[i] / 255.0;
  return m;
}

GlyphFeature encode(const Bitmap& bitmap, const ConvAEParams& params) {
  if (params.geometry.input_size != kBitmapSide) throw usage_error("encode: network does not take 60x60 bitmaps");
  FeatureMap x = bitmap_to_map(bitmap);
  for (int l = 0; l < kLevels; ++l) {
    const auto L = static_cast<std::size_t>(l);
    x = conv_forward(x, params.geometry.levels[L], params.kernels[L], params.encoder_biases[L], encoder_activation(l), l + 1);
  }
  for (double v : x.data) {
    if (!std::isfinite(v)) throw numeric_error("numeric overflow while encoding " + utf8::codepoint_label(bitmap.codepoint));
  }
  return {bitmap.codepoint, std::move(x.data)};
}

FeatureMap decode(const GlyphFeature& feature, const ConvAEParams& params) {
  const auto& g = params.geometry;
  const auto sizes = g.sizes();
  const int side = sizes[kLevels];
  if (feature.values.size() != static_cast<std::size_t>(g.feature_dim())) {
    throw usage_error("decode: feature has " + std::to_string(feature.values.size()) + " values, expected " +
                      std::to_string(g.feature_dim()));
  }
  FeatureMap x(g.levels[kLevels - 1].out_channels, side, side);
  x.data = feature.values;
  for (int l = kLevels - 1; l >= 0; --l) {
    const auto L = static_cast<std::size_t>(l);
    x = deconv_forward(x, g.levels[L], params.kernels[L], params.decoder_biases[L], decoder_activation(l), sizes[L], l + 1);
  }
  return x;
}

double loss(const FeatureMap& input, const FeatureMap& reconstruction, std::span<const FeatureMap> encoder_activations,
            double l1_weight) {
  if (input.data.size() != reconstruction.data.size() || input.channels != reconstruction.channels) {
    throw usage_error("loss: input and reconstruction shapes differ");
  }
  double sq = 0.0;
  for (std::size_t i = 0; i < input.data.size(); ++i) {
    const double d = reconstruction.data[i] - input.data[i];
    sq += d * d;
  }
  double l1 = 0.0;
  for (const auto& a : encoder_activations) {
    for (double v : a.data) l1 += std::abs(v);
  }
  return sq + l1_weight * l1;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void accumulate(std::vector<double>& into, const std::vector<double>& add) {
  if (into.empty()) {
    into = add;
    return;
  }
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += add[i];
}

std::vector<double> channel_sums(const FeatureMap& m) {
  std::vector<double> s(static_cast<std::size_t>(m.channels), 0.0);
  const std::size_t plane = static_cast<std::size_t>(m.height) * m.width;
  for (int c = 0; c < m.channels; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += m.data[c * plane + i];
    s[static_cast<std::size_t>(c)] = acc;
  }
  return s;
}

// grad_pre = grad_post * act'(pre)
FeatureMap through_activation(const FeatureMap& grad_post, const FeatureMap& pre, const FeatureMap& post, Activation a) {
  FeatureMap g = grad_post;
  for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] *= activate_grad(pre.data[i], post.data[i], a);
  return g;
}

}  // namespace

Gradients backward(std::span<const FeatureMap> batch, const ConvAEParams& params, double l1_weight,
                   std::span<const int> active, int depth) {
  const auto& g = params.geometry;
  const auto sizes = g.sizes();
  std::array<bool, kLevels> is_active{};
  int lowest_active = kLevels;
  for (int l : active) {
    if (l < 0 || l >= depth) throw usage_error("backward: level index outside the path");
    is_active[static_cast<std::size_t>(l)] = true;
    lowest_active = std::min(lowest_active, l);
  }
  Gradients grads;
  for (const auto& input : batch) {
    const ForwardTrace t = forward(input, params, depth);
    grads.loss += loss(input, t.reconstruction(), std::span(t.encoded).subspan(1, static_cast<std::size_t>(depth)), l1_weight);

    // Decoder, from the reconstruction back to the code.
    FeatureMap grad = t.reconstruction();
    for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] = 2.0 * (grad.data[i] - input.data[i]);
    for (int l = 0; l < depth; ++l) {
      const auto L = static_cast<std::size_t>(l);
      const FeatureMap gpre = through_activation(grad, t.decoder_pre[L], t.decoded[L], decoder_activation(l));
      if (is_active[L]) {
        accumulate(grads.decoder_biases[L], channel_sums(gpre));
        // Transposed convolution: roles of x and grad_y swap.
        accumulate(grads.kernels[L], kernel_gradient(gpre, t.decoded[L + 1], g.levels[L]));
      }
      grad = correlate(gpre, g.levels[L], params.kernels[L]);
    }

    // Encoder, from the code down to the lowest active level.
    for (int l = depth - 1; l >= lowest_active; --l) {
      const auto L = static_cast<std::size_t>(l);
      for (std::size_t i = 0; i < grad.data.size(); ++i) grad.data[i] += l1_weight * sign(t.encoded[L + 1].data[i]);
      const FeatureMap gpre = through_activation(grad, t.encoder_pre[L], t.encoded[L + 1], encoder_activation(l));
      if (is_active[L]) {
        accumulate(grads.encoder_biases[L], channel_sums(gpre));
        accumulate(grads.kernels[L], kernel_gradient(t.encoded[L], gpre, g.levels[L]));
      }
      if (l > lowest_active) grad = correlate_adjoint(gpre, g.levels[L], params.kernels[L], sizes[L]);
    }
  }
  return grads;
}

Gradients backward(std::span<const FeatureMap> batch, const ConvAEParams& params, double l1_weight) {
  static constexpr std::array<int, kLevels> kAll{0, 1, 2, 3, 4};
  return backward(batch, params, l1_weight, kAll);
}

// ---------------------------------------------------------------------------
// Training

std::vector<EpochLog> train_level(std::span<const FeatureMap> inputs, ConvAEParams& params, int level,
                                  const TrainConfig& config) {
  if (inputs.empty()) throw usage_error("train_layerwise: need at least one bitmap");
  if (level < 0 || level >= kLevels) throw usage_error("train_level: level out of range");
  if (config.batch < 1) throw usage_error("batch must be >= 1");
  const auto L = static_cast<std::size_t>(level);
  AdagradState kernel_state, enc_state, dec_state;
  const std::array<int, 1> active{level};
  const int depth = config.path == TrainPath::kFull ? kLevels : level + 1;
  Rng rng(derive_seed(derive_seed(config.seed, "convae-order"), static_cast<std::uint64_t>(level)));
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<EpochLog> log;
  std::vector<FeatureMap> batch;
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs_per_level; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch)) {
      batch.clear();
      const auto end = std::min(order.size(), start + static_cast<std::size_t>(config.batch));
      for (auto i = start; i < end; ++i) batch.push_back(inputs[order[i]]);
      const Gradients grads = backward(batch, params, config.l1_weight, active, depth);
      if (!std::isfinite(grads.loss)) {
        throw numeric_error("convae diverged at level " + std::to_string(level + 1) + ", step " + std::to_string(step));
      }
      epoch_loss += grads.loss;
      const double lr = config.lr * config.level_lr_scale[L];
      adagrad_step(params.kernels[L], grads.kernels[L], kernel_state, lr);
      adagrad_step(params.encoder_biases[L], grads.encoder_biases[L], enc_state, lr);
      adagrad_step(params.decoder_biases[L], grads.decoder_biases[L], dec_state, lr);
      ++step;
    }
    log.push_back({level + 1, epoch, epoch_loss});
  }
  return log;
}

TrainResult train_layerwise(std::span<const FeatureMap> inputs, ConvAEParams init, const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  TrainResult result{std::move(init), {}};
  for (int level = 0; level < kLevels; ++level) {
    for (const auto& entry : train_level(inputs, result.params, level, config)) {
      if (on_epoch) on_epoch(entry);
      result.log.push_back(entry);
    }
  }
  return result;
}

TrainResult train_layerwise(const std::vector<Bitmap>& bitmaps, const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch) {
  std::vector<FeatureMap> inputs;
  inputs.reserve(bitmaps.size());
  for (const auto& b : bitmaps) inputs.push_back(bitmap_to_map(b));
  return train_layerwise(inputs, init_params(Geometry::standard(), config.seed), config, on_epoch);
}

double reconstruction_mse(std::span<const FeatureMap> inputs, const ConvAEParams& params) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& x : inputs) {
    const auto t = forward(x, params);
    total += loss(x, t.reconstruction(), {}, 0.0);
    count += x.data.size();
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

// ---------------------------------------------------------------------------
// Persistence

TensorFile to_tensor_file(const ConvAEParams& params) {
  TensorFile f;
  f.kind = "convae";
  f.meta.emplace_back("levels", kLevels);
  f.meta.emplace_back("input_size", params.geometry.input_size);
  for (int l = 0; l < kLevels; ++l) {
    const auto& s = params.geometry.levels[static_cast<std::size_t>(l)];
    const auto p = "level" + std::to_string(l + 1) + ".";
    f.meta.emplace_back(p + "in", s.in_channels);
    f.meta.emplace_back(p + "out", s.out_channels);
    f.meta.emplace_back(p + "kernel", s.kernel_size);
    f.meta.emplace_back(p + "stride", s.stride);
    f.meta.emplace_back(p + "padding", s.padding);
  }
  for (int l = 0; l < kLevels; ++l) {
    const auto L = static_cast<std::size_t>(l);
    const auto& s = params.geometry.levels[L];
    const auto p = "level" + std::to_string(l + 1) + ".";
    f.tensors.push_back({p + "kernel",
                         {static_cast<std::uint64_t>(s.out_channels), static_cast<std::uint64_t>(s.in_channels),
                          static_cast<std::uint64_t>(s.kernel_size), static_cast<std::uint64_t>(s.kernel_size)},
                         params.kernels[L]});
    f.tensors.push_back({p + "encoder_bias", {static_cast<std::uint64_t>(s.out_channels)}, params.encoder_biases[L]});
    f.tensors.push_back({p + "decoder_bias", {static_cast<std::uint64_t>(s.in_channels)}, params.decoder_biases[L]});
  }
  return f;
}

ConvAEParams from_tensor_file(const TensorFile& f) {
  if (f.kind != "convae") throw data_error("checkpoint is a '" + f.kind + "', not a convae");
  if (f.meta_value("levels") != kLevels) throw data_error("convae checkpoint must have 5 levels");
  ConvAEParams p;
  p.geometry.input_size = static_cast<int>(f.meta_value("input_size"));
  for (int l = 0; l < kLevels; ++l) {
    auto& s = p.geometry.levels[static_cast<std::size_t>(l)];
    const auto pre = "level" + std::to_string(l + 1) + ".";
    s.in_channels = static_cast<int>(f.meta_value(pre + "in"));
    s.out_channels = static_cast<int>(f.meta_value(pre + "out"));
    s.kernel_size = static_cast<int>(f.meta_value(pre + "kernel"));
    s.stride = static_cast<int>(f.meta_value(pre + "stride"));
    s.padding = static_cast<int>(f.meta_value(pre + "padding"));
  }
  try {
    p.geometry.validate();
  } catch (const Error& e) {
    throw data_error(std::string("convae checkpoint: ") + e.what());
  }
  for (int l = 0; l < kLevels; ++l) {
    const auto L = static_cast<std::size_t>(l);
    const auto& s = p.geometry.levels[L];
    const auto pre = "level" + std::to_string(l + 1) + ".";
    p.kernels[L] = f.tensor(pre + "kernel").data;
    p.encoder_biases[L] = f.tensor(pre + "encoder_bias").data;
    p.decoder_biases[L] = f.tensor(pre + "decoder_bias").data;
    if (p.kernels[L].size() != s.kernel_elements() ||
        p.encoder_biases[L].size() != static_cast<std::size_t>(s.out_channels) ||
        p.decoder_biases[L].size() != static_cast<std::size_t>(s.in_channels)) {
      throw data_error("convae checkpoint: tensor sizes disagree with level " + std::to_string(l + 1));
    }
  }
  return p;
}

void save_params(const std::filesystem::path& path, const ConvAEParams& params) {
  save_tensor_file(path, to_tensor_file(params));
}

ConvAEParams load_params(const std::filesystem::path& path) { return from_tensor_file(load_tensor_file(path)); }

void save_features(const std::filesystem::path& path, const std::vector<GlyphFeature>& features) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open '" + path.string() + "' for writing");
  char buf[40];
  for (const auto& f : features) {
    out << utf8::codepoint_label(f.codepoint) << '\t';
    for (std::size_t i = 0; i < f.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", f.values[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw data_error("write failed for '" + path.string() + "'");
}

std::vector<GlyphFeature> load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  std::vector<GlyphFeature> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto where = path.string() + ":" + std::to_string(lineno);
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw data_error(where + ": expected codepoint<TAB>values");
    GlyphFeature f;
    f.codepoint = utf8::parse_codepoint(line.substr(0, tab));
    const char* p = line.c_str() + tab + 1;
    const char* end = line.c_str() + line.size();
    while (p < end) {
      char* next = nullptr;
      const double v = std::strtod(p, &next);
      if (next == p) throw data_error(where + ": bad number");
      f.values.push_back(v);
      p = next;
      while (p < end && *p == ' ') ++p;
    }
    if (!out.empty() && out.front().values.size() != f.values.size()) {
      throw data_error(where + ": feature length differs from first row");
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace gwe::convae
