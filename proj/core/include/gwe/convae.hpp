#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "gwe/adagrad.hpp"
#include "gwe/glyph.hpp"
#include "gwe/tensor_file.hpp"

namespace gwe::convae {

inline constexpr int kLevels = 5;

struct ConvLayerSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel_size = 1;
  int stride = 1;
  int padding = 0;

  /// floor((in + 2*padding - kernel) / stride) + 1
  int output_size(int input_size) const;
  std::size_t kernel_elements() const {
    return static_cast<std::size_t>(in_channels) * out_channels * kernel_size * kernel_size;
  }

  bool operator==(const ConvLayerSpec&) const = default;
};

/// Channel-major feature map (c, y, x).
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  double& at(int c, int y, int x) { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }
  double at(int c, int y, int x) const { return data[(static_cast<std::size_t>(c) * height + y) * width + x]; }

  bool operator==(const FeatureMap&) const = default;
};

enum class Activation { kLinear, kRelu, kLogistic };

/// Square-input network shape: five levels applied to an input_size² map.
struct Geometry {
  int input_size = kBitmapSide;
  std::array<ConvLayerSpec, kLevels> levels{};

  /// 60 -> 30 -> 15 -> 8 -> 4 -> 1 with 1, 8, 16, 32, 64, 512 channels.
  static Geometry standard();

  /// Spatial size entering each level; sizes[kLevels] is the code size.
  std::array<int, kLevels + 1> sizes() const;
  int feature_dim() const;

  /// Throws unless channels chain and every level yields a positive size.
  void validate() const;

  bool operator==(const Geometry&) const = default;
};

/// Kernel at level l has shape [out][in][k][k] and is the only weight tensor
/// of that level: the encoder convolution and the decoder transposed
/// convolution both read it.
struct ConvAEParams {
  Geometry geometry;
  std::array<std::vector<double>, kLevels> kernels;
  std::array<std::vector<double>, kLevels> encoder_biases;  // out_channels each
  std::array<std::vector<double>, kLevels> decoder_biases;  // in_channels each

  bool operator==(const ConvAEParams&) const = default;
};

ConvAEParams init_params(const Geometry& geometry, std::uint64_t seed);

struct GlyphFeature {
  char32_t codepoint = 0;
  std::vector<double> values;

  bool operator==(const GlyphFeature&) const = default;
};

/// Plain correlation without bias or activation.
FeatureMap correlate(const FeatureMap& input, const ConvLayerSpec& layer, std::span<const double> kernel);

/// Adjoint of `correlate` onto an output_size² map.
FeatureMap correlate_adjoint(const FeatureMap& input, const ConvLayerSpec& layer,
                             std::span<const double> kernel, int output_size);

/// d(kernel) for y = correlate(x): sum over positions of grad_y ⊗ x.
std::vector<double> kernel_gradient(const FeatureMap& x, const FeatureMap& grad_y, const ConvLayerSpec& layer);

/// Encoder convolution. `level` (1-based) is only used in error messages.
FeatureMap conv_forward(const FeatureMap& input, const ConvLayerSpec& layer, std::span<const double> kernel,
                        std::span<const double> bias, Activation activation, int level = 0);

/// Decoder transposed convolution with the level's shared kernel, mapping
/// out_channels back to in_channels at the paired encoder input size.
FeatureMap deconv_forward(const FeatureMap& input, const ConvLayerSpec& layer, std::span<const double> kernel,
                          std::span<const double> bias, Activation activation, int output_size,
                          int level = 0);

/// Everything the backward pass needs from one forward pass.
struct ForwardTrace {
  std::array<FeatureMap, kLevels + 1> encoded;      // [0] input, [l] after encoder level l
  std::array<FeatureMap, kLevels> encoder_pre;      // pre-activation of encoder level l+1
  std::array<FeatureMap, kLevels + 1> decoded;      // [kLevels] code, [l-1] after decoder level l
  std::array<FeatureMap, kLevels> decoder_pre;      // pre-activation producing decoded[l]

  int depth = kLevels;  // levels used; entries beyond it are empty

  const FeatureMap& reconstruction() const { return decoded[0]; }
};

/// Encodes through levels 1..depth and decodes back through depth..1.
ForwardTrace forward(const FeatureMap& input, const ConvAEParams& params, int depth = kLevels);

/// Bitmap pixels divided by 255.
FeatureMap bitmap_to_map(const Bitmap& bitmap);

GlyphFeature encode(const Bitmap& bitmap, const ConvAEParams& params);

/// Reconstruction in [0,1] with the input's shape.
FeatureMap decode(const GlyphFeature& feature, const ConvAEParams& params);

/// Sum of squared pixel differences + l1_weight * sum |a| over the given
/// encoder activations.
double loss(const FeatureMap& input, const FeatureMap& reconstruction,
            std::span<const FeatureMap> encoder_activations, double l1_weight);

struct Gradients {
  std::array<std::vector<double>, kLevels> kernels;
  std::array<std::vector<double>, kLevels> encoder_biases;
  std::array<std::vector<double>, kLevels> decoder_biases;
  double loss = 0.0;
};

/// Summed loss and gradients over a batch. Only levels listed in `active`
/// (0-based) get gradient tensors; the others stay empty. The kernel gradient
/// is the sum of its encoder-side and decoder-side contributions.
Gradients backward(std::span<const FeatureMap> batch, const ConvAEParams& params, double l1_weight,
                   std::span<const int> active, int depth = kLevels);

/// All-level convenience overload.
Gradients backward(std::span<const FeatureMap> batch, const ConvAEParams& params, double l1_weight);

/// Which network the reconstruction loss runs through while level l trains.
enum class TrainPath {
  kFull,       // all five levels, higher levels frozen at their current values
  kTruncated,  // levels 1..l only (greedy stacking)
};

struct TrainConfig {
  TrainPath path = TrainPath::kFull;
  int epochs_per_level = 100;
  int batch = 20;
  double lr = 0.001;
  /// Per-level multiplier on lr.
  std::array<double, kLevels> level_lr_scale{1.0, 1.0, 1.0, 1.0, 1.0};
  double l1_weight = 1e-4;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int level = 0;  // 1-based
  int epoch = 0;
  double loss = 0.0;  // summed over the epoch's examples
};

/// Trains one level (0-based) in place with all other levels frozen.
std::vector<EpochLog> train_level(std::span<const FeatureMap> inputs, ConvAEParams& params, int level,
                                  const TrainConfig& config);

struct TrainResult {
  ConvAEParams params;
  std::vector<EpochLog> log;
};

/// Levels 1..5 in order, each for `epochs_per_level` epochs.
TrainResult train_layerwise(std::span<const FeatureMap> inputs, ConvAEParams init, const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

TrainResult train_layerwise(const std::vector<Bitmap>& bitmaps, const TrainConfig& config,
                            const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean squared pixel error over all inputs.
double reconstruction_mse(std::span<const FeatureMap> inputs, const ConvAEParams& params);

TensorFile to_tensor_file(const ConvAEParams& params);
ConvAEParams from_tensor_file(const TensorFile& file);
void save_params(const std::filesystem::path& path, const ConvAEParams& params);
ConvAEParams load_params(const std::filesystem::path& path);

/// TSV rows `U+XXXX<TAB>v1 v2 ...`, round-trip exact.
void save_features(const std::filesystem::path& path, const std::vector<GlyphFeature>& features);
std::vector<GlyphFeature> load_features(const std::filesystem::path& path);

}  // namespace gwe::convae
