#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gwe/adagrad.hpp"
#include "gwe/cooc.hpp"
#include "gwe/corpus.hpp"
#include "gwe/glyph_table.hpp"
#include "gwe/matrix.hpp"
#include "gwe/tensor_file.hpp"

namespace gwe::seq {

/// x for x >= 0, a·(e^x - 1) otherwise.
double elu(double x, double a = 1.0);

/// Named view of one parameter tensor, used for optimizers, checkpoints and
/// finite-difference checks.
template <typename T>
struct ParamView {
  std::string name;
  std::vector<std::uint64_t> shape;
  std::span<T> data;
};

/// One GRU layer:
///   z = σ(Wz x + Uz h + bz), r = σ(Wr x + Ur h + br),
///   n = tanh(Wn x + Un (r ⊙ h) + bn), h' = z ⊙ h + (1 - z) ⊙ n.
struct GruLayer {
  Matrix wz, uz, wr, ur, wn, un;  // W*: H×in, U*: H×H
  std::vector<double> bz, br, bn;

  bool operator==(const GruLayer&) const = default;
};

struct GruParams {
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
  std::array<GruLayer, 2> layers;

  /// Weights uniform in ±1/sqrt(H), biases zero.
  static GruParams init(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed);
  static GruParams zeros(std::size_t input_size, std::size_t hidden_size);

  std::vector<ParamView<double>> views();
  std::vector<ParamView<const double>> views() const;

  bool operator==(const GruParams&) const = default;
};

using Sequence = std::vector<std::span<const double>>;

struct GruStep {
  std::vector<double> x, h_prev, z, r, n, h;
};

struct GruTrace {
  std::array<std::vector<GruStep>, 2> layers;
  const std::vector<double>& output() const { return layers[1].back().h; }
};

/// Runs both layers from a zero state; layer 2 reads layer 1's hidden states.
GruTrace gru_trace(const Sequence& inputs, const GruParams& params);
std::vector<double> gru_forward(const Sequence& inputs, const GruParams& params);

/// Backpropagation through time from dLoss/d(final state); adds into `grads`.
void gru_backward(const GruTrace& trace, const GruParams& params, std::span<const double> grad_output,
                  GruParams& grads);

/// Two affine layers, each followed by ELU.
struct MlpHead {
  Matrix a1;  // hidden×in
  std::vector<double> c1;
  Matrix a2;  // out×hidden
  std::vector<double> c2;

  static MlpHead init(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed);
  static MlpHead zeros(std::size_t in, std::size_t hidden, std::size_t out);
  std::size_t output_size() const noexcept { return a2.rows(); }

  std::vector<ParamView<double>> views(const std::string& prefix);
  std::vector<ParamView<const double>> views(const std::string& prefix) const;

  bool operator==(const MlpHead&) const = default;
};

struct HeadTrace {
  std::vector<double> input, pre1, h1, pre2, output;
};

HeadTrace head_trace(std::span<const double> input, const MlpHead& head);
std::vector<double> head_forward(std::span<const double> input, const MlpHead& head);
/// Adds parameter gradients into `grads`; returns dLoss/dInput.
std::vector<double> head_backward(const HeadTrace& trace, const MlpHead& head, std::span<const double> grad_output,
                                  MlpHead& grads);

/// Glyph rows of a word's characters, left to right.
Sequence glyph_sequence(WordId word, const Vocabulary& vocab, const GlyphTable& glyphs);

/// head(gru(glyphs of word)).
std::vector<double> rnn_word_vector(WordId word, const Vocabulary& vocab, const GlyphTable& glyphs,
                                    const GruParams& gru, const MlpHead& head);

struct RnnConfig {
  std::size_t hidden = 256;
  std::size_t head_hidden = 200;
  std::size_t output = 200;
  int window = 5;
  int negatives = 10;
  double subsample = 1e-5;
  double lr = 0.001;
  int epochs = 1;
  std::uint64_t seed = 1;
  GloveLossTerms terms;
  double min_cooc = 0.5;
};

struct RnnSkipgramModel {
  GruParams gru;
  MlpHead head;
  Matrix output;  // V×out negative-sampling vectors, zero at init

  static RnnSkipgramModel init(std::size_t vocab_size, std::size_t input_size, const RnnConfig& config);
  static RnnSkipgramModel zeros_like(const RnnSkipgramModel& model);

  std::vector<ParamView<double>> views();
  TensorFile to_tensor_file() const;
  static RnnSkipgramModel from_tensor_file(const TensorFile& file);

  bool operator==(const RnnSkipgramModel&) const = default;
};

/// One training example: a target word, its context words and one negative
/// list per context word.
struct SkipgramExample {
  WordId target = 0;
  std::vector<WordId> contexts;
  std::vector<std::vector<WordId>> negatives;
};

double rnn_skipgram_loss(const RnnSkipgramModel& model, const SkipgramExample& example, const Vocabulary& vocab,
                         const GlyphTable& glyphs);
/// Loss plus the full gradient, shaped like the model.
double rnn_skipgram_gradient(const RnnSkipgramModel& model, const SkipgramExample& example, const Vocabulary& vocab,
                             const GlyphTable& glyphs, RnnSkipgramModel& grads);

RnnSkipgramModel rnn_skipgram_train(const EncodedCorpus& corpus, const Vocabulary& vocab, const GlyphTable& glyphs,
                                    const RnnConfig& config, std::vector<double>* epoch_loss = nullptr);

/// Word vectors for the whole vocabulary.
Matrix rnn_skipgram_vectors(const RnnSkipgramModel& model, const Vocabulary& vocab, const GlyphTable& glyphs);

struct RnnGloveModel {
  GruParams gru;  // shared by both heads
  MlpHead head_w;
  MlpHead head_w_tilde;

  static RnnGloveModel init(std::size_t input_size, const RnnConfig& config);
  static RnnGloveModel zeros_like(const RnnGloveModel& model);

  std::vector<ParamView<double>> views();
  TensorFile to_tensor_file() const;
  static RnnGloveModel from_tensor_file(const TensorFile& file);

  bool operator==(const RnnGloveModel&) const = default;
};

/// f(X)·(w_i·w̃_j - ln X)², no biases.
double rnn_glove_loss(const RnnGloveModel& model, const CoocEntry& entry, const Vocabulary& vocab,
                      const GlyphTable& glyphs, const GloveLossTerms& terms = {});
double rnn_glove_gradient(const RnnGloveModel& model, const CoocEntry& entry, const Vocabulary& vocab,
                          const GlyphTable& glyphs, const GloveLossTerms& terms, RnnGloveModel& grads);

/// Trains on the entries with X >= config.min_cooc, shuffled every epoch.
RnnGloveModel rnn_glove_train(const SparseCooc& cooc, const Vocabulary& vocab, const GlyphTable& glyphs,
                              const RnnConfig& config, std::vector<double>* epoch_loss = nullptr);

/// w_i + w̃_i for every word.
Matrix rnn_glove_vectors(const RnnGloveModel& model, const Vocabulary& vocab, const GlyphTable& glyphs);

}  // namespace gwe::seq
