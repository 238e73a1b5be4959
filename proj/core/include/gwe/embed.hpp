#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gwe/corpus.hpp"
#include "gwe/glyph_table.hpp"
#include "gwe/matrix.hpp"
#include "gwe/rng.hpp"

namespace gwe {

enum class PositionClass : std::uint8_t { kBegin = 0, kMiddle = 1, kEnd = 2 };
inline constexpr std::size_t kPositionSlots = 3;

/// First character -> begin (including single-character words), last -> end,
/// anything else -> middle.
PositionClass position_class(std::size_t char_index, std::size_t word_length);

/// Window-model variants. The first five predict the target from its context
/// (CBOW family); the last three predict each context word from the target.
enum class Variant {
  kCbow,
  kCwe,
  kMge,
  kCtxG,
  kTarG,
  kSkipgram,
  kSkipgramCwe,
  kSkipgramCtxG,
};

bool is_skipgram(Variant v);
bool needs_glyphs(Variant v);
std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

/// char -> radical map read from `char<TAB>radical` lines. Characters without
/// an entry share one extra "<unk>" radical and are listed in unmapped().
class RadicalIndex {
 public:
  static RadicalIndex from_pairs(const std::vector<std::pair<char32_t, std::string>>& pairs, const Vocabulary& vocab);
  static RadicalIndex load(const std::filesystem::path& path, const Vocabulary& vocab);

  std::int32_t radical_of(CharId id) const { return char_radical_.at(static_cast<std::size_t>(id)); }
  std::size_t radical_count() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<CharId>& unmapped() const noexcept { return unmapped_; }

 private:
  std::vector<std::int32_t> char_radical_;
  std::vector<std::string> names_;
  std::vector<CharId> unmapped_;
};

struct EmbeddingStore {
  std::size_t dims = 0;
  Matrix word_in;   // V×D
  Matrix word_out;  // V×D, negative-sampling output vectors
  Matrix chars;     // (K·3)×D, row = char_id·3 + position slot
  Matrix radicals;  // R×D

  /// Inputs uniform in [-0.5/D, 0.5/D]; outputs zero.
  static EmbeddingStore init(std::size_t vocab_size, std::size_t char_count, std::size_t radical_count,
                             std::size_t dims, std::uint64_t seed);

  std::span<double> char_vec(CharId id, PositionClass pos) {
    return chars.row(static_cast<std::size_t>(id) * kPositionSlots + static_cast<std::size_t>(pos));
  }
  std::span<const double> char_vec(CharId id, PositionClass pos) const {
    return chars.row(static_cast<std::size_t>(id) * kPositionSlots + static_cast<std::size_t>(pos));
  }

  bool operator==(const EmbeddingStore&) const = default;
};

/// Unigram^power table for drawing negatives.
class NegSampler {
 public:
  explicit NegSampler(std::span<const std::int64_t> freqs, double power = 0.75);

  WordId draw(Rng& rng) const;
  double probability(WordId id) const;
  std::size_t size() const noexcept { return cumulative_.size(); }

  /// k draws, redrawing any that hit `target`; empty when the vocabulary has
  /// a single word.
  std::vector<WordId> draw_negatives(int k, WordId target, Rng& rng) const;

 private:
  std::vector<double> cumulative_;
};

/// Read-only model inputs besides the store.
struct ModelContext {
  const Vocabulary* vocab = nullptr;
  const GlyphTable* glyphs = nullptr;      // ctxG / tarG / SG+ctxG
  const RadicalIndex* radicals = nullptr;  // MGE
};

/// w_i + mean over characters of the position-selected char vectors.
std::vector<double> cwe_compose(WordId word, const EmbeddingStore& store, const Vocabulary& vocab);

/// w_i + mean over characters of (char vector + glyph feature).
std::vector<double> ctxg_compose(WordId word, const EmbeddingStore& store, const GlyphTable& glyphs,
                                 const Vocabulary& vocab);

/// Hidden vector predicting `target` from `context` for a CBOW-family variant.
/// Context must be non-empty.
std::vector<double> cbow_hidden(Variant variant, WordId target, std::span<const WordId> context,
                                const EmbeddingStore& store, const ModelContext& ctx);

/// Composed target representation used by the Skipgram family.
std::vector<double> skipgram_input(Variant variant, WordId target, const EmbeddingStore& store,
                                   const ModelContext& ctx);

struct NegSampleResult {
  double loss = 0.0;
  std::vector<double> grad_hidden;  // dLoss/dHidden
};

/// -log σ(h·o_t) - Σ log σ(-h·o_n), with its gradients. Pure.
NegSampleResult negsample_loss(std::span<const double> hidden, WordId target, std::span<const WordId> negatives,
                               const EmbeddingStore& store);

/// As negsample_loss, then moves every involved output row by -lr·gradient.
/// All scores are computed before any row moves.
NegSampleResult negsample_update(std::span<const double> hidden, WordId target, std::span<const WordId> negatives,
                                 EmbeddingStore& store, double lr);

NegSampleResult negsample_update(std::span<const double> hidden, WordId target, const NegSampler& sampler, int k,
                                 Rng& rng, EmbeddingStore& store, double lr);

/// Chain rule from the hidden vector into word/char/radical rows, each moved
/// by -lr·coefficient·grad. Glyph features are never touched.
void distribute_hidden_gradient(Variant variant, std::span<const double> grad, WordId target,
                                std::span<const WordId> context, EmbeddingStore& store, const ModelContext& ctx,
                                double lr);

/// Skipgram counterpart: the gradient flows into the target's composition.
void distribute_skipgram_gradient(Variant variant, std::span<const double> grad, WordId target,
                                  EmbeddingStore& store, const ModelContext& ctx, double lr);

/// One CBOW-family example: hidden, negative-sampling update, distribution.
/// Returns the example loss.
double cbow_step(Variant variant, WordId target, std::span<const WordId> context,
                 std::span<const WordId> negatives, EmbeddingStore& store, const ModelContext& ctx, double lr);

/// One Skipgram-family (target, context word) step.
double skipgram_step(Variant variant, WordId target, WordId context_word, std::span<const WordId> negatives,
                     EmbeddingStore& store, const ModelContext& ctx, double lr);

/// Summed example loss for fixed negatives, for finite-difference checks.
double cbow_example_loss(Variant variant, WordId target, std::span<const WordId> context,
                         std::span<const WordId> negatives, const EmbeddingStore& store, const ModelContext& ctx);
double skipgram_example_loss(Variant variant, WordId target, WordId context_word,
                             std::span<const WordId> negatives, const EmbeddingStore& store,
                             const ModelContext& ctx);

struct EmbedConfig {
  std::size_t dims = 512;
  int window = 5;
  int negatives = 10;
  double subsample = 1e-5;
  double lr = 0.025;
  double min_lr_fraction = 1e-4;
  int epochs = 1;
  std::uint64_t seed = 1;
  int threads = 1;  // >1: lock-free shared updates, not reproducible
};

struct TrainStats {
  std::vector<double> epoch_loss;  // mean loss per example
  std::int64_t examples = 0;
};

EmbeddingStore train_cbow_family(const EncodedCorpus& corpus, Variant variant, const EmbedConfig& config,
                                 const ModelContext& ctx, TrainStats* stats = nullptr);

EmbeddingStore train_skipgram_family(const EncodedCorpus& corpus, Variant variant, const EmbedConfig& config,
                                     const ModelContext& ctx, TrainStats* stats = nullptr);

/// Dispatches on is_skipgram(variant).
EmbeddingStore train_window_model(const EncodedCorpus& corpus, Variant variant, const EmbedConfig& config,
                                  const ModelContext& ctx, TrainStats* stats = nullptr);

/// Vectors submitted to evaluation: the variant's composed representation
/// (word / CWE / ctxG), or w_i alone when `word_only`.
Matrix evaluation_vectors(Variant variant, const EmbeddingStore& store, const ModelContext& ctx,
                          bool word_only = false);

}  // namespace gwe
