#include "gwe/embed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>
#include <unordered_map>

#include "gwe/error.hpp"
#include "gwe/utf8.hpp"

namespace gwe {

PositionClass position_class(std::size_t char_index, std::size_t word_length) {
  if (char_index >= word_length) {
    throw usage_error("character index " + std::to_string(char_index) + " out of range for length " +
                      std::to_string(word_length));
  }
  if (char_index == 0) return PositionClass::kBegin;
  if (char_index + 1 == word_length) return PositionClass::kEnd;
  return PositionClass::kMiddle;
}

bool is_skipgram(Variant v) {
  return v == Variant::kSkipgram || v == Variant::kSkipgramCwe || v == Variant::kSkipgramCtxG;
}

bool needs_glyphs(Variant v) { return v == Variant::kCtxG || v == Variant::kTarG || v == Variant::kSkipgramCtxG; }

namespace {

enum class Composition { kWord, kCwe, kCtxG };

Composition composition_of(Variant v) {
  switch (v) {
    case Variant::kCbow:
    case Variant::kSkipgram:
      return Composition::kWord;
    case Variant::kCtxG:
    case Variant::kSkipgramCtxG:
      return Composition::kCtxG;
    default:
      return Composition::kCwe;
  }
}

struct VariantName {
  Variant variant;
  std::string_view name;
};

constexpr VariantName kVariantNames[] = {
    {Variant::kCbow, "cbow"},         {Variant::kCwe, "cwe"},           {Variant::kMge, "mge"},
    {Variant::kCtxG, "gwe-ctx"},      {Variant::kTarG, "gwe-tar"},      {Variant::kSkipgram, "sg"},
    {Variant::kSkipgramCwe, "sg-cwe"}, {Variant::kSkipgramCtxG, "sg-gwe-ctx"},
};

}  // namespace

std::string_view variant_name(Variant v) {
  for (const auto& e : kVariantNames) {
    if (e.variant == v) return e.name;
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (const auto& e : kVariantNames) {
    if (e.name == name) return e.variant;
  }
  throw usage_error("unknown window-model variant '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Radicals and glyphs

RadicalIndex RadicalIndex::from_pairs(const std::vector<std::pair<char32_t, std::string>>& pairs,
                                      const Vocabulary& vocab) {
  RadicalIndex index;
  index.char_radical_.assign(vocab.char_count(), -1);
  std::unordered_map<std::string, std::int32_t> ids;
  for (const auto& [cp, radical] : pairs) {
    const auto cid = vocab.find_char(cp);
    if (cid == Vocabulary::kNotFound) continue;
    auto [it, inserted] = ids.emplace(radical, static_cast<std::int32_t>(index.names_.size()));
    if (inserted) index.names_.push_back(radical);
    index.char_radical_[static_cast<std::size_t>(cid)] = it->second;
  }
  std::int32_t unknown = -1;
  for (std::size_t c = 0; c < index.char_radical_.size(); ++c) {
    if (index.char_radical_[c] >= 0) continue;
    if (unknown < 0) {
      unknown = static_cast<std::int32_t>(index.names_.size());
      index.names_.push_back("<unk>");
    }
    index.char_radical_[c] = unknown;
    index.unmapped_.push_back(static_cast<CharId>(c));
  }
  return index;
}

RadicalIndex RadicalIndex::load(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  std::vector<std::pair<char32_t, std::string>> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected char<TAB>radical");
    }
    try {
      pairs.emplace_back(utf8::parse_codepoint(line.substr(0, tab)), line.substr(tab + 1));
    } catch (const Error& e) {
      throw data_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return from_pairs(pairs, vocab);
}

GlyphTable GlyphTable::from_features(const std::vector<convae::GlyphFeature>& features, const Vocabulary& vocab,
                                     std::size_t dims, std::uint64_t projection_seed) {
  std::unordered_map<char32_t, const convae::GlyphFeature*> by_cp;
  std::size_t feature_dim = 0;
  for (const auto& f : features) {
    by_cp[f.codepoint] = &f;
    feature_dim = f.values.size();
  }
  Matrix projection;
  if (feature_dim != dims && vocab.char_count() > 0) {
    if (feature_dim == 0) throw data_error("glyph features are empty");
    Rng rng(derive_seed(projection_seed, "glyph-projection"));
    projection = Matrix(dims, feature_dim);
    const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    for (auto& v : projection.values()) v = rng.normal() * scale;
  }
  Matrix values(vocab.char_count(), dims);
  for (std::size_t c = 0; c < vocab.char_count(); ++c) {
    const char32_t cp = vocab.character(static_cast<CharId>(c));
    const auto it = by_cp.find(cp);
    if (it == by_cp.end()) throw data_error("missing glyph feature for " + utf8::codepoint_label(cp));
    const auto& f = it->second->values;
    if (f.size() != feature_dim) throw data_error("glyph feature length differs for " + utf8::codepoint_label(cp));
    auto row = values.row(c);
    if (projection.empty()) {
      std::copy(f.begin(), f.end(), row.begin());
    } else {
      for (std::size_t d = 0; d < dims; ++d) row[d] = dot(projection.row(d), f);
    }
  }
  double mean_norm = 0.0;
  for (std::size_t c = 0; c < values.rows(); ++c) mean_norm += norm(values.row(c));
  if (values.rows() > 0) mean_norm /= static_cast<double>(values.rows());
  if (mean_norm > 0.0) {
    for (auto& v : values.values()) v /= mean_norm;
  }
  return GlyphTable(std::move(values));
}

// ---------------------------------------------------------------------------
// Store and sampler

EmbeddingStore EmbeddingStore::init(std::size_t vocab_size, std::size_t char_count, std::size_t radical_count,
                                    std::size_t dims, std::uint64_t seed) {
  if (dims == 0) throw usage_error("embedding dims must be positive");
  EmbeddingStore s;
  s.dims = dims;
  s.word_in = Matrix(vocab_size, dims);
  s.word_out = Matrix(vocab_size, dims);
  s.chars = Matrix(char_count * kPositionSlots, dims);
  s.radicals = Matrix(radical_count, dims);
  const double half = 0.5 / static_cast<double>(dims);
  Rng rng(derive_seed(seed, "embed-init"));
  for (Matrix* m : {&s.word_in, &s.chars, &s.radicals}) {
    for (auto& v : m->values()) v = rng.uniform(-half, half);
  }
  return s;
}

NegSampler::NegSampler(std::span<const std::int64_t> freqs, double power) {
  if (freqs.empty()) throw usage_error("negative sampler needs a non-empty vocabulary");
  cumulative_.resize(freqs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < freqs.size(); ++i) {
    total += std::pow(static_cast<double>(freqs[i]), power);
    cumulative_[i] = total;
  }
  if (!(total > 0.0)) throw usage_error("negative sampler needs positive frequencies");
  for (auto& c : cumulative_) c /= total;
  cumulative_.back() = 1.0;
}

WordId NegSampler::draw(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  return static_cast<WordId>(std::min<std::ptrdiff_t>(it - cumulative_.begin(),
                                                      static_cast<std::ptrdiff_t>(cumulative_.size()) - 1));
}

double NegSampler::probability(WordId id) const {
  const auto i = static_cast<std::size_t>(id);
  return cumulative_.at(i) - (i == 0 ? 0.0 : cumulative_[i - 1]);
}

std::vector<WordId> NegSampler::draw_negatives(int k, WordId target, Rng& rng) const {
  std::vector<WordId> out;
  if (cumulative_.size() < 2) return out;
  out.reserve(static_cast<std::size_t>(k));
  while (static_cast<int>(out.size()) < k) {
    const WordId w = draw(rng);
    if (w != target) out.push_back(w);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Composition

namespace {

void require(const ModelContext& ctx, Variant v) {
  if (!ctx.vocab) throw usage_error("model context has no vocabulary");
  if (needs_glyphs(v) && !ctx.glyphs) throw usage_error(std::string(variant_name(v)) + " needs a glyph table");
  if (v == Variant::kMge && !ctx.radicals) throw usage_error("mge needs a radical index");
}

// out += scale * (char vectors [+ glyphs] of `word`) / |C|
void add_char_mean(WordId word, const EmbeddingStore& store, const Vocabulary& vocab, const GlyphTable* glyphs,
                   double scale, std::span<double> out) {
  const auto chars = vocab.decomposition(word);
  const double coef = scale / static_cast<double>(chars.size());
  for (std::size_t j = 0; j < chars.size(); ++j) {
    axpy(coef, store.char_vec(chars[j], position_class(j, chars.size())), out);
    if (glyphs) axpy(coef, glyphs->row(chars[j]), out);
  }
}

void add_composed(Composition comp, WordId word, const EmbeddingStore& store, const ModelContext& ctx, double scale,
                  std::span<double> out) {
  axpy(scale, store.word_in.row(static_cast<std::size_t>(word)), out);
  if (comp == Composition::kWord) return;
  add_char_mean(word, store, *ctx.vocab, comp == Composition::kCtxG ? ctx.glyphs : nullptr, scale, out);
}

// Moves the rows composing `word` by step·grad.
void move_composed(Composition comp, WordId word, std::span<const double> grad, double step, EmbeddingStore& store,
                   const Vocabulary& vocab) {
  axpy(step, grad, store.word_in.row(static_cast<std::size_t>(word)));
  if (comp == Composition::kWord) return;
  const auto chars = vocab.decomposition(word);
  const double coef = step / static_cast<double>(chars.size());
  for (std::size_t j = 0; j < chars.size(); ++j) {
    axpy(coef, grad, store.char_vec(chars[j], position_class(j, chars.size())));
  }
}

}  // namespace

std::vector<double> cwe_compose(WordId word, const EmbeddingStore& store, const Vocabulary& vocab) {
  std::vector<double> out(store.dims, 0.0);
  axpy(1.0, store.word_in.row(static_cast<std::size_t>(word)), out);
  add_char_mean(word, store, vocab, nullptr, 1.0, out);
  return out;
}

std::vector<double> ctxg_compose(WordId word, const EmbeddingStore& store, const GlyphTable& glyphs,
                                 const Vocabulary& vocab) {
  if (glyphs.dims() != store.dims) throw usage_error("glyph table dims differ from embedding dims");
  std::vector<double> out(store.dims, 0.0);
  axpy(1.0, store.word_in.row(static_cast<std::size_t>(word)), out);
  add_char_mean(word, store, vocab, &glyphs, 1.0, out);
  return out;
}

std::vector<double> cbow_hidden(Variant variant, WordId target, std::span<const WordId> context,
                                const EmbeddingStore& store, const ModelContext& ctx) {
  if (is_skipgram(variant)) throw usage_error("cbow_hidden: not a CBOW-family variant");
  if (context.empty()) throw usage_error("cbow_hidden: empty context");
  require(ctx, variant);
  std::vector<double> h(store.dims, 0.0);
  const auto comp = composition_of(variant);
  const double inv = 1.0 / static_cast<double>(context.size());
  for (WordId w : context) add_composed(comp, w, store, ctx, inv, h);

  const auto chars = ctx.vocab->decomposition(target);
  const double per_char = 1.0 / static_cast<double>(chars.size());
  if (variant == Variant::kMge) {
    for (CharId c : chars) axpy(per_char, store.radicals.row(static_cast<std::size_t>(ctx.radicals->radical_of(c))), h);
  } else if (variant == Variant::kTarG) {
    for (CharId c : chars) axpy(per_char, ctx.glyphs->row(c), h);
  }
  return h;
}

std::vector<double> skipgram_input(Variant variant, WordId target, const EmbeddingStore& store,
                                   const ModelContext& ctx) {
  if (!is_skipgram(variant)) throw usage_error("skipgram_input: not a Skipgram-family variant");
  require(ctx, variant);
  std::vector<double> h(store.dims, 0.0);
  add_composed(composition_of(variant), target, store, ctx, 1.0, h);
  return h;
}

// ---------------------------------------------------------------------------
// Negative sampling

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

struct Scored {
  WordId word;
  double coef;  // dLoss/dScore = σ(s) - label
};

std::vector<Scored> score(std::span<const double> hidden, WordId target, std::span<const WordId> negatives,
                          const EmbeddingStore& store, double& loss) {
  std::vector<Scored> out;
  out.reserve(negatives.size() + 1);
  loss = 0.0;
  const double s = dot(hidden, store.word_out.row(static_cast<std::size_t>(target)));
  loss -= log_sigmoid(s);
  out.push_back({target, sigmoid(s) - 1.0});
  for (WordId n : negatives) {
    const double sn = dot(hidden, store.word_out.row(static_cast<std::size_t>(n)));
    loss -= log_sigmoid(-sn);
    out.push_back({n, sigmoid(sn)});
  }
  return out;
}

}  // namespace

NegSampleResult negsample_loss(std::span<const double> hidden, WordId target, std::span<const WordId> negatives,
                               const EmbeddingStore& store) {
  NegSampleResult r;
  const auto scored = score(hidden, target, negatives, store, r.loss);
  r.grad_hidden.assign(hidden.size(), 0.0);
  for (const auto& s : scored) axpy(s.coef, store.word_out.row(static_cast<std::size_t>(s.word)), r.grad_hidden);
  return r;
}

NegSampleResult negsample_update(std::span<const double> hidden, WordId target, std::span<const WordId> negatives,
                                 EmbeddingStore& store, double lr) {
  NegSampleResult r;
  const auto scored = score(hidden, target, negatives, store, r.loss);
  r.grad_hidden.assign(hidden.size(), 0.0);
  for (const auto& s : scored) axpy(s.coef, store.word_out.row(static_cast<std::size_t>(s.word)), r.grad_hidden);
  if (lr != 0.0) {
    for (const auto& s : scored) axpy(-lr * s.coef, hidden, store.word_out.row(static_cast<std::size_t>(s.word)));
  }
  return r;
}

NegSampleResult negsample_update(std::span<const double> hidden, WordId target, const NegSampler& sampler, int k,
                                 Rng& rng, EmbeddingStore& store, double lr) {
  const auto negatives = sampler.draw_negatives(k, target, rng);
  return negsample_update(hidden, target, negatives, store, lr);
}

void distribute_hidden_gradient(Variant variant, std::span<const double> grad, WordId target,
                                std::span<const WordId> context, EmbeddingStore& store, const ModelContext& ctx,
                                double lr) {
  if (is_skipgram(variant)) throw usage_error("distribute_hidden_gradient: not a CBOW-family variant");
  if (context.empty() || lr == 0.0) return;
  require(ctx, variant);
  const auto comp = composition_of(variant);
  const double step = -lr / static_cast<double>(context.size());
  for (WordId w : context) move_composed(comp, w, grad, step, store, *ctx.vocab);
  if (variant == Variant::kMge) {
    const auto chars = ctx.vocab->decomposition(target);
    const double coef = -lr / static_cast<double>(chars.size());
    for (CharId c : chars) axpy(coef, grad, store.radicals.row(static_cast<std::size_t>(ctx.radicals->radical_of(c))));
  }
}

void distribute_skipgram_gradient(Variant variant, std::span<const double> grad, WordId target,
                                  EmbeddingStore& store, const ModelContext& ctx, double lr) {
  if (!is_skipgram(variant)) throw usage_error("distribute_skipgram_gradient: not a Skipgram-family variant");
  if (lr == 0.0) return;
  require(ctx, variant);
  move_composed(composition_of(variant), target, grad, -lr, store, *ctx.vocab);
}

double cbow_step(Variant variant, WordId target, std::span<const WordId> context, std::span<const WordId> negatives,
                 EmbeddingStore& store, const ModelContext& ctx, double lr) {
  const auto h = cbow_hidden(variant, target, context, store, ctx);
  const auto r = negsample_update(h, target, negatives, store, lr);
  distribute_hidden_gradient(variant, r.grad_hidden, target, context, store, ctx, lr);
  return r.loss;
}

double skipgram_step(Variant variant, WordId target, WordId context_word, std::span<const WordId> negatives,
                     EmbeddingStore& store, const ModelContext& ctx, double lr) {
  const auto h = skipgram_input(variant, target, store, ctx);
  const auto r = negsample_update(h, context_word, negatives, store, lr);
  distribute_skipgram_gradient(variant, r.grad_hidden, target, store, ctx, lr);
  return r.loss;
}

double cbow_example_loss(Variant variant, WordId target, std::span<const WordId> context,
                         std::span<const WordId> negatives, const EmbeddingStore& store, const ModelContext& ctx) {
  return negsample_loss(cbow_hidden(variant, target, context, store, ctx), target, negatives, store).loss;
}

double skipgram_example_loss(Variant variant, WordId target, WordId context_word,
                             std::span<const WordId> negatives, const EmbeddingStore& store,
                             const ModelContext& ctx) {
  return negsample_loss(skipgram_input(variant, target, store, ctx), context_word, negatives, store).loss;
}

// ---------------------------------------------------------------------------
// Training

namespace {

void validate(const EmbedConfig& config, const ModelContext& ctx, Variant variant) {
  require(ctx, variant);
  if (config.window < 1) throw usage_error("window must be >= 1");
  if (config.negatives < 0) throw usage_error("negatives must be >= 0");
  if (config.epochs < 0) throw usage_error("epochs must be >= 0");
  if (config.threads < 1) throw usage_error("threads must be >= 1");
  if (needs_glyphs(variant) && ctx.glyphs->dims() != config.dims) {
    throw usage_error("glyph table dims (" + std::to_string(ctx.glyphs->dims()) + ") differ from embedding dims (" +
                      std::to_string(config.dims) + ")");
  }
  if (needs_glyphs(variant) && ctx.glyphs->size() != ctx.vocab->char_count()) {
    throw usage_error("glyph table does not cover the character set");
  }
}

template <typename Step>
EmbeddingStore run_training(const EncodedCorpus& corpus, Variant variant, const EmbedConfig& config,
                            const ModelContext& ctx, TrainStats* stats, Step&& step) {
  validate(config, ctx, variant);
  const auto& vocab = *ctx.vocab;
  const std::size_t radicals = ctx.radicals ? ctx.radicals->radical_count() : 0;
  EmbeddingStore store = EmbeddingStore::init(vocab.size(), vocab.char_count(), radicals, config.dims, config.seed);
  const NegSampler sampler(vocab.freqs());

  std::int64_t corpus_tokens = 0;
  for (const auto& line : corpus) corpus_tokens += static_cast<std::int64_t>(line.size());
  const double planned = static_cast<double>(corpus_tokens) * config.epochs + 1.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_seed = derive_seed(config.seed, static_cast<std::uint64_t>(epoch) + 1);
    const auto shards = static_cast<std::size_t>(config.threads);
    std::vector<double> loss(shards, 0.0);
    std::vector<std::int64_t> examples(shards, 0);
    auto worker = [&](std::size_t shard) {
      PairStream stream(corpus, vocab, config.window, config.subsample,
                        derive_seed(derive_seed(epoch_seed, "subsample"), shard), shard, shards);
      Rng neg_rng(derive_seed(derive_seed(epoch_seed, "negatives"), shard));
      TrainingPair pair;
      const double base = static_cast<double>(corpus_tokens) * epoch;
      while (stream.next(pair)) {
        const double progress = (base + static_cast<double>(stream.tokens_seen() * static_cast<std::int64_t>(shards))) / planned;
        const double lr = config.lr * std::max(config.min_lr_fraction, 1.0 - progress);
        if (pair.context.empty()) continue;
        const auto [l, n] = step(pair, sampler, neg_rng, store, lr);
        loss[shard] += l;
        examples[shard] += n;
      }
    };
    if (shards == 1) {
      worker(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t s = 0; s < shards; ++s) pool.emplace_back(worker, s);
    }
    double total_loss = 0.0;
    std::int64_t total_examples = 0;
    for (std::size_t s = 0; s < shards; ++s) {
      total_loss += loss[s];
      total_examples += examples[s];
    }
    if (!std::isfinite(total_loss)) throw numeric_error("training diverged in epoch " + std::to_string(epoch));
    if (stats) {
      stats->epoch_loss.push_back(total_examples ? total_loss / static_cast<double>(total_examples) : 0.0);
      stats->examples += total_examples;
    }
  }
  return store;
}

}  // namespace

EmbeddingStore train_cbow_family(const EncodedCorpus& corpus, Variant variant, const EmbedConfig& config,
                                 const ModelContext& ctx, TrainStats* stats) {
  if (is_skipgram(variant)) throw usage_error("train_cbow_family: not a CBOW-family variant");
  return run_training(corpus, variant, config, ctx, stats,
                      [&](const TrainingPair& pair, const NegSampler& sampler, Rng& rng, EmbeddingStore& store,
                          double lr) -> std::pair<double, std::int64_t> {
                        const auto negatives = sampler.draw_negatives(config.negatives, pair.target, rng);
                        return {cbow_step(variant, pair.target, pair.context, negatives, store, ctx, lr), 1};
                      });
}

EmbeddingStore train_skipgram_family(const EncodedCorpus& corpus, Variant variant, const EmbedConfig& config,
                                     const ModelContext& ctx, TrainStats* stats) {
  if (!is_skipgram(variant)) throw usage_error("train_skipgram_family: not a Skipgram-family variant");
  return run_training(corpus, variant, config, ctx, stats,
                      [&](const TrainingPair& pair, const NegSampler& sampler, Rng& rng, EmbeddingStore& store,
                          double lr) -> std::pair<double, std::int64_t> {
                        double loss = 0.0;
                        for (WordId c : pair.context) {
                          const auto negatives = sampler.draw_negatives(config.negatives, c, rng);
                          loss += skipgram_step(variant, pair.target, c, negatives, store, ctx, lr);
                        }
                        return {loss, static_cast<std::int64_t>(pair.context.size())};
                      });
}

EmbeddingStore train_window_model(const EncodedCorpus& corpus, Variant variant, const EmbedConfig& config,
                                  const ModelContext& ctx, TrainStats* stats) {
  return is_skipgram(variant) ? train_skipgram_family(corpus, variant, config, ctx, stats)
                              : train_cbow_family(corpus, variant, config, ctx, stats);
}

Matrix evaluation_vectors(Variant variant, const EmbeddingStore& store, const ModelContext& ctx, bool word_only) {
  require(ctx, variant);
  const auto comp = word_only ? Composition::kWord : composition_of(variant);
  Matrix out(store.word_in.rows(), store.dims);
  for (std::size_t w = 0; w < out.rows(); ++w) add_composed(comp, static_cast<WordId>(w), store, ctx, 1.0, out.row(w));
  return out;
}

}  // namespace gwe
