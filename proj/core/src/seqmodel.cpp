#include "gwe/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "gwe/embed.hpp"
#include "gwe/error.hpp"
#include "gwe/rng.hpp"

namespace gwe::seq {

double elu(double x, double a) { return x >= 0.0 ? x : a * std::expm1(x); }

namespace {

double elu_grad(double x) { return x >= 0.0 ? 1.0 : std::exp(x); }
double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }
double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

// out = M v (+ bias)
std::vector<double> affine(const Matrix& m, std::span<const double> v, std::span<const double> bias) {
  std::vector<double> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = dot(m.row(r), v) + (bias.empty() ? 0.0 : bias[r]);
  return out;
}

void add_matvec(std::vector<double>& out, const Matrix& m, std::span<const double> v) {
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] += dot(m.row(r), v);
}

// out += Mᵀ v
void add_matvec_t(std::span<double> out, const Matrix& m, std::span<const double> v) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (v[r] != 0.0) axpy(v[r], m.row(r), out);
  }
}

// M += a bᵀ
void add_outer(Matrix& m, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (a[r] != 0.0) axpy(a[r], b, m.row(r));
  }
}

void add_vec(std::span<double> out, std::span<const double> v) {
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[k];
}

void fill_uniform(Matrix& m, double bound, Rng& rng) {
  for (auto& v : m.values()) v = rng.uniform(-bound, bound);
}

template <typename T, typename Self>
std::vector<ParamView<T>> gru_views(Self& p) {
  std::vector<ParamView<T>> out;
  const auto in = static_cast<std::uint64_t>(p.input_size);
  const auto h = static_cast<std::uint64_t>(p.hidden_size);
  for (std::size_t l = 0; l < 2; ++l) {
    auto& L = p.layers[l];
    const auto pre = "gru" + std::to_string(l + 1) + ".";
    const std::uint64_t lin = l == 0 ? in : h;
    out.push_back({pre + "wz", {h, lin}, std::span<T>(L.wz.values())});
    out.push_back({pre + "uz", {h, h}, std::span<T>(L.uz.values())});
    out.push_back({pre + "bz", {h}, std::span<T>(L.bz)});
    out.push_back({pre + "wr", {h, lin}, std::span<T>(L.wr.values())});
    out.push_back({pre + "ur", {h, h}, std::span<T>(L.ur.values())});
    out.push_back({pre + "br", {h}, std::span<T>(L.br)});
    out.push_back({pre + "wn", {h, lin}, std::span<T>(L.wn.values())});
    out.push_back({pre + "un", {h, h}, std::span<T>(L.un.values())});
    out.push_back({pre + "bn", {h}, std::span<T>(L.bn)});
  }
  return out;
}

template <typename T, typename Self>
std::vector<ParamView<T>> head_views(Self& head, const std::string& prefix) {
  const auto hid = static_cast<std::uint64_t>(head.a1.rows());
  return {
      {prefix + "a1", {hid, static_cast<std::uint64_t>(head.a1.cols())}, std::span<T>(head.a1.values())},
      {prefix + "c1", {hid}, std::span<T>(head.c1)},
      {prefix + "a2", {static_cast<std::uint64_t>(head.a2.rows()), hid}, std::span<T>(head.a2.values())},
      {prefix + "c2", {static_cast<std::uint64_t>(head.a2.rows())}, std::span<T>(head.c2)},
  };
}

GruLayer zero_layer(std::size_t in, std::size_t h) {
  GruLayer L;
  L.wz = L.wr = L.wn = Matrix(h, in);
  L.uz = L.ur = L.un = Matrix(h, h);
  L.bz.assign(h, 0.0);
  L.br.assign(h, 0.0);
  L.bn.assign(h, 0.0);
  return L;
}

template <typename Views>
void append_tensors(TensorFile& file, const Views& views) {
  for (const auto& v : views) file.tensors.push_back({v.name, v.shape, {v.data.begin(), v.data.end()}});
}

void read_tensors(const TensorFile& file, std::vector<ParamView<double>> views) {
  for (auto& v : views) {
    const auto& t = file.tensor(v.name);
    if (t.shape != v.shape) throw data_error("checkpoint tensor '" + v.name + "' has the wrong shape");
    std::copy(t.data.begin(), t.data.end(), v.data.begin());
  }
}

void zero(std::vector<ParamView<double>> views) {
  for (auto& v : views) std::fill(v.data.begin(), v.data.end(), 0.0);
}

void adagrad_all(std::vector<ParamView<double>> params, std::vector<ParamView<double>> grads,
                 std::vector<ParamView<double>> accum, double lr) {
  for (std::size_t k = 0; k < params.size(); ++k) adagrad_update(params[k].data, grads[k].data, accum[k].data, lr);
}

std::size_t meta_size(const TensorFile& file, const std::string& key) {
  const auto v = file.meta_value(key);
  if (v <= 0 || v > (1 << 24)) throw data_error("checkpoint: bad value for '" + key + "'");
  return static_cast<std::size_t>(v);
}

void check_kind(const TensorFile& file, const std::string& kind) {
  if (file.kind != kind) throw data_error("checkpoint kind is '" + file.kind + "', expected '" + kind + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// GRU

GruParams GruParams::zeros(std::size_t input_size, std::size_t hidden_size) {
  GruParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.layers[0] = zero_layer(input_size, hidden_size);
  p.layers[1] = zero_layer(hidden_size, hidden_size);
  return p;
}

GruParams GruParams::init(std::size_t input_size, std::size_t hidden_size, std::uint64_t seed) {
  if (input_size == 0 || hidden_size == 0) throw usage_error("GRU sizes must be positive");
  GruParams p = zeros(input_size, hidden_size);
  Rng rng(derive_seed(seed, "gru-init"));
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_size));
  for (auto& L : p.layers) {
    for (Matrix* m : {&L.wz, &L.uz, &L.wr, &L.ur, &L.wn, &L.un}) fill_uniform(*m, bound, rng);
  }
  return p;
}

std::vector<ParamView<double>> GruParams::views() { return gru_views<double>(*this); }
std::vector<ParamView<const double>> GruParams::views() const { return gru_views<const double>(*this); }

GruTrace gru_trace(const Sequence& inputs, const GruParams& params) {
  if (inputs.empty()) throw usage_error("GRU input sequence is empty");
  GruTrace trace;
  const std::size_t H = params.hidden_size;
  for (std::size_t l = 0; l < 2; ++l) {
    const auto& L = params.layers[l];
    std::vector<double> h(H, 0.0);
    for (std::size_t t = 0; t < inputs.size(); ++t) {
      GruStep s;
      if (l == 0) {
        if (inputs[t].size() != params.input_size) throw usage_error("GRU input has the wrong width");
        s.x.assign(inputs[t].begin(), inputs[t].end());
      } else {
        s.x = trace.layers[0][t].h;
      }
      s.h_prev = h;
      s.z = affine(L.wz, s.x, L.bz);
      add_matvec(s.z, L.uz, h);
      s.r = affine(L.wr, s.x, L.br);
      add_matvec(s.r, L.ur, h);
      for (std::size_t k = 0; k < H; ++k) {
        s.z[k] = sigmoid(s.z[k]);
        s.r[k] = sigmoid(s.r[k]);
      }
      std::vector<double> rh(H);
      for (std::size_t k = 0; k < H; ++k) rh[k] = s.r[k] * h[k];
      s.n = affine(L.wn, s.x, L.bn);
      add_matvec(s.n, L.un, rh);
      s.h.resize(H);
      for (std::size_t k = 0; k < H; ++k) {
        s.n[k] = std::tanh(s.n[k]);
        s.h[k] = s.z[k] * h[k] + (1.0 - s.z[k]) * s.n[k];
      }
      h = s.h;
      trace.layers[l].push_back(std::move(s));
    }
  }
  return trace;
}

std::vector<double> gru_forward(const Sequence& inputs, const GruParams& params) {
  return gru_trace(inputs, params).output();
}

void gru_backward(const GruTrace& trace, const GruParams& params, std::span<const double> grad_output,
                  GruParams& grads) {
  const std::size_t H = params.hidden_size;
  const std::size_t T = trace.layers[0].size();
  // Gradient arriving at each step's output from the layer above.
  std::vector<std::vector<double>> from_above(T, std::vector<double>(H, 0.0));
  std::copy(grad_output.begin(), grad_output.end(), from_above[T - 1].begin());

  for (std::size_t l = 2; l-- > 0;) {
    const auto& L = params.layers[l];
    auto& G = grads.layers[l];
    std::vector<std::vector<double>> to_below(T, std::vector<double>(l == 0 ? 0 : H, 0.0));
    std::vector<double> dh_next(H, 0.0);
    std::vector<double> dz(H), dr(H), dan(H), drh(H), rh(H);
    for (std::size_t t = T; t-- > 0;) {
      const auto& s = trace.layers[l][t];
      std::vector<double> dh(H), dh_prev(H);
      for (std::size_t k = 0; k < H; ++k) dh[k] = dh_next[k] + from_above[t][k];
      for (std::size_t k = 0; k < H; ++k) {
        dz[k] = dh[k] * (s.h_prev[k] - s.n[k]) * s.z[k] * (1.0 - s.z[k]);
        dan[k] = dh[k] * (1.0 - s.z[k]) * (1.0 - s.n[k] * s.n[k]);
        dh_prev[k] = dh[k] * s.z[k];
        rh[k] = s.r[k] * s.h_prev[k];
      }
      std::fill(drh.begin(), drh.end(), 0.0);
      add_matvec_t(drh, L.un, dan);
      for (std::size_t k = 0; k < H; ++k) {
        dr[k] = drh[k] * s.h_prev[k] * s.r[k] * (1.0 - s.r[k]);
        dh_prev[k] += drh[k] * s.r[k];
      }
      add_outer(G.wn, dan, s.x);
      add_outer(G.un, dan, rh);
      add_vec(G.bn, dan);
      add_outer(G.wz, dz, s.x);
      add_outer(G.uz, dz, s.h_prev);
      add_vec(G.bz, dz);
      add_outer(G.wr, dr, s.x);
      add_outer(G.ur, dr, s.h_prev);
      add_vec(G.br, dr);
      add_matvec_t(dh_prev, L.uz, dz);
      add_matvec_t(dh_prev, L.ur, dr);
      if (l > 0) {
        add_matvec_t(to_below[t], L.wn, dan);
        add_matvec_t(to_below[t], L.wz, dz);
        add_matvec_t(to_below[t], L.wr, dr);
      }
      dh_next = std::move(dh_prev);
    }
    from_above = std::move(to_below);
  }
}

// ---------------------------------------------------------------------------
// Head

MlpHead MlpHead::zeros(std::size_t in, std::size_t hidden, std::size_t out) {
  MlpHead h;
  h.a1 = Matrix(hidden, in);
  h.c1.assign(hidden, 0.0);
  h.a2 = Matrix(out, hidden);
  h.c2.assign(out, 0.0);
  return h;
}

MlpHead MlpHead::init(std::size_t in, std::size_t hidden, std::size_t out, std::uint64_t seed) {
  if (in == 0 || hidden == 0 || out == 0) throw usage_error("head sizes must be positive");
  MlpHead h = zeros(in, hidden, out);
  Rng rng(seed);
  fill_uniform(h.a1, std::sqrt(6.0 / static_cast<double>(in + hidden)), rng);
  fill_uniform(h.a2, std::sqrt(6.0 / static_cast<double>(hidden + out)), rng);
  return h;
}

std::vector<ParamView<double>> MlpHead::views(const std::string& prefix) { return head_views<double>(*this, prefix); }
std::vector<ParamView<const double>> MlpHead::views(const std::string& prefix) const {
  return head_views<const double>(*this, prefix);
}

HeadTrace head_trace(std::span<const double> input, const MlpHead& head) {
  if (input.size() != head.a1.cols()) throw usage_error("head input has the wrong width");
  HeadTrace t;
  t.input.assign(input.begin(), input.end());
  t.pre1 = affine(head.a1, input, head.c1);
  t.h1.resize(t.pre1.size());
  for (std::size_t k = 0; k < t.h1.size(); ++k) t.h1[k] = elu(t.pre1[k]);
  t.pre2 = affine(head.a2, t.h1, head.c2);
  t.output.resize(t.pre2.size());
  for (std::size_t k = 0; k < t.output.size(); ++k) t.output[k] = elu(t.pre2[k]);
  return t;
}

std::vector<double> head_forward(std::span<const double> input, const MlpHead& head) {
  return head_trace(input, head).output;
}

std::vector<double> head_backward(const HeadTrace& trace, const MlpHead& head, std::span<const double> grad_output,
                                  MlpHead& grads) {
  std::vector<double> d2(trace.pre2.size());
  for (std::size_t k = 0; k < d2.size(); ++k) d2[k] = grad_output[k] * elu_grad(trace.pre2[k]);
  add_outer(grads.a2, d2, trace.h1);
  add_vec(grads.c2, d2);
  std::vector<double> d1(trace.h1.size(), 0.0);
  add_matvec_t(d1, head.a2, d2);
  for (std::size_t k = 0; k < d1.size(); ++k) d1[k] *= elu_grad(trace.pre1[k]);
  add_outer(grads.a1, d1, trace.input);
  add_vec(grads.c1, d1);
  std::vector<double> din(trace.input.size(), 0.0);
  add_matvec_t(din, head.a1, d1);
  return din;
}

Sequence glyph_sequence(WordId word, const Vocabulary& vocab, const GlyphTable& glyphs) {
  Sequence seq;
  for (CharId c : vocab.decomposition(word)) seq.push_back(glyphs.row(c));
  return seq;
}

std::vector<double> rnn_word_vector(WordId word, const Vocabulary& vocab, const GlyphTable& glyphs,
                                    const GruParams& gru, const MlpHead& head) {
  return head_forward(gru_forward(glyph_sequence(word, vocab, glyphs), gru), head);
}

// ---------------------------------------------------------------------------
// RNN-Skipgram

RnnSkipgramModel RnnSkipgramModel::init(std::size_t vocab_size, std::size_t input_size, const RnnConfig& config) {
  RnnSkipgramModel m;
  m.gru = GruParams::init(input_size, config.hidden, config.seed);
  m.head = MlpHead::init(config.hidden, config.head_hidden, config.output, derive_seed(config.seed, "head-init"));
  m.output = Matrix(vocab_size, config.output);
  return m;
}

RnnSkipgramModel RnnSkipgramModel::zeros_like(const RnnSkipgramModel& model) {
  RnnSkipgramModel m;
  m.gru = GruParams::zeros(model.gru.input_size, model.gru.hidden_size);
  m.head = MlpHead::zeros(model.head.a1.cols(), model.head.a1.rows(), model.head.a2.rows());
  m.output = Matrix(model.output.rows(), model.output.cols());
  return m;
}

std::vector<ParamView<double>> RnnSkipgramModel::views() {
  auto v = gru.views();
  for (auto& h : head.views("head.")) v.push_back(std::move(h));
  v.push_back({"output", {output.rows(), output.cols()}, std::span<double>(output.values())});
  return v;
}

TensorFile RnnSkipgramModel::to_tensor_file() const {
  TensorFile f;
  f.kind = "rnn-skipgram";
  f.meta = {{"input", static_cast<std::int64_t>(gru.input_size)},
            {"hidden", static_cast<std::int64_t>(gru.hidden_size)},
            {"head_hidden", static_cast<std::int64_t>(head.a1.rows())},
            {"output", static_cast<std::int64_t>(head.a2.rows())},
            {"vocab", static_cast<std::int64_t>(output.rows())}};
  append_tensors(f, gru.views());
  append_tensors(f, head.views("head."));
  f.tensors.push_back({"output", {output.rows(), output.cols()}, {output.values().begin(), output.values().end()}});
  return f;
}

RnnSkipgramModel RnnSkipgramModel::from_tensor_file(const TensorFile& file) {
  check_kind(file, "rnn-skipgram");
  RnnSkipgramModel m;
  m.gru = GruParams::zeros(meta_size(file, "input"), meta_size(file, "hidden"));
  m.head = MlpHead::zeros(m.gru.hidden_size, meta_size(file, "head_hidden"), meta_size(file, "output"));
  m.output = Matrix(meta_size(file, "vocab"), m.head.a2.rows());
  read_tensors(file, m.views());
  return m;
}

namespace {

// Forward, scores and backward for one example. Output-row gradients are
// summed per word and handed to `on_output` once each, after all scores are
// computed.
template <typename OnOutput>
double skipgram_core(const RnnSkipgramModel& model, const SkipgramExample& ex, const Vocabulary& vocab,
                     const GlyphTable& glyphs, GruParams* ggru, MlpHead* ghead, OnOutput&& on_output) {
  if (ex.negatives.size() != ex.contexts.size()) throw usage_error("one negative list per context word expected");
  const auto gtrace = gru_trace(glyph_sequence(ex.target, vocab, glyphs), model.gru);
  const auto htrace = head_trace(gtrace.output(), model.head);
  const auto& v = htrace.output;

  double loss = 0.0;
  std::map<WordId, double> coef;  // summed dLoss/dScore per output word
  auto score = [&](WordId w, bool positive) {
    const double s = dot(v, model.output.row(static_cast<std::size_t>(w)));
    loss -= positive ? log_sigmoid(s) : log_sigmoid(-s);
    coef[w] += positive ? sigmoid(s) - 1.0 : sigmoid(s);
  };
  for (std::size_t c = 0; c < ex.contexts.size(); ++c) {
    score(ex.contexts[c], true);
    for (WordId n : ex.negatives[c]) score(n, false);
  }
  if (!ggru) return loss;

  std::vector<double> grad_v(v.size(), 0.0);
  for (const auto& [w, k] : coef) axpy(k, model.output.row(static_cast<std::size_t>(w)), grad_v);
  std::vector<double> row(v.size());
  for (const auto& [w, k] : coef) {
    for (std::size_t d = 0; d < v.size(); ++d) row[d] = k * v[d];
    on_output(w, std::span<const double>(row));
  }
  const auto grad_g = head_backward(htrace, model.head, grad_v, *ghead);
  gru_backward(gtrace, model.gru, grad_g, *ggru);
  return loss;
}

}  // namespace

double rnn_skipgram_loss(const RnnSkipgramModel& model, const SkipgramExample& example, const Vocabulary& vocab,
                         const GlyphTable& glyphs) {
  return skipgram_core(model, example, vocab, glyphs, nullptr, nullptr, [](WordId, std::span<const double>) {});
}

double rnn_skipgram_gradient(const RnnSkipgramModel& model, const SkipgramExample& example, const Vocabulary& vocab,
                             const GlyphTable& glyphs, RnnSkipgramModel& grads) {
  return skipgram_core(model, example, vocab, glyphs, &grads.gru, &grads.head,
                       [&](WordId w, std::span<const double> g) { add_vec(grads.output.row(static_cast<std::size_t>(w)), g); });
}

RnnSkipgramModel rnn_skipgram_train(const EncodedCorpus& corpus, const Vocabulary& vocab, const GlyphTable& glyphs,
                                    const RnnConfig& config, std::vector<double>* epoch_loss) {
  if (config.epochs < 0) throw usage_error("epochs must be >= 0");
  if (glyphs.size() != vocab.char_count()) throw usage_error("glyph table does not cover the character set");
  RnnSkipgramModel model = RnnSkipgramModel::init(vocab.size(), glyphs.dims(), config);
  if (config.epochs == 0) return model;
  RnnSkipgramModel accum = RnnSkipgramModel::zeros_like(model);
  GruParams ggru = GruParams::zeros(model.gru.input_size, model.gru.hidden_size);
  MlpHead ghead = MlpHead::zeros(model.head.a1.cols(), model.head.a1.rows(), model.head.a2.rows());
  const NegSampler sampler(vocab.freqs());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto epoch_seed = derive_seed(derive_seed(config.seed, "rnn-sg"), static_cast<std::uint64_t>(epoch));
    PairStream stream(corpus, vocab, config.window, config.subsample, derive_seed(epoch_seed, "subsample"));
    Rng neg_rng(derive_seed(epoch_seed, "negatives"));
    double total = 0.0;
    std::int64_t examples = 0;
    TrainingPair pair;
    while (stream.next(pair)) {
      if (pair.context.empty()) continue;
      SkipgramExample ex{pair.target, pair.context, {}};
      for (WordId c : pair.context) ex.negatives.push_back(sampler.draw_negatives(config.negatives, c, neg_rng));
      zero(ggru.views());
      zero(ghead.views(""));
      total += skipgram_core(model, ex, vocab, glyphs, &ggru, &ghead, [&](WordId w, std::span<const double> g) {
        const auto r = static_cast<std::size_t>(w);
        adagrad_update(model.output.row(r), g, accum.output.row(r), config.lr);
      });
      adagrad_all(model.gru.views(), ggru.views(), accum.gru.views(), config.lr);
      adagrad_all(model.head.views(""), ghead.views(""), accum.head.views(""), config.lr);
      ++examples;
    }
    if (!std::isfinite(total)) throw numeric_error("RNN-Skipgram diverged in epoch " + std::to_string(epoch));
    if (epoch_loss) epoch_loss->push_back(examples ? total / static_cast<double>(examples) : 0.0);
  }
  return model;
}

Matrix rnn_skipgram_vectors(const RnnSkipgramModel& model, const Vocabulary& vocab, const GlyphTable& glyphs) {
  Matrix out(vocab.size(), model.head.output_size());
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    const auto v = rnn_word_vector(static_cast<WordId>(w), vocab, glyphs, model.gru, model.head);
    std::copy(v.begin(), v.end(), out.row(w).begin());
  }
  return out;
}

// ---------------------------------------------------------------------------
// RNN-GloVe

RnnGloveModel RnnGloveModel::init(std::size_t input_size, const RnnConfig& config) {
  RnnGloveModel m;
  m.gru = GruParams::init(input_size, config.hidden, config.seed);
  m.head_w = MlpHead::init(config.hidden, config.head_hidden, config.output, derive_seed(config.seed, "head-w"));
  m.head_w_tilde =
      MlpHead::init(config.hidden, config.head_hidden, config.output, derive_seed(config.seed, "head-w-tilde"));
  return m;
}

RnnGloveModel RnnGloveModel::zeros_like(const RnnGloveModel& model) {
  RnnGloveModel m;
  m.gru = GruParams::zeros(model.gru.input_size, model.gru.hidden_size);
  m.head_w = MlpHead::zeros(model.head_w.a1.cols(), model.head_w.a1.rows(), model.head_w.a2.rows());
  m.head_w_tilde =
      MlpHead::zeros(model.head_w_tilde.a1.cols(), model.head_w_tilde.a1.rows(), model.head_w_tilde.a2.rows());
  return m;
}

std::vector<ParamView<double>> RnnGloveModel::views() {
  auto v = gru.views();
  for (auto& h : head_w.views("head_w.")) v.push_back(std::move(h));
  for (auto& h : head_w_tilde.views("head_w_tilde.")) v.push_back(std::move(h));
  return v;
}

TensorFile RnnGloveModel::to_tensor_file() const {
  TensorFile f;
  f.kind = "rnn-glove";
  f.meta = {{"input", static_cast<std::int64_t>(gru.input_size)},
            {"hidden", static_cast<std::int64_t>(gru.hidden_size)},
            {"head_hidden", static_cast<std::int64_t>(head_w.a1.rows())},
            {"output", static_cast<std::int64_t>(head_w.a2.rows())}};
  append_tensors(f, gru.views());
  append_tensors(f, head_w.views("head_w."));
  append_tensors(f, head_w_tilde.views("head_w_tilde."));
  return f;
}

RnnGloveModel RnnGloveModel::from_tensor_file(const TensorFile& file) {
  check_kind(file, "rnn-glove");
  RnnGloveModel m;
  m.gru = GruParams::zeros(meta_size(file, "input"), meta_size(file, "hidden"));
  m.head_w = MlpHead::zeros(m.gru.hidden_size, meta_size(file, "head_hidden"), meta_size(file, "output"));
  m.head_w_tilde = m.head_w;
  read_tensors(file, m.views());
  return m;
}

namespace {

double glove_core(const RnnGloveModel& model, const CoocEntry& e, const Vocabulary& vocab, const GlyphTable& glyphs,
                  const GloveLossTerms& terms, RnnGloveModel* grads) {
  if (!(e.value > 0.0)) throw usage_error("co-occurrence value must be positive");
  const auto gi = gru_trace(glyph_sequence(static_cast<WordId>(e.i), vocab, glyphs), model.gru);
  const auto gj = gru_trace(glyph_sequence(static_cast<WordId>(e.j), vocab, glyphs), model.gru);
  const auto hi = head_trace(gi.output(), model.head_w);
  const auto hj = head_trace(gj.output(), model.head_w_tilde);
  const double r = dot(hi.output, hj.output) - std::log(e.value);
  const double f = glove_weight(e.value, terms.x_max, terms.alpha);
  if (grads) {
    const double g = 2.0 * f * r;
    std::vector<double> dwi(hj.output.size()), dwj(hi.output.size());
    for (std::size_t d = 0; d < dwi.size(); ++d) {
      dwi[d] = g * hj.output[d];
      dwj[d] = g * hi.output[d];
    }
    const auto dgi = head_backward(hi, model.head_w, dwi, grads->head_w);
    const auto dgj = head_backward(hj, model.head_w_tilde, dwj, grads->head_w_tilde);
    gru_backward(gi, model.gru, dgi, grads->gru);
    gru_backward(gj, model.gru, dgj, grads->gru);
  }
  return f * r * r;
}

}  // namespace

double rnn_glove_loss(const RnnGloveModel& model, const CoocEntry& entry, const Vocabulary& vocab,
                      const GlyphTable& glyphs, const GloveLossTerms& terms) {
  return glove_core(model, entry, vocab, glyphs, terms, nullptr);
}

double rnn_glove_gradient(const RnnGloveModel& model, const CoocEntry& entry, const Vocabulary& vocab,
                          const GlyphTable& glyphs, const GloveLossTerms& terms, RnnGloveModel& grads) {
  return glove_core(model, entry, vocab, glyphs, terms, &grads);
}

RnnGloveModel rnn_glove_train(const SparseCooc& cooc, const Vocabulary& vocab, const GlyphTable& glyphs,
                              const RnnConfig& config, std::vector<double>* epoch_loss) {
  if (config.epochs < 0) throw usage_error("epochs must be >= 0");
  if (glyphs.size() != vocab.char_count()) throw usage_error("glyph table does not cover the character set");
  if (cooc.vocab_size != vocab.size()) throw usage_error("co-occurrence matrix does not match the vocabulary");
  RnnGloveModel model = RnnGloveModel::init(glyphs.dims(), config);
  const SparseCooc kept = cooc.filter_min(config.min_cooc);
  RnnGloveModel accum = RnnGloveModel::zeros_like(model);
  RnnGloveModel grads = RnnGloveModel::zeros_like(model);
  std::vector<std::size_t> order(kept.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, "rnn-glove-shuffle"));

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    for (std::size_t k : order) {
      zero(grads.views());
      total += glove_core(model, kept.entries[k], vocab, glyphs, config.terms, &grads);
      adagrad_all(model.views(), grads.views(), accum.views(), config.lr);
    }
    if (!std::isfinite(total)) throw numeric_error("RNN-GloVe diverged in epoch " + std::to_string(epoch));
    if (epoch_loss) epoch_loss->push_back(order.empty() ? 0.0 : total / static_cast<double>(order.size()));
  }
  return model;
}

Matrix rnn_glove_vectors(const RnnGloveModel& model, const Vocabulary& vocab, const GlyphTable& glyphs) {
  Matrix out(vocab.size(), model.head_w.output_size());
  for (std::size_t w = 0; w < vocab.size(); ++w) {
    const auto g = gru_forward(glyph_sequence(static_cast<WordId>(w), vocab, glyphs), model.gru);
    const auto a = head_forward(g, model.head_w);
    const auto b = head_forward(g, model.head_w_tilde);
    for (std::size_t d = 0; d < a.size(); ++d) out(w, d) = a[d] + b[d];
  }
  return out;
}

}  // namespace gwe::seq
