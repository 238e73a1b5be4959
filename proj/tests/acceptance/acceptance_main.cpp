// Acceptance runner: one PASS/FAIL line per criterion.
//   gwe_acceptance [--only <criterion>]... [--list]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gwe/convae.hpp"
#include "gwe/cooc.hpp"
#include "gwe/corpus.hpp"
#include "gwe/embed.hpp"
#include "gwe/eval.hpp"
#include "gwe/glyph.hpp"
#include "gwe/pipeline.hpp"
#include "gwe/seqmodel.hpp"
#include "test_support.hpp"

using namespace gwe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string num(double v, int precision = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome closed_form() {
  Outcome o;
  o.require(glove_weight(100.0) == 1.0, "glove_weight(100) != 1");
  o.require(std::abs(glove_weight(50.0) - std::pow(0.5, 0.75)) < 1e-12, "glove_weight(50)");

  const std::vector<std::string> lines{"a b c"};
  const auto vocab = testing::vocab_of(lines);
  const auto cooc = build_cooc(encode_corpus(lines, vocab), vocab.size(), 5, true);
  const auto a = static_cast<std::uint32_t>(vocab.find("a")), c = static_cast<std::uint32_t>(vocab.find("c"));
  o.require(cooc.value(a, c) == 0.5 && cooc.value(c, a) == 0.5, "harmonic X_ac != 0.5");

  o.require(std::abs(subsample_keep_prob(4e-5, 1e-5) - 0.5) < 1e-12, "keep_prob(4t, t) != 0.5");
  o.require(std::abs(seq::elu(-1.0) - (std::exp(-1.0) - 1.0)) < 1e-12, "elu(-1)");
  return o;
}

// ---------------------------------------------------------------------------
// Gradient suite

double worst_fd(const std::function<double()>& f, std::span<double> params, std::span<const double> analytic,
                double h = 1e-6) {
  return testing::max_fd_error(f, params, analytic, h);
}

double convae_fd() {
  using namespace convae;
  Geometry g;
  g.input_size = 12;
  g.levels[0] = {1, 2, 3, 2, 1};
  g.levels[1] = {2, 3, 3, 2, 1};
  g.levels[2] = {3, 3, 3, 2, 1};
  g.levels[3] = {3, 4, 2, 1, 0};
  g.levels[4] = {4, 5, 1, 1, 0};
  auto p = init_params(g, 1);
  Rng rng(2);
  for (int l = 0; l < kLevels; ++l) {
    testing::fill_random(p.kernels[l], rng, 0.6);
    for (auto& b : p.encoder_biases[l]) b = rng.uniform(0.0, 0.3);
    for (auto& b : p.decoder_biases[l]) b = rng.uniform(0.0, 0.3);
  }
  std::vector<FeatureMap> batch(2, FeatureMap(1, 12, 12));
  for (auto& m : batch) testing::fill_random(m.data, rng);
  for (auto& m : batch) {
    for (auto& v : m.data) v = std::abs(v);
  }
  const double l1 = 0.01;
  const auto grads = backward(batch, p, l1);
  const auto f = [&] {
    double total = 0.0;
    for (const auto& x : batch) {
      const auto t = forward(x, p);
      total += loss(x, t.reconstruction(), std::span(t.encoded).subspan(1, kLevels), l1);
    }
    return total;
  };
  // The loss is O(100) against O(1e-4) gradients, so a smaller step loses
  // the difference to cancellation.
  const double h = 1e-5;
  double worst = 0.0;
  for (int l = 0; l < kLevels; ++l) {
    worst = std::max({worst, worst_fd(f, p.kernels[l], grads.kernels[l], h),
                      worst_fd(f, p.encoder_biases[l], grads.encoder_biases[l], h),
                      worst_fd(f, p.decoder_biases[l], grads.decoder_biases[l], h)});
  }
  return worst;
}

double embed_fd(Variant v) {
  const auto vocab = build_vocab(std::vector<std::string>{"山水", "山水", "水", "火山"}, 0);
  Rng rng(3);
  Matrix gm(vocab.char_count(), 4);
  testing::fill_random(gm.values(), rng, 0.5);
  const GlyphTable glyphs(gm);
  const auto radicals = RadicalIndex::from_pairs({{U'山', "山"}, {U'水', "氵"}}, vocab);
  auto store = EmbeddingStore::init(vocab.size(), vocab.char_count(), radicals.radical_count(), 4, 1);
  for (Matrix* m : {&store.word_in, &store.word_out, &store.chars, &store.radicals}) {
    testing::fill_random(m->values(), rng, 0.5);
  }
  const ModelContext ctx{&vocab, &glyphs, &radicals};
  const WordId t = vocab.find("山水"), c1 = vocab.find("水"), c2 = vocab.find("火山");
  const std::vector<WordId> context{c1, c2}, negs{c1, c2}, sg_negs{c1};
  const auto loss_of = [&](const EmbeddingStore& s) {
    return is_skipgram(v) ? skipgram_example_loss(v, t, c2, sg_negs, s, ctx)
                          : cbow_example_loss(v, t, context, negs, s, ctx);
  };
  const double lr = 1e-3;
  auto stepped = store;
  if (is_skipgram(v)) {
    skipgram_step(v, t, c2, sg_negs, stepped, ctx, lr);
  } else {
    cbow_step(v, t, context, negs, stepped, ctx, lr);
  }
  double worst = 0.0;
  const std::array<std::pair<Matrix*, const Matrix*>, 4> blocks{{{&store.word_in, &stepped.word_in},
                                                                 {&store.word_out, &stepped.word_out},
                                                                 {&store.chars, &stepped.chars},
                                                                 {&store.radicals, &stepped.radicals}}};
  for (const auto& [param, after] : blocks) {
    std::vector<double> analytic(param->size());
    for (std::size_t i = 0; i < analytic.size(); ++i) analytic[i] = ((*param)[i] - (*after)[i]) / lr;
    worst = std::max(worst, worst_fd([&] { return loss_of(store); }, param->values(), analytic));
  }
  return worst;
}

double glove_fd() {
  auto p = GloveParams::init(4, 5, 3);
  Rng rng(4);
  testing::fill_random(p.w.values(), rng, 0.5);
  testing::fill_random(p.w_tilde.values(), rng, 0.5);
  testing::fill_random(p.b, rng, 0.5);
  testing::fill_random(p.b_tilde, rng, 0.5);
  const CoocEntry e{1, 3, 7.5};
  const auto g = glove_gradient(e, p);
  const auto f = [&] { return glove_loss(e, p); };
  std::vector<double> bi{g.b_i}, bj{g.b_tilde_j};
  return std::max({worst_fd(f, p.w.row(1), g.w_i), worst_fd(f, p.w_tilde.row(3), g.w_tilde_j),
                   worst_fd(f, std::span(&p.b[1], 1), bi), worst_fd(f, std::span(&p.b_tilde[3], 1), bj)});
}

template <typename Model>
double model_fd(Model& model, Model& grads, const std::function<double()>& f) {
  auto pv = model.views();
  auto gv = grads.views();
  double worst = 0.0;
  for (std::size_t k = 0; k < pv.size(); ++k) worst = std::max(worst, worst_fd(f, pv[k].data, gv[k].data));
  return worst;
}

seq::RnnConfig tiny_rnn() {
  seq::RnnConfig c;
  c.hidden = 4;
  c.head_hidden = 3;
  c.output = 3;
  return c;
}

double gru_fd() {
  auto p = seq::GruParams::init(3, 4, 3);
  Rng rng(5);
  for (auto& v : p.views()) testing::fill_random(v.data, rng, 0.6);
  std::vector<std::vector<double>> xs(3, std::vector<double>(3));
  for (auto& x : xs) testing::fill_random(x, rng);
  const seq::Sequence s(xs.begin(), xs.end());
  const std::vector<double> c{0.5, -1.0, 0.25, 2.0};
  auto grads = seq::GruParams::zeros(3, 4);
  seq::gru_backward(seq::gru_trace(s, p), p, c, grads);
  return model_fd(p, grads, [&] { return dot(c, seq::gru_forward(s, p)); });
}

double rnn_models_fd() {
  const auto vocab = build_vocab(std::vector<std::string>{"日月", "日"}, 0);
  Rng rng(6);
  Matrix gm(vocab.char_count(), 3);
  testing::fill_random(gm.values(), rng);
  const GlyphTable glyphs(gm);

  auto sg = seq::RnnSkipgramModel::init(vocab.size(), 3, tiny_rnn());
  for (auto& v : sg.views()) testing::fill_random(v.data, rng, 0.6);
  const seq::SkipgramExample ex{0, {1}, {{0}}};
  auto sg_grads = seq::RnnSkipgramModel::zeros_like(sg);
  seq::rnn_skipgram_gradient(sg, ex, vocab, glyphs, sg_grads);
  double worst = model_fd(sg, sg_grads, [&] { return seq::rnn_skipgram_loss(sg, ex, vocab, glyphs); });

  auto gl = seq::RnnGloveModel::init(3, tiny_rnn());
  for (auto& v : gl.views()) testing::fill_random(v.data, rng, 0.6);
  const CoocEntry e{0, 1, 2.5};
  auto gl_grads = seq::RnnGloveModel::zeros_like(gl);
  seq::rnn_glove_gradient(gl, e, vocab, glyphs, {}, gl_grads);
  worst = std::max(worst, model_fd(gl, gl_grads, [&] { return seq::rnn_glove_loss(gl, e, vocab, glyphs); }));
  return worst;
}

Outcome gradients() {
  Outcome o;
  const double tol = 1e-4;
  const auto check = [&](const std::string& name, double err) {
    o.require(err < tol, name + " rel err " + num(err));
    if (err < tol) o.note(name + " " + num(err, 2));
  };
  check("convae", convae_fd());
  for (Variant v : {Variant::kCbow, Variant::kCwe, Variant::kMge, Variant::kCtxG, Variant::kTarG, Variant::kSkipgram,
                    Variant::kSkipgramCwe, Variant::kSkipgramCtxG}) {
    check(std::string(variant_name(v)), embed_fd(v));
  }
  check("glove", glove_fd());
  check("gru", gru_fd());
  check("rnn-heads", rnn_models_fd());
  return o;
}

// ---------------------------------------------------------------------------
// convAE

// Scaled-down schedule: 20 epochs per level. The default lr 0.001 barely
// moves Adagrad in that many steps, so it is raised and level 5 damped.
convae::TrainConfig scaled_convae(std::uint64_t seed) {
  convae::TrainConfig cfg;
  cfg.epochs_per_level = 20;
  cfg.batch = 20;
  cfg.lr = 0.03;
  cfg.level_lr_scale = {1.0, 1.0, 1.0, 1.0, 0.1};
  cfg.l1_weight = 1e-4;
  cfg.seed = seed;
  return cfg;
}

bool same_bytes(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Outcome convae_learning() {
  Outcome o;
  const auto set = synthetic_motif_set(8, 8, 11);
  std::vector<convae::FeatureMap> maps;
  for (const auto& b : set.bitmaps) maps.push_back(convae::bitmap_to_map(b));
  auto params = convae::init_params(convae::Geometry::standard(), 12);
  const double initial = convae::reconstruction_mse(maps, params);
  const auto cfg = scaled_convae(13);
  for (int level = 0; level < convae::kLevels; ++level) {
    const auto before = params;
    const auto log = convae::train_level(maps, params, level, cfg);
    o.require(log.back().loss <= log.front().loss, "level " + std::to_string(level + 1) + " loss rose");
    for (int other = 0; other < convae::kLevels; ++other) {
      if (other == level) continue;
      const bool frozen = same_bytes(params.kernels[other], before.kernels[other]) &&
                          same_bytes(params.encoder_biases[other], before.encoder_biases[other]) &&
                          same_bytes(params.decoder_biases[other], before.decoder_biases[other]);
      o.require(frozen, "level " + std::to_string(other + 1) + " moved while training level " +
                            std::to_string(level + 1));
    }
  }
  const double final_mse = convae::reconstruction_mse(maps, params);
  const double ratio = final_mse / initial;
  o.require(ratio < 0.2, "MSE ratio " + num(ratio));
  o.note("MSE " + num(initial) + " -> " + num(final_mse) + " (ratio " + num(ratio, 3) + ")");
  return o;
}

Outcome glyph_clustering() {
  Outcome o;
  int good = 0;
  std::string gaps;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto set = synthetic_motif_set(4, 5, seed);
    std::vector<convae::FeatureMap> maps;
    for (const auto& b : set.bitmaps) maps.push_back(convae::bitmap_to_map(b));
    const auto trained = convae::train_layerwise(maps, convae::init_params(convae::Geometry::standard(),
                                                                           derive_seed(seed, "init")),
                                                 scaled_convae(seed));
    std::vector<std::vector<double>> f;
    for (const auto& b : set.bitmaps) f.push_back(convae::encode(b, trained.params).values);
    double intra = 0, inter = 0;
    int ni = 0, nx = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      for (std::size_t j = i + 1; j < f.size(); ++j) {
        const double c = dot(f[i], f[j]) / (norm(f[i]) * norm(f[j]));
        if (set.group[i] == set.group[j]) {
          intra += c;
          ++ni;
        } else {
          inter += c;
          ++nx;
        }
      }
    }
    const double gap = intra / ni - inter / nx;
    good += gap >= 0.05;
    gaps += (gaps.empty() ? "" : " ") + num(gap, 3);
  }
  o.require(good >= 4, "only " + std::to_string(good) + "/5 seeds");
  o.note("gaps " + gaps);
  return o;
}

// ---------------------------------------------------------------------------
// Embeddings

Outcome embedding_sanity() {
  Outcome o;
  const auto c = testing::two_cluster_corpus(200, 10, 10, 21);
  const auto vocab = testing::vocab_of(c.lines);
  const auto corpus = encode_corpus(c.lines, vocab);
  std::vector<std::pair<std::size_t, std::size_t>> intra, inter;
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t j = 0; j < 10; ++j) {
      const auto a0 = static_cast<std::size_t>(vocab.find(c.clusters[0][i]));
      const auto a1 = static_cast<std::size_t>(vocab.find(c.clusters[1][i]));
      const auto b0 = static_cast<std::size_t>(vocab.find(c.clusters[0][j]));
      const auto b1 = static_cast<std::size_t>(vocab.find(c.clusters[1][j]));
      if (i < j) {
        intra.emplace_back(a0, b0);
        intra.emplace_back(a1, b1);
      }
      inter.emplace_back(a0, b1);
    }
  }
  EmbedConfig cfg;
  cfg.dims = 32;
  cfg.epochs = 15;
  cfg.subsample = kNoSubsampling;
  cfg.seed = 22;
  const ModelContext ctx{&vocab, nullptr, nullptr};
  for (Variant v : {Variant::kSkipgram, Variant::kCbow}) {
    const auto store = train_window_model(corpus, v, cfg, ctx);
    const auto m = evaluation_vectors(v, store, ctx);
    const double gap = testing::mean_cosine(m, intra) - testing::mean_cosine(m, inter);
    o.require(gap >= 0.2, std::string(variant_name(v)) + " gap " + num(gap));
    o.note(std::string(variant_name(v)) + " gap " + num(gap, 3));
  }
  return o;
}

Outcome cwe_mechanism() {
  Outcome o;
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    // 山水 and 山火 share 山 and appear, rarely, in the same cluster's sentences.
    auto c = testing::two_cluster_corpus(200, 10, 10, seed);
    Rng rng(seed + 50);
    for (int k = 0; k < 6; ++k) c.lines[2 * rng.below(100)] += k % 2 ? " 山水" : " 山火";
    const auto vocab = testing::vocab_of(c.lines);
    const auto corpus = encode_corpus(c.lines, vocab);
    EmbedConfig cfg;
    cfg.dims = 32;
    cfg.epochs = 15;
    cfg.negatives = 5;
    cfg.subsample = kNoSubsampling;
    cfg.seed = seed;
    const ModelContext ctx{&vocab, nullptr, nullptr};
    const auto x = static_cast<std::size_t>(vocab.find("山水")), y = static_cast<std::size_t>(vocab.find("山火"));
    const auto cos_of = [&](Variant v) {
      const auto m = evaluation_vectors(v, train_window_model(corpus, v, cfg, ctx), ctx);
      return eval::cosine(m.row(x), m.row(y));
    };
    const double cbow = cos_of(Variant::kCbow), cwe = cos_of(Variant::kCwe);
    wins += cwe > cbow;
    o.note("seed " + std::to_string(seed) + " cbow " + num(cbow, 3) + " cwe " + num(cwe, 3));
  }
  o.require(wins == 5, "CWE above CBOW on " + std::to_string(wins) + "/5 seeds");
  return o;
}

Outcome frozen_glyphs() {
  Outcome o;
  const auto c = testing::two_cluster_corpus(50, 6, 8, 31);
  const auto vocab = testing::vocab_of(c.lines);
  const auto pairs = collect_pairs(encode_corpus(c.lines, vocab), vocab, 5, kNoSubsampling, 32);
  Rng rng(33);
  Matrix gm(vocab.char_count(), 16);
  testing::fill_random(gm.values(), rng);
  const GlyphTable glyphs(gm);
  const auto sum_before = glyphs.checksum();
  const ModelContext ctx{&vocab, &glyphs, nullptr};
  const NegSampler sampler(vocab.freqs());
  for (Variant v : {Variant::kCtxG, Variant::kTarG}) {
    auto store = EmbeddingStore::init(vocab.size(), vocab.char_count(), 0, 16, 34);
    const auto start = store;
    int steps = 0;
    while (steps < 10000) {
      for (const auto& p : pairs) {
        if (p.context.empty()) continue;
        const auto negs = sampler.draw_negatives(5, p.target, rng);
        cbow_step(v, p.target, p.context, negs, store, ctx, 0.025);
        if (++steps == 10000) break;
      }
    }
    o.require(!(store == start), std::string(variant_name(v)) + " did not train");
  }
  o.require(glyphs.checksum() == sum_before && glyphs.values() == gm, "glyph table changed");
  o.note("checksum " + std::to_string(sum_before) + " unchanged after 2x10^4 steps");
  return o;
}

Outcome glove_recovery() {
  Outcome o;
  const std::size_t V = 50, D = 8;
  Rng rng(41);
  Matrix u(V, D), v(V, D);
  for (auto& x : u.values()) x = 0.5 * rng.normal();
  for (auto& x : v.values()) x = 0.5 * rng.normal();
  SparseCooc cooc;
  cooc.vocab_size = V;
  for (std::uint32_t i = 0; i < V; ++i) {
    for (std::uint32_t j = 0; j < V; ++j) cooc.entries.push_back({i, j, std::exp(dot(u.row(i), v.row(j)))});
  }
  GloveConfig cfg;
  cfg.dims = D;
  cfg.epochs = 200;
  cfg.lr = 0.05;
  cfg.seed = 42;
  std::vector<double> losses;
  const auto p = glove_train(cooc, cfg, &losses);
  double se = 0.0;
  for (const auto& e : cooc.entries) {
    const double pred = dot(p.w.row(e.i), p.w_tilde.row(e.j)) + p.b[e.i] + p.b_tilde[e.j];
    se += (pred - std::log(e.value)) * (pred - std::log(e.value));
  }
  const double rmse = std::sqrt(se / static_cast<double>(cooc.entries.size()));
  o.require(rmse < 0.05, "RMSE " + num(rmse));
  bool monotone = true;
  for (std::size_t k = 1; k < 10; ++k) monotone = monotone && losses[k] <= losses[k - 1];
  o.require(monotone, "loss rose in the first 10 epochs");
  o.note("ln X RMSE " + num(rmse, 3) + " after 200 epochs");
  return o;
}

// ---------------------------------------------------------------------------
// Evaluation oracles

double brute_spearman(const std::vector<double>& xs, const std::vector<double>& ys) {
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r;
    for (double a : v) {
      double less = 0, equal = 0;
      for (double b : v) {
        less += b < a;
        equal += b == a;
      }
      r.push_back(1 + less + (equal - 1) / 2);
    }
    return r;
  };
  const auto rx = ranks(xs), ry = ranks(ys);
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Null-resampling p-value: draw n-observation samples from a population where
// both correlations equal their pooled value and count how often the Fisher
// difference is at least the observed one.
double resampled_p(double r1, double r2, double r12, std::size_t n, int draws, Rng& rng) {
  const double rb = (r1 + r2) / 2;
  // Cholesky of [[1, rb, rb], [rb, 1, r12], [rb, r12, 1]].
  const double l21 = rb, l22 = std::sqrt(1 - rb * rb);
  const double l31 = rb, l32 = (r12 - rb * rb) / l22, l33 = std::sqrt(1 - l31 * l31 - l32 * l32);
  const double observed = std::abs(std::atanh(r1) - std::atanh(r2));
  std::vector<double> x(n), y1(n), y2(n);
  int extreme = 0;
  for (int d = 0; d < draws; ++d) {
    for (std::size_t i = 0; i < n; ++i) {
      const double z1 = rng.normal(), z2 = rng.normal(), z3 = rng.normal();
      x[i] = z1;
      y1[i] = l21 * z1 + l22 * z2;
      y2[i] = l31 * z1 + l32 * z2 + l33 * z3;
    }
    extreme += std::abs(std::atanh(pearson(x, y1)) - std::atanh(pearson(x, y2))) >= observed;
  }
  return static_cast<double>(extreme) / draws;
}

Outcome eval_oracles() {
  Outcome o;
  Rng rng(51);

  double worst = 0.0;
  int cases = 0;
  while (cases < 1000) {
    const std::size_t n = 2 + rng.below(30);
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = static_cast<double>(rng.below(5));
      ys[i] = rng.below(3) == 0 ? static_cast<double>(rng.below(4)) : rng.uniform();
    }
    if (std::set<double>(xs.begin(), xs.end()).size() < 2 || std::set<double>(ys.begin(), ys.end()).size() < 2) {
      continue;
    }
    worst = std::max(worst, std::abs(eval::spearman(xs, ys) - brute_spearman(xs, ys)));
    ++cases;
  }
  o.require(worst < 1e-12, "spearman differs from brute force by " + num(worst));
  o.note("spearman max diff " + num(worst, 2));

  // Planted parallelogram.
  Matrix pm(5, 3);
  const double a[] = {1, 0, 0}, b[] = {1, 1, 0}, c[] = {0, 0, 1}, e[] = {0.3, -1, 0.2};
  for (int i = 0; i < 3; ++i) {
    pm(0, i) = a[i];
    pm(1, i) = b[i];
    pm(2, i) = c[i];
    pm(3, i) = b[i] - a[i] + c[i];
    pm(4, i) = e[i];
  }
  const eval::EmbeddingTable par({"a", "b", "c", "d", "e"}, pm);
  const auto acc = eval::eval_analogy(par, {{"planted", {{"a", "b", "c", "d"}}}}).total.accuracy();
  o.require(acc == 1.0, "parallelogram accuracy " + num(acc));

  // Rotation invariance of analogy, rescaling invariance of similarity.
  const std::size_t V = 40, D = 6;
  Matrix m(V, D);
  for (auto& x : m.values()) x = rng.normal();
  std::vector<std::string> words;
  for (std::size_t i = 0; i < V; ++i) words.push_back("w" + std::to_string(i));
  Matrix q(D, D);
  for (auto& x : q.values()) x = rng.normal();
  for (std::size_t i = 0; i < D; ++i) {
    for (std::size_t j = 0; j < i; ++j) axpy(-dot(q.row(i), q.row(j)), q.row(j), q.row(i));
    const double nq = norm(q.row(i));
    for (auto& x : q.row(i)) x /= nq;
  }
  Matrix rotated(V, D), scaled = m;
  for (std::size_t r = 0; r < V; ++r) {
    for (std::size_t i = 0; i < D; ++i) rotated(r, i) = dot(q.row(i), m.row(r));
    const double s = rng.uniform(0.1, 10.0);
    for (auto& x : scaled.row(r)) x *= s;
  }
  eval::AnalogyDataset ads{{"random", {}}};
  eval::SimilarityDataset sds;
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (int k = 0; k < 200; ++k) {
    const auto w = [&] { return words[rng.below(V)]; };
    ads[0].problems.push_back({w(), w(), w(), w()});
    const auto i = rng.below(V), j = rng.below(V);
    if (i == j || seen.count({std::min(i, j), std::max(i, j)})) continue;
    seen.insert({std::min(i, j), std::max(i, j)});
    sds.push_back({words[i], words[j], rng.uniform(0.0, 10.0)});
  }
  const eval::EmbeddingTable base(words, m), rot(words, rotated), sc(words, scaled);
  o.require(eval::eval_analogy(base, ads).total.correct == eval::eval_analogy(rot, ads).total.correct,
            "analogy changed under rotation");
  const double rho = eval::eval_similarity(base, sds).rho;
  o.require(std::abs(rho - eval::eval_similarity(sc, sds).rho) < 1e-12, "similarity changed under rescaling");

  // Steiger's Z against resampling under the null.
  double worst_p = 0.0;
  int steiger_cases = 0;
  while (steiger_cases < 20) {
    const std::size_t n = 20 + rng.below(41);
    const double rb = rng.uniform(0.1, 0.6), delta = rng.uniform(0.02, 0.25), r12 = rng.uniform(0.2, 0.8);
    const double r1 = rb + delta, r2 = rb - delta;
    if (r1 >= 0.95 || r2 <= -0.95) continue;
    const double l32 = (r12 - rb * rb) / std::sqrt(1 - rb * rb);
    if (1 - rb * rb - l32 * l32 <= 0.01) continue;  // null matrix must be positive definite
    const double p = eval::dependent_correlation_test(r1, r2, r12, n).p;
    worst_p = std::max(worst_p, std::abs(p - resampled_p(r1, r2, r12, n, 100000, rng)));
    ++steiger_cases;
  }
  o.require(worst_p < 0.02, "Steiger p differs from resampling by " + num(worst_p));
  o.note("Steiger max |dp| " + num(worst_p, 3));
  return o;
}

// ---------------------------------------------------------------------------
// Determinism and round trips

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = testing::read_file(entry.path());
  }
  return files;
}

std::map<std::string, std::string> run_pipeline(const fs::path& dir) {
  fs::remove_all(dir / "out");
  PipelineConfig cfg;
  cfg.set("corpus", (dir / "corpus.txt").string());
  cfg.set("output_dir", (dir / "out").string());
  cfg.set("bitmaps", (dir / "out" / "bitmaps").string());
  cfg.set("convae", (dir / "out" / "convae.gwt").string());
  cfg.set("similarity", (dir / "sim.tsv").string());
  cfg.set("min_count", "0");
  cfg.set("subsample", "0");
  cfg.set("dims", "16");
  cfg.set("epochs", "2");
  cfg.set("glove_epochs", "3");
  cfg.set("convae_epochs", "1");
  cfg.set("rnn_dims", "4");
  cfg.set("rnn_hidden", "4");
  cfg.set("rnn_head_hidden", "4");
  cfg.set("seed", "61");
  std::ostringstream out, log;
  const CommandStreams io{out, log};
  cmd_render_glyphs(cfg, io);
  cmd_train_convae(cfg, io);
  cmd_extract_glyphs(cfg, io);
  std::vector<fs::path> vecs;
  for (const char* v : {"cbow", "cwe", "gwe-ctx", "gwe-tar", "sg-gwe-ctx", "glove", "rnn-sg", "rnn-glove"}) {
    cfg.set("variant", v);
    cmd_train(cfg, io);
    vecs.push_back(dir / "out" / (std::string(v) + ".vec"));
  }
  cmd_eval_sim(cfg, vecs, io);
  auto files = snapshot(dir / "out");
  files["<stdout>"] = out.str();
  return files;
}

Outcome determinism() {
  Outcome o;
  const auto dir = testing::temp_dir("acceptance-determinism");
  const auto c = testing::two_cluster_corpus(60, 5, 8, 62);
  std::string text;
  for (const auto& l : c.lines) text += l + "\n";
  testing::write_file(dir / "corpus.txt", text);
  const auto& w = c.clusters;
  testing::write_file(dir / "sim.tsv", w[0][0] + "\t" + w[0][1] + "\t9\n" + w[0][2] + "\t" + w[1][0] + "\t1\n" +
                                           w[1][1] + "\t" + w[1][2] + "\t8\n" + w[0][3] + "\t" + w[1][3] + "\t2\n");
  const auto first = run_pipeline(dir);
  const auto second = run_pipeline(dir);
  o.require(first.size() == second.size(), "different file sets");
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    if (it == second.end() || it->second != bytes) {
      o.require(false, name + " differs");
    }
  }
  o.note(std::to_string(first.size()) + " outputs compared");

  // Round trips.
  const auto out = dir / "out";
  const auto vec = eval::load_embeddings(out / "cwe.vec");
  eval::save_embeddings(dir / "again.vec", vec);
  o.require(testing::read_file(dir / "again.vec") == testing::read_file(out / "cwe.vec"), "embedding text round trip");
  o.require(eval::load_embeddings(dir / "again.vec") == vec, "embedding values round trip");

  const auto archive = load_archive(out / "bitmaps");
  save_archive(archive, dir / "archive2");
  o.require(load_archive(dir / "archive2") == archive, "bitmap archive round trip");

  const auto params = convae::load_params(out / "convae.gwt");
  convae::save_params(dir / "convae2.gwt", params);
  o.require(convae::load_params(dir / "convae2.gwt") == params, "convae checkpoint round trip");
  o.require(testing::read_file(dir / "convae2.gwt") == testing::read_file(out / "convae.gwt"), "convae bytes");

  for (const char* name : {"rnn-sg.gwt", "rnn-glove.gwt"}) {
    const auto f = load_tensor_file(out / name);
    save_tensor_file(dir / name, f);
    o.require(testing::read_file(dir / name) == testing::read_file(out / name), std::string(name) + " round trip");
  }
  const auto sg = seq::RnnSkipgramModel::from_tensor_file(load_tensor_file(out / "rnn-sg.gwt"));
  o.require(seq::RnnSkipgramModel::from_tensor_file(sg.to_tensor_file()) == sg, "rnn-sg model round trip");
  const auto gl = seq::RnnGloveModel::from_tensor_file(load_tensor_file(out / "rnn-glove.gwt"));
  o.require(seq::RnnGloveModel::from_tensor_file(gl.to_tensor_file()) == gl, "rnn-glove model round trip");

  const auto cooc = load_cooc(out / "cooc.bin");
  save_cooc(dir / "cooc2.bin", cooc);
  o.require(testing::read_file(dir / "cooc2.bin") == testing::read_file(out / "cooc.bin"), "cooc round trip");
  return o;
}

// ---------------------------------------------------------------------------

struct Criterion {
  const char* name;
  Outcome (*run)();
  double time_limit_s;  // 0: none
};

const Criterion kCriteria[] = {
    {"closed-form", closed_form, 0},
    {"gradients", gradients, 120},
    {"convae-learning", convae_learning, 300},
    {"glyph-clustering", glyph_clustering, 0},
    {"embedding-sanity", embedding_sanity, 60},
    {"cwe-mechanism", cwe_mechanism, 0},
    {"frozen-glyphs", frozen_glyphs, 0},
    {"glove-recovery", glove_recovery, 0},
    {"eval-oracles", eval_oracles, 0},
    {"determinism", determinism, 0},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--list") {
      for (const auto& c : kCriteria) std::printf("%s\n", c.name);
      return 0;
    }
    if (arg == "--only" && i + 1 < argc) {
      only.insert(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: %s [--only <criterion>]... [--list]\n", argv[0]);
      return 2;
    }
  }
  for (const auto& name : only) {
    bool known = false;
    for (const auto& c : kCriteria) known = known || name == c.name;
    if (!known) {
      std::fprintf(stderr, "unknown criterion '%s'\n", name.c_str());
      return 2;
    }
  }

  int failed = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit_s > 0) o.require(secs < c.time_limit_s, "took " + num(secs, 3) + "s, limit " + num(c.time_limit_s) + "s");
    std::printf("%s %s (%.1fs): %s\n", o.pass ? "PASS" : "FAIL", c.name, secs, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
