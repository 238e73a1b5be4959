#include "gwe/cooc.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "gwe/adagrad.hpp"
#include "gwe/error.hpp"
#include "gwe/rng.hpp"
#include "le_io.hpp"

namespace gwe {

double SparseCooc::value(std::uint32_t i, std::uint32_t j) const {
  const auto it = std::lower_bound(entries.begin(), entries.end(), CoocEntry{i, j, 0.0},
                                   [](const CoocEntry& a, const CoocEntry& b) {
                                     return a.i != b.i ? a.i < b.i : a.j < b.j;
                                   });
  return it != entries.end() && it->i == i && it->j == j ? it->value : 0.0;
}

SparseCooc SparseCooc::filter_min(double min_value) const {
  SparseCooc out{vocab_size, window, harmonic, {}};
  for (const auto& e : entries) {
    if (e.value >= min_value) out.entries.push_back(e);
  }
  return out;
}

SparseCooc build_cooc(const EncodedCorpus& corpus, std::size_t vocab_size, int window, bool harmonic) {
  if (window < 1) throw usage_error("window must be >= 1");
  std::unordered_map<std::uint64_t, double> acc;
  auto bump = [&](WordId a, WordId b, double inc) {
    acc[(static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b)] += inc;
  };
  for (const auto& line : corpus) {
    for (std::size_t p = 0; p < line.size(); ++p) {
      if (line[p] < 0 || static_cast<std::size_t>(line[p]) >= vocab_size) {
        throw usage_error("word id " + std::to_string(line[p]) + " outside vocabulary");
      }
      for (std::size_t d = 1; d <= static_cast<std::size_t>(window) && p + d < line.size(); ++d) {
        const double inc = harmonic ? 1.0 / static_cast<double>(d) : 1.0;
        bump(line[p], line[p + d], inc);
        bump(line[p + d], line[p], inc);
      }
    }
  }
  SparseCooc out{vocab_size, window, harmonic, {}};
  out.entries.reserve(acc.size());
  for (const auto& [key, v] : acc) {
    out.entries.push_back({static_cast<std::uint32_t>(key >> 32), static_cast<std::uint32_t>(key & 0xffffffffU), v});
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const CoocEntry& a, const CoocEntry& b) { return a.i != b.i ? a.i < b.i : a.j < b.j; });
  return out;
}

namespace {

constexpr char kCoocMagic[8] = {'G', 'W', 'E', 'C', 'O', 'O', 'C', '1'};
constexpr std::uint32_t kCoocVersion = 1;
constexpr const char* kWhat = "co-occurrence file";

}  // namespace

void write_cooc(std::ostream& out, const SparseCooc& cooc) {
  using detail::put_le;
  out.write(kCoocMagic, sizeof kCoocMagic);
  put_le<std::uint32_t>(out, kCoocVersion);
  put_le<std::uint64_t>(out, cooc.vocab_size);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(cooc.window));
  put_le<std::uint8_t>(out, cooc.harmonic ? 1 : 0);
  put_le<std::uint64_t>(out, cooc.entries.size());
  for (const auto& e : cooc.entries) {
    put_le<std::uint32_t>(out, e.i);
    put_le<std::uint32_t>(out, e.j);
    put_le<double>(out, e.value);
  }
  if (!out) throw data_error("failed writing co-occurrence file");
}

SparseCooc read_cooc(std::istream& in) {
  using detail::get_le;
  char magic[8];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kCoocMagic, sizeof magic) != 0) {
    throw data_error("not a co-occurrence file (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(in, kWhat);
  if (version != kCoocVersion) throw data_error("unsupported co-occurrence file version " + std::to_string(version));
  SparseCooc cooc;
  cooc.vocab_size = get_le<std::uint64_t>(in, kWhat);
  cooc.window = static_cast<int>(get_le<std::uint32_t>(in, kWhat));
  cooc.harmonic = get_le<std::uint8_t>(in, kWhat) != 0;
  const auto n = get_le<std::uint64_t>(in, kWhat);
  cooc.entries.reserve(std::min<std::uint64_t>(n, 1u << 24));
  for (std::uint64_t k = 0; k < n; ++k) {
    CoocEntry e;
    e.i = get_le<std::uint32_t>(in, kWhat);
    e.j = get_le<std::uint32_t>(in, kWhat);
    e.value = get_le<double>(in, kWhat);
    if (e.i >= cooc.vocab_size || e.j >= cooc.vocab_size || !(e.value > 0.0) || !std::isfinite(e.value)) {
      throw data_error("co-occurrence entry " + std::to_string(k) + " is invalid");
    }
    cooc.entries.push_back(e);
  }
  return cooc;
}

void save_cooc(const std::filesystem::path& path, const SparseCooc& cooc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path.string() + "'");
  write_cooc(out, cooc);
}

SparseCooc load_cooc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  return read_cooc(in);
}

double glove_weight(double x, double x_max, double alpha) {
  return x < x_max ? std::pow(x / x_max, alpha) : 1.0;
}

GloveParams GloveParams::init(std::size_t vocab_size, std::size_t dims, std::uint64_t seed) {
  if (dims == 0) throw usage_error("GloVe dims must be positive");
  GloveParams p;
  p.w = Matrix(vocab_size, dims);
  p.w_tilde = Matrix(vocab_size, dims);
  p.b.assign(vocab_size, 0.0);
  p.b_tilde.assign(vocab_size, 0.0);
  p.w_accum = Matrix(vocab_size, dims);
  p.w_tilde_accum = Matrix(vocab_size, dims);
  p.b_accum.assign(vocab_size, 0.0);
  p.b_tilde_accum.assign(vocab_size, 0.0);
  Rng rng(derive_seed(seed, "glove-init"));
  const double half = 0.5 / static_cast<double>(dims);
  for (auto& v : p.w.values()) v = rng.uniform(-half, half);
  for (auto& v : p.w_tilde.values()) v = rng.uniform(-half, half);
  for (auto& v : p.b) v = rng.uniform(-half, half);
  for (auto& v : p.b_tilde) v = rng.uniform(-half, half);
  return p;
}

namespace {

double residual(const CoocEntry& e, const GloveParams& p) {
  return dot(p.w.row(e.i), p.w_tilde.row(e.j)) + p.b[e.i] + p.b_tilde[e.j] - std::log(e.value);
}

}  // namespace

double glove_loss(const CoocEntry& entry, const GloveParams& params, const GloveLossTerms& terms) {
  const double r = residual(entry, params);
  return glove_weight(entry.value, terms.x_max, terms.alpha) * r * r;
}

GloveGradient glove_gradient(const CoocEntry& entry, const GloveParams& params, const GloveLossTerms& terms) {
  const double r = residual(entry, params);
  const double f = glove_weight(entry.value, terms.x_max, terms.alpha);
  const double g = 2.0 * f * r;
  GloveGradient out;
  out.loss = f * r * r;
  const auto wi = params.w.row(entry.i);
  const auto wj = params.w_tilde.row(entry.j);
  out.w_i.resize(wi.size());
  out.w_tilde_j.resize(wj.size());
  for (std::size_t d = 0; d < wi.size(); ++d) {
    out.w_i[d] = g * wj[d];
    out.w_tilde_j[d] = g * wi[d];
  }
  out.b_i = g;
  out.b_tilde_j = g;
  return out;
}

double glove_step(const CoocEntry& entry, GloveParams& params, double lr, const GloveLossTerms& terms) {
  const auto grad = glove_gradient(entry, params, terms);
  adagrad_update(params.w.row(entry.i), grad.w_i, params.w_accum.row(entry.i), lr);
  adagrad_update(params.w_tilde.row(entry.j), grad.w_tilde_j, params.w_tilde_accum.row(entry.j), lr);
  adagrad_update(std::span<double>(&params.b[entry.i], 1), std::span<const double>(&grad.b_i, 1),
                 std::span<double>(&params.b_accum[entry.i], 1), lr);
  adagrad_update(std::span<double>(&params.b_tilde[entry.j], 1), std::span<const double>(&grad.b_tilde_j, 1),
                 std::span<double>(&params.b_tilde_accum[entry.j], 1), lr);
  return grad.loss;
}

GloveParams glove_train(const SparseCooc& cooc, const GloveConfig& config, std::vector<double>* epoch_loss) {
  if (config.epochs < 0) throw usage_error("epochs must be >= 0");
  if (config.threads < 1) throw usage_error("threads must be >= 1");
  if (!(config.lr > 0.0)) throw usage_error("lr must be positive");
  GloveParams params = GloveParams::init(cooc.vocab_size, config.dims, config.seed);
  std::vector<std::size_t> order(cooc.entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(config.seed, "glove-shuffle"));
  const auto shards = static_cast<std::size_t>(config.threads);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    std::vector<double> loss(shards, 0.0);
    auto worker = [&](std::size_t shard) {
      for (std::size_t k = shard; k < order.size(); k += shards) {
        loss[shard] += glove_step(cooc.entries[order[k]], params, config.lr, config.terms);
      }
    };
    if (shards == 1) {
      worker(0);
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t s = 0; s < shards; ++s) pool.emplace_back(worker, s);
    }
    double total = 0.0;
    for (double l : loss) total += l;
    if (!std::isfinite(total)) throw numeric_error("GloVe diverged in epoch " + std::to_string(epoch));
    if (epoch_loss) epoch_loss->push_back(order.empty() ? 0.0 : total / static_cast<double>(order.size()));
  }
  return params;
}

Matrix glove_output(const GloveParams& params) {
  Matrix out = params.w;
  for (std::size_t k = 0; k < out.values().size(); ++k) out.values()[k] += params.w_tilde.values()[k];
  return out;
}

}  // namespace gwe
