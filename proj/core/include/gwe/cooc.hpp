#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "gwe/corpus.hpp"
#include "gwe/matrix.hpp"

namespace gwe {

struct CoocEntry {
  std::uint32_t i = 0;  // center word
  std::uint32_t j = 0;  // context word
  double value = 0.0;

  bool operator==(const CoocEntry&) const = default;
};

/// Sparse V×V co-occurrence counts, sorted by (i, j), one entry per pair,
/// every value positive.
struct SparseCooc {
  std::size_t vocab_size = 0;
  int window = 5;
  bool harmonic = true;
  std::vector<CoocEntry> entries;

  /// X_ij, or 0 when absent.
  double value(std::uint32_t i, std::uint32_t j) const;
  /// Copy keeping entries with value >= min_value.
  SparseCooc filter_min(double min_value) const;

  bool operator==(const SparseCooc&) const = default;
};

/// Symmetric window around each center, bounded by the line. A context at
/// distance d adds 1/d when `harmonic`, else 1.
SparseCooc build_cooc(const EncodedCorpus& corpus, std::size_t vocab_size, int window = 5, bool harmonic = true);

/// Binary file: magic "GWECOOC1", u32 version, u64 V, u32 window,
/// u8 harmonic, u64 n, then n × (u32 i, u32 j, f64 value), little-endian.
void write_cooc(std::ostream& out, const SparseCooc& cooc);
SparseCooc read_cooc(std::istream& in);
void save_cooc(const std::filesystem::path& path, const SparseCooc& cooc);
SparseCooc load_cooc(const std::filesystem::path& path);

/// (x/x_max)^alpha below x_max, 1 above.
double glove_weight(double x, double x_max = 100.0, double alpha = 0.75);

struct GloveParams {
  Matrix w;        // V×D
  Matrix w_tilde;  // V×D
  std::vector<double> b;
  std::vector<double> b_tilde;
  // Adagrad accumulators, same shapes.
  Matrix w_accum;
  Matrix w_tilde_accum;
  std::vector<double> b_accum;
  std::vector<double> b_tilde_accum;

  /// Vectors and biases uniform in [-0.5/D, 0.5/D]; accumulators zero.
  static GloveParams init(std::size_t vocab_size, std::size_t dims, std::uint64_t seed);
  std::size_t dims() const noexcept { return w.cols(); }
  std::size_t vocab_size() const noexcept { return w.rows(); }

  bool operator==(const GloveParams&) const = default;
};

struct GloveLossTerms {
  double x_max = 100.0;
  double alpha = 0.75;
};

struct GloveGradient {
  double loss = 0.0;
  std::vector<double> w_i;
  std::vector<double> w_tilde_j;
  double b_i = 0.0;
  double b_tilde_j = 0.0;
};

/// f(X)·r² with r = w_i·w̃_j + b_i + b̃_j - ln X.
double glove_loss(const CoocEntry& entry, const GloveParams& params, const GloveLossTerms& terms = {});
GloveGradient glove_gradient(const CoocEntry& entry, const GloveParams& params, const GloveLossTerms& terms = {});

/// One Adagrad update on the four parameters of `entry`; returns the loss
/// before the update.
double glove_step(const CoocEntry& entry, GloveParams& params, double lr, const GloveLossTerms& terms = {});

struct GloveConfig {
  std::size_t dims = 100;
  int epochs = 25;
  double lr = 0.05;
  GloveLossTerms terms;
  std::uint64_t seed = 1;
  int threads = 1;  // >1: lock-free shared updates, not reproducible
};

/// Entries visited in a fresh shuffled order every epoch. `epoch_loss`
/// receives the mean per-entry loss of each epoch.
GloveParams glove_train(const SparseCooc& cooc, const GloveConfig& config,
                        std::vector<double>* epoch_loss = nullptr);

/// w + w̃.
Matrix glove_output(const GloveParams& params);

}  // namespace gwe
