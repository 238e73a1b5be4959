#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gwe/corpus.hpp"
#include "gwe/matrix.hpp"
#include "gwe/rng.hpp"
#include "gwe/utf8.hpp"

namespace gwe::testing {

/// |a - b| relative to the larger magnitude, with a floor for near-zero pairs.
inline double rel_err(double a, double b, double floor = 1e-7) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Central difference of f with respect to *x.
inline double central_difference(const std::function<double()>& f, double* x, double h = 1e-6) {
  const double saved = *x;
  *x = saved + h;
  const double up = f();
  *x = saved - h;
  const double down = f();
  *x = saved;
  return (up - down) / (2.0 * h);
}

/// Worst relative error of `analytic` against central differences over every
/// entry of `params`. Entries whose both values are below `floor` are skipped.
inline double max_fd_error(const std::function<double()>& f, std::span<double> params,
                           std::span<const double> analytic, double h = 1e-6, double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double numeric = central_difference(f, &params[k], h);
    if (std::abs(numeric) < floor && std::abs(analytic[k]) < floor) continue;
    worst = std::max(worst, rel_err(analytic[k], numeric, 1e-6));
  }
  return worst;
}

inline void fill_random(std::span<double> values, Rng& rng, double scale = 1.0) {
  for (auto& v : values) v = rng.uniform(-scale, scale);
}

inline double mean_cosine(const Matrix& m, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  double total = 0.0;
  for (const auto& [a, b] : pairs) total += dot(m.row(a), m.row(b)) / (norm(m.row(a)) * norm(m.row(b)));
  return pairs.empty() ? 0.0 : total / static_cast<double>(pairs.size());
}

/// Distinct two-character CJK words built from a private codepoint block.
inline std::vector<std::string> synthetic_words(std::size_t count, char32_t base = 0x4E00) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < count; ++i) {
    words.push_back(utf8::encode(base + static_cast<char32_t>(2 * i)) +
                    utf8::encode(base + static_cast<char32_t>(2 * i + 1)));
  }
  return words;
}

/// Sentences drawing every word from one of two disjoint clusters.
struct ClusterCorpus {
  std::vector<std::string> lines;
  std::vector<std::vector<std::string>> clusters;
};

inline ClusterCorpus two_cluster_corpus(std::size_t sentences, std::size_t words_per_cluster,
                                        std::size_t sentence_length, std::uint64_t seed) {
  ClusterCorpus c;
  const auto words = synthetic_words(2 * words_per_cluster);
  c.clusters.emplace_back(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(words_per_cluster));
  c.clusters.emplace_back(words.begin() + static_cast<std::ptrdiff_t>(words_per_cluster), words.end());
  Rng rng(seed);
  for (std::size_t s = 0; s < sentences; ++s) {
    const auto& cluster = c.clusters[s % 2];
    std::string line;
    for (std::size_t w = 0; w < sentence_length; ++w) {
      if (w) line += ' ';
      line += cluster[rng.below(cluster.size())];
    }
    c.lines.push_back(line);
  }
  return c;
}

/// Vocabulary over all tokens of `lines`, every word kept.
inline Vocabulary vocab_of(const std::vector<std::string>& lines) {
  std::vector<std::string> tokens;
  for (const auto& l : lines) {
    for (auto t : split_words(l)) tokens.emplace_back(t);
  }
  return build_vocab(tokens, 0);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gwe-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace gwe::testing
