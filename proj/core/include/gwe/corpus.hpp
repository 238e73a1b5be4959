#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gwe/rng.hpp"

namespace gwe {

using WordId = std::int32_t;
using CharId = std::int32_t;

/// Word inventory built from a segmented corpus. Immutable once built.
///
/// Words are ordered by descending frequency (ties by byte order), so ids are
/// dense 0..V-1. Every character of a retained word gets a dense char id in
/// order of first appearance over that ordering.
class Vocabulary {
 public:
  static constexpr WordId kNotFound = -1;

  std::size_t size() const noexcept { return words_.size(); }
  std::size_t char_count() const noexcept { return chars_.size(); }

  const std::string& word(WordId id) const { return words_.at(static_cast<std::size_t>(id)); }
  std::int64_t freq(WordId id) const { return freq_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const std::vector<std::int64_t>& freqs() const noexcept { return freq_; }

  /// Tokens in the full stream, counted before min_count filtering.
  std::int64_t total_tokens() const noexcept { return total_tokens_; }

  WordId find(std::string_view word) const;

  char32_t character(CharId id) const { return chars_.at(static_cast<std::size_t>(id)); }
  const std::vector<char32_t>& characters() const noexcept { return chars_; }
  CharId find_char(char32_t cp) const;

  /// Ordered char ids of a word; concatenating them reproduces the word.
  std::span<const CharId> decomposition(WordId id) const {
    return decomposition_.at(static_cast<std::size_t>(id));
  }

  /// Builds from explicit (word, count) entries; order is normalized.
  static Vocabulary from_counts(std::vector<std::pair<std::string, std::int64_t>> counts,
                                std::int64_t total_tokens);

 private:
  std::vector<std::string> words_;
  std::vector<std::int64_t> freq_;
  std::unordered_map<std::string, WordId> word_id_;
  std::int64_t total_tokens_ = 0;
  std::vector<char32_t> chars_;
  std::unordered_map<char32_t, CharId> char_id_;
  std::vector<std::vector<CharId>> decomposition_;
};

/// Incremental counter behind build_vocab. Tokens are validated as UTF-8 on
/// entry; `offset` is the token's byte offset in the source for error reports.
class VocabCounter {
 public:
  void add(std::string_view token, std::size_t offset = 0);
  std::int64_t total() const noexcept { return total_; }

  /// Keeps words with count strictly greater than min_count.
  Vocabulary finish(std::int64_t min_count) const;

 private:
  std::unordered_map<std::string, std::int64_t> counts_;
  std::int64_t total_ = 0;
};

Vocabulary build_vocab(std::span<const std::string> tokens, std::int64_t min_count);

/// Reads whitespace-separated tokens in chunks of `buffer_size` bytes.
Vocabulary build_vocab(std::istream& corpus, std::int64_t min_count,
                       std::size_t buffer_size = std::size_t{1} << 16);

/// TSV: header `#tokens=<N>`, then `word<TAB>count` in descending count.
void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab);
Vocabulary load_vocab(const std::filesystem::path& path);

/// Splits a corpus line on spaces/tabs, dropping empty fields.
std::vector<std::string_view> split_words(std::string_view line);

/// One vector of in-vocabulary word ids per non-empty input line.
using EncodedCorpus = std::vector<std::vector<WordId>>;

EncodedCorpus encode_corpus(std::istream& corpus, const Vocabulary& vocab);
EncodedCorpus encode_corpus(std::span<const std::string> lines, const Vocabulary& vocab);

/// Threshold value that disables subsampling.
inline constexpr double kNoSubsampling = std::numeric_limits<double>::infinity();

/// min(1, sqrt(t / f)) for corpus frequency ratio f.
double subsample_keep_prob(double word_freq_ratio, double t);

struct TrainingPair {
  WordId target = 0;
  /// Up to `window` surviving words on each side, same line, in order.
  std::vector<WordId> context;

  bool operator==(const TrainingPair&) const = default;
};

/// Streams (target, context) examples from an encoded corpus.
///
/// Each token is kept independently with probability subsample_keep_prob
/// before windowing; windows never cross lines. Sharding assigns line l to
/// shard l % num_shards.
class PairStream {
 public:
  PairStream(const EncodedCorpus& corpus, const Vocabulary& vocab, int window, double t,
             std::uint64_t seed, std::size_t shard = 0, std::size_t num_shards = 1);

  /// Fills `out` with the next example; false at end of stream.
  bool next(TrainingPair& out);

  /// Tokens consumed so far (before subsampling), for learning-rate schedules.
  std::int64_t tokens_seen() const noexcept { return tokens_seen_; }

 private:
  bool load_next_line();

  const EncodedCorpus& corpus_;
  int window_;
  std::vector<double> keep_prob_;
  Rng rng_;
  std::size_t num_shards_;
  std::size_t line_;
  std::vector<WordId> kept_;
  std::size_t pos_ = 0;
  std::int64_t tokens_seen_ = 0;
};

std::vector<TrainingPair> collect_pairs(const EncodedCorpus& corpus, const Vocabulary& vocab,
                                        int window, double t, std::uint64_t seed);

}  // namespace gwe
