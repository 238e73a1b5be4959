#include "gwe/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "gwe/error.hpp"
#include "gwe/utf8.hpp"

namespace gwe {

WordId Vocabulary::find(std::string_view word) const {
  const auto it = word_id_.find(std::string(word));
  return it == word_id_.end() ? kNotFound : it->second;
}

CharId Vocabulary::find_char(char32_t cp) const {
  const auto it = char_id_.find(cp);
  return it == char_id_.end() ? kNotFound : it->second;
}

Vocabulary Vocabulary::from_counts(std::vector<std::pair<std::string, std::int64_t>> counts,
                                   std::int64_t total_tokens) {
  std::sort(counts.begin(), counts.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  v.total_tokens_ = total_tokens;
  v.words_.reserve(counts.size());
  for (auto& [word, count] : counts) {
    if (word.empty()) throw data_error("vocabulary: empty word");
    const auto id = static_cast<WordId>(v.words_.size());
    if (!v.word_id_.emplace(word, id).second) throw data_error("vocabulary: duplicate word '" + word + "'");
    std::vector<CharId> decomposition;
    for (char32_t cp : utf8::decode(word)) {
      auto [it, inserted] = v.char_id_.emplace(cp, static_cast<CharId>(v.chars_.size()));
      if (inserted) v.chars_.push_back(cp);
      decomposition.push_back(it->second);
    }
    v.decomposition_.push_back(std::move(decomposition));
    v.words_.push_back(std::move(word));
    v.freq_.push_back(count);
  }
  return v;
}

void VocabCounter::add(std::string_view token, std::size_t offset) {
  if (token.empty()) return;
  utf8::decode(token, offset);  // validation only
  ++counts_[std::string(token)];
  ++total_;
}

Vocabulary VocabCounter::finish(std::int64_t min_count) const {
  if (min_count < 0) throw usage_error("min_count must be >= 0");
  if (total_ == 0) throw data_error("empty corpus");
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [word, count] : counts_) {
    if (count > min_count) kept.emplace_back(word, count);
  }
  return Vocabulary::from_counts(std::move(kept), total_);
}

Vocabulary build_vocab(std::span<const std::string> tokens, std::int64_t min_count) {
  VocabCounter counter;
  std::size_t offset = 0;
  for (const auto& t : tokens) {
    counter.add(t, offset);
    offset += t.size() + 1;
  }
  return counter.finish(min_count);
}

namespace {

bool is_separator(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

}  // namespace

Vocabulary build_vocab(std::istream& corpus, std::int64_t min_count, std::size_t buffer_size) {
  if (buffer_size == 0) throw usage_error("buffer_size must be positive");
  VocabCounter counter;
  std::vector<char> buffer(buffer_size);
  std::string pending;
  std::size_t pending_offset = 0;
  std::size_t consumed = 0;
  while (corpus) {
    corpus.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const auto got = static_cast<std::size_t>(corpus.gcount());
    if (got == 0) break;
    for (std::size_t i = 0; i < got; ++i) {
      const char c = buffer[i];
      if (is_separator(c)) {
        if (!pending.empty()) {
          counter.add(pending, pending_offset);
          pending.clear();
        }
      } else {
        if (pending.empty()) pending_offset = consumed + i;
        pending.push_back(c);
      }
    }
    consumed += got;
  }
  if (!pending.empty()) counter.add(pending, pending_offset);
  return counter.finish(min_count);
}

void save_vocab(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open '" + path.string() + "' for writing");
  out << "#tokens=" << vocab.total_tokens() << '\n';
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    out << vocab.words()[i] << '\t' << vocab.freqs()[i] << '\n';
  }
  if (!out) throw data_error("write failed for '" + path.string() + "'");
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("#tokens=", 0) != 0) {
    throw data_error(path.string() + ":1: expected '#tokens=<N>' header");
  }
  std::int64_t total = 0;
  try {
    total = std::stoll(line.substr(8));
  } catch (const std::exception&) {
    throw data_error(path.string() + ":1: bad token count");
  }
  std::vector<std::pair<std::string, std::int64_t>> counts;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw data_error(path.string() + ":" + std::to_string(lineno) + ": expected word<TAB>count");
    }
    try {
      counts.emplace_back(line.substr(0, tab), std::stoll(line.substr(tab + 1)));
    } catch (const std::exception&) {
      throw data_error(path.string() + ":" + std::to_string(lineno) + ": bad count");
    }
  }
  return Vocabulary::from_counts(std::move(counts), total);
}

std::vector<std::string_view> split_words(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_separator(line[i])) ++i;
    std::size_t j = i;
    while (j < line.size() && !is_separator(line[j])) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

namespace {

void encode_line(std::string_view line, const Vocabulary& vocab, EncodedCorpus& out) {
  std::vector<WordId> ids;
  for (auto w : split_words(line)) {
    const auto id = vocab.find(w);
    if (id != Vocabulary::kNotFound) ids.push_back(id);
  }
  if (!ids.empty()) out.push_back(std::move(ids));
}

}  // namespace

EncodedCorpus encode_corpus(std::istream& corpus, const Vocabulary& vocab) {
  EncodedCorpus out;
  std::string line;
  while (std::getline(corpus, line)) encode_line(line, vocab, out);
  return out;
}

EncodedCorpus encode_corpus(std::span<const std::string> lines, const Vocabulary& vocab) {
  EncodedCorpus out;
  for (const auto& line : lines) encode_line(line, vocab, out);
  return out;
}

double subsample_keep_prob(double word_freq_ratio, double t) {
  if (!(t > 0.0)) throw usage_error("subsampling threshold must be positive");
  if (!(word_freq_ratio > 0.0)) throw usage_error("word frequency ratio must be positive");
  return std::min(1.0, std::sqrt(t / word_freq_ratio));
}

PairStream::PairStream(const EncodedCorpus& corpus, const Vocabulary& vocab, int window, double t,
                       std::uint64_t seed, std::size_t shard, std::size_t num_shards)
    : corpus_(corpus), window_(window), rng_(seed), num_shards_(num_shards), line_(shard) {
  if (window < 1) throw usage_error("window must be >= 1");
  if (num_shards == 0 || shard >= num_shards) throw usage_error("bad shard index");
  const double total = static_cast<double>(std::max<std::int64_t>(vocab.total_tokens(), 1));
  keep_prob_.reserve(vocab.size());
  for (auto f : vocab.freqs()) keep_prob_.push_back(subsample_keep_prob(static_cast<double>(f) / total, t));
  load_next_line();
}

bool PairStream::load_next_line() {
  kept_.clear();
  pos_ = 0;
  while (line_ < corpus_.size()) {
    const auto& line = corpus_[line_];
    line_ += num_shards_;
    tokens_seen_ += static_cast<std::int64_t>(line.size());
    for (WordId id : line) {
      const double p = keep_prob_[static_cast<std::size_t>(id)];
      if (p >= 1.0 || rng_.uniform() < p) kept_.push_back(id);
    }
    if (!kept_.empty()) return true;
  }
  return false;
}

bool PairStream::next(TrainingPair& out) {
  if (pos_ >= kept_.size() && !load_next_line()) return false;
  const auto n = static_cast<std::ptrdiff_t>(kept_.size());
  const auto i = static_cast<std::ptrdiff_t>(pos_);
  const auto lo = std::max<std::ptrdiff_t>(0, i - window_);
  const auto hi = std::min<std::ptrdiff_t>(n - 1, i + window_);
  out.target = kept_[pos_];
  out.context.clear();
  for (auto j = lo; j <= hi; ++j) {
    if (j != i) out.context.push_back(kept_[static_cast<std::size_t>(j)]);
  }
  ++pos_;
  return true;
}

std::vector<TrainingPair> collect_pairs(const EncodedCorpus& corpus, const Vocabulary& vocab,
                                        int window, double t, std::uint64_t seed) {
  PairStream stream(corpus, vocab, window, t, seed);
  std::vector<TrainingPair> out;
  TrainingPair p;
  while (stream.next(p)) out.push_back(p);
  return out;
}

}  // namespace gwe
