#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gwe/matrix.hpp"

namespace gwe::eval {

/// Word -> vector lookup, in file order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// Throws on a duplicate word or a row-count mismatch.
  EmbeddingTable(std::vector<std::string> words, Matrix vectors);

  std::size_t size() const noexcept { return words_.size(); }
  std::size_t dims() const noexcept { return vectors_.cols(); }
  const std::vector<std::string>& words() const noexcept { return words_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::optional<std::size_t> find(std::string_view word) const;
  std::span<const double> vector(std::size_t index) const { return vectors_.row(index); }

  bool operator==(const EmbeddingTable& other) const {
    return words_ == other.words_ && vectors_ == other.vectors_;
  }

 private:
  std::vector<std::string> words_;
  Matrix vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// word2vec text format: "V D" then "word v1 ... vD", six decimals.
void write_embeddings(std::ostream& out, const EmbeddingTable& table);
EmbeddingTable read_embeddings(std::istream& in, const std::string& source = "<stream>");
void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table);
EmbeddingTable load_embeddings(const std::filesystem::path& path);

/// Throws on a zero vector or a length mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

/// 1-based ranks; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);

/// Pearson correlation of average ranks. Throws "undefined correlation" when
/// either input is constant.
double spearman(std::span<const double> xs, std::span<const double> ys);

struct SimilarityRecord {
  std::string a;
  std::string b;
  double score = 0.0;
};
using SimilarityDataset = std::vector<SimilarityRecord>;

struct AnalogyProblem {
  std::string a, b, c, d;
};
struct AnalogyCategory {
  std::string name;
  std::vector<AnalogyProblem> problems;
};
using AnalogyDataset = std::vector<AnalogyCategory>;

struct JobPlaces {
  std::string job;
  std::vector<std::string> places;
};
using JobPlaceDataset = std::vector<JobPlaces>;

/// `a<TAB>b<TAB>score`, `#` comments. Rejects duplicate unordered pairs.
SimilarityDataset read_similarity(std::istream& in, const std::string& source = "<stream>");
SimilarityDataset load_similarity(const std::filesystem::path& path);

/// Four space-separated words per line under `: category` headers.
AnalogyDataset read_analogy(std::istream& in, const std::string& source = "<stream>");
AnalogyDataset load_analogy(const std::filesystem::path& path);

/// `job<TAB>place1,place2,...`.
JobPlaceDataset read_job_place(std::istream& in, const std::string& source = "<stream>");
JobPlaceDataset load_job_place(const std::filesystem::path& path);

struct SimilarityResult {
  double rho = 0.0;
  std::size_t pairs_used = 0;
  std::size_t pairs_dropped = 0;
  std::vector<double> human;  // scores of the pairs used
  std::vector<double> model;  // cosines of the pairs used
};

/// Spearman between human scores and cosines over the pairs without OOV words.
/// Throws "no pairs" when every pair is dropped.
SimilarityResult eval_similarity(const EmbeddingTable& table, const SimilarityDataset& dataset);

struct CategoryAccuracy {
  std::string name;
  std::size_t correct = 0;
  std::size_t evaluated = 0;
  std::size_t dropped = 0;
  double accuracy() const { return evaluated ? static_cast<double>(correct) / static_cast<double>(evaluated) : 0.0; }
};

struct AnalogyResult {
  std::vector<CategoryAccuracy> categories;
  CategoryAccuracy total;
};

struct AnalogyOptions {
  bool exclude_question_words = true;
};

/// argmax over the vocabulary of cos(w, b - a + c).
AnalogyResult eval_analogy(const EmbeddingTable& table, const AnalogyDataset& dataset,
                           const AnalogyOptions& options = {});

struct JobPlaceResult {
  std::size_t correct = 0;
  std::size_t pairs = 0;         // ordered job pairs evaluated
  std::size_t jobs_dropped = 0;  // job OOV or no place in vocabulary
  double accuracy() const { return pairs ? static_cast<double>(correct) / static_cast<double>(pairs) : 0.0; }
};

/// For every ordered pair (job1, job2): query = mean(places of job1) - job1 +
/// job2; candidates exclude job1, job2 and those places of job1 that are not
/// places of job2; correct when the best candidate is a place of job2.
JobPlaceResult eval_job_place(const EmbeddingTable& table, const JobPlaceDataset& dataset);

/// Words nearest to `query` by cosine, excluding `exclude`.
std::vector<std::pair<std::string, double>> nearest(const EmbeddingTable& table, std::span<const double> query,
                                                    std::size_t k, std::span<const std::size_t> exclude = {});

struct SteigerResult {
  double z = 0.0;
  double p = 1.0;
};

/// Steiger's Z for r(x, y1) = r1 vs r(x, y2) = r2, with r(y1, y2) = r12 and n
/// observations; two-sided normal p-value.
SteigerResult dependent_correlation_test(double r1, double r2, double r12, std::size_t n);

}  // namespace gwe::eval
