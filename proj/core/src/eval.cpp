#include "gwe/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "gwe/error.hpp"

namespace gwe::eval {

namespace {

std::string at_line(const std::string& source, std::size_t line) { return source + ":" + std::to_string(line) + ": "; }

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    const auto start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  return in;
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::vector<std::string> words, Matrix vectors)
    : words_(std::move(words)), vectors_(std::move(vectors)) {
  if (words_.size() != vectors_.rows()) throw usage_error("embedding table: word count differs from row count");
  index_.reserve(words_.size());
  for (std::size_t i = 0; i < words_.size(); ++i) {
    if (!index_.emplace(words_[i], i).second) throw data_error("duplicate word '" + words_[i] + "'");
  }
}

std::optional<std::size_t> EmbeddingTable::find(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
  out << table.size() << ' ' << table.dims() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < table.size(); ++i) {
    out << table.words()[i];
    for (double v : table.vector(i)) {
      std::snprintf(buf, sizeof buf, " %.6f", v);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw data_error("failed writing embeddings");
}

EmbeddingTable read_embeddings(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw data_error(at_line(source, 1) + "missing 'V D' header");
  strip_cr(line);
  const auto header = split_ws(line);
  std::size_t V = 0, D = 0;
  if (header.size() != 2 || std::from_chars(header[0].data(), header[0].data() + header[0].size(), V).ec != std::errc() ||
      std::from_chars(header[1].data(), header[1].data() + header[1].size(), D).ec != std::errc() || D == 0) {
    throw data_error(at_line(source, 1) + "malformed 'V D' header");
  }
  std::vector<std::string> words;
  Matrix vectors(V, D);
  std::unordered_map<std::string, std::size_t> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_ws(line);
    if (words.size() == V) throw data_error(at_line(source, lineno) + "more rows than the header's " + std::to_string(V));
    if (fields.size() != D + 1) {
      throw data_error(at_line(source, lineno) + "expected " + std::to_string(D) + " values, found " +
                       std::to_string(fields.size() - 1));
    }
    std::string word(fields[0]);
    if (!seen.emplace(word, words.size()).second) {
      throw data_error(at_line(source, lineno) + "duplicate word '" + word + "'");
    }
    auto row = vectors.row(words.size());
    for (std::size_t d = 0; d < D; ++d) {
      const auto v = parse_double(fields[d + 1]);
      if (!v || !std::isfinite(*v)) throw data_error(at_line(source, lineno) + "bad value '" + std::string(fields[d + 1]) + "'");
      row[d] = *v;
    }
    words.push_back(std::move(word));
  }
  if (words.size() != V) {
    throw data_error(at_line(source, lineno) + "header promises " + std::to_string(V) + " rows, found " +
                     std::to_string(words.size()));
  }
  return EmbeddingTable(std::move(words), std::move(vectors));
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path.string() + "'");
  write_embeddings(out, table);
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  auto in = open(path);
  return read_embeddings(in, path.string());
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw usage_error("cosine: length mismatch");
  const double nu = norm(u), nv = norm(v);
  if (nu == 0.0 || nv == 0.0) throw numeric_error("cosine of a zero vector");
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw usage_error("spearman: length mismatch");
  if (xs.size() < 2) throw usage_error("spearman: need at least 2 observations");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) throw numeric_error("undefined correlation");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Datasets

SimilarityDataset read_similarity(std::istream& in, const std::string& source) {
  SimilarityDataset out;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, '\t');
    if (f.size() != 3) throw data_error(at_line(source, lineno) + "expected word_a<TAB>word_b<TAB>score");
    const auto score = parse_double(f[2]);
    if (!score || !std::isfinite(*score)) throw data_error(at_line(source, lineno) + "bad score '" + std::string(f[2]) + "'");
    SimilarityRecord r{std::string(f[0]), std::string(f[1]), *score};
    if (!seen.insert(std::minmax(r.a, r.b)).second) {
      throw data_error(at_line(source, lineno) + "duplicate pair '" + r.a + "' / '" + r.b + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

SimilarityDataset load_similarity(const std::filesystem::path& path) {
  auto in = open(path);
  return read_similarity(in, path.string());
}

AnalogyDataset read_analogy(std::istream& in, const std::string& source) {
  AnalogyDataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    if (line[0] == ':') {
      const auto name = split_ws(std::string_view(line).substr(1));
      if (name.size() != 1) throw data_error(at_line(source, lineno) + "malformed category header");
      out.push_back({std::string(name[0]), {}});
      continue;
    }
    const auto f = split_ws(line);
    if (f.size() != 4) throw data_error(at_line(source, lineno) + "expected 4 words");
    if (out.empty()) throw data_error(at_line(source, lineno) + "problem before any ': category' header");
    out.back().problems.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]), std::string(f[3])});
  }
  return out;
}

AnalogyDataset load_analogy(const std::filesystem::path& path) {
  auto in = open(path);
  return read_analogy(in, path.string());
}

JobPlaceDataset read_job_place(std::istream& in, const std::string& source) {
  JobPlaceDataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto f = split(line, '\t');
    if (f.size() != 2 || f[0].empty()) throw data_error(at_line(source, lineno) + "expected job<TAB>place1,place2,...");
    JobPlaces jp{std::string(f[0]), {}};
    for (auto p : split(f[1], ',')) {
      if (!p.empty()) jp.places.emplace_back(p);
    }
    if (jp.places.empty()) throw data_error(at_line(source, lineno) + "empty place set for '" + jp.job + "'");
    out.push_back(std::move(jp));
  }
  return out;
}

JobPlaceDataset load_job_place(const std::filesystem::path& path) {
  auto in = open(path);
  return read_job_place(in, path.string());
}

// ---------------------------------------------------------------------------
// Tasks

SimilarityResult eval_similarity(const EmbeddingTable& table, const SimilarityDataset& dataset) {
  SimilarityResult r;
  for (const auto& rec : dataset) {
    const auto a = table.find(rec.a);
    const auto b = table.find(rec.b);
    if (!a || !b) {
      ++r.pairs_dropped;
      continue;
    }
    r.human.push_back(rec.score);
    r.model.push_back(cosine(table.vector(*a), table.vector(*b)));
    ++r.pairs_used;
  }
  if (r.pairs_used == 0) throw data_error("no pairs left after dropping OOV words");
  r.rho = spearman(r.human, r.model);
  return r;
}

namespace {

// Unit-normalized rows; zero rows stay zero and are never returned.
struct SearchIndex {
  Matrix unit;
  std::vector<bool> usable;

  explicit SearchIndex(const EmbeddingTable& table) : unit(table.vectors()), usable(table.size(), false) {
    for (std::size_t i = 0; i < unit.rows(); ++i) {
      const double n = norm(unit.row(i));
      if (n == 0.0) continue;
      for (auto& v : unit.row(i)) v /= n;
      usable[i] = true;
    }
  }

  // Best index by cosine, ties to the lower index; nullopt if nothing qualifies.
  template <typename Excluded>
  std::optional<std::size_t> best(std::span<const double> query, Excluded&& excluded) const {
    std::optional<std::size_t> arg;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < unit.rows(); ++i) {
      if (!usable[i] || excluded(i)) continue;
      const double s = dot(unit.row(i), query);
      if (s > best_score) {
        best_score = s;
        arg = i;
      }
    }
    return arg;
  }
};

}  // namespace

AnalogyResult eval_analogy(const EmbeddingTable& table, const AnalogyDataset& dataset, const AnalogyOptions& options) {
  const SearchIndex index(table);
  AnalogyResult result;
  result.total.name = "total";
  std::vector<double> q(table.dims());
  for (const auto& cat : dataset) {
    CategoryAccuracy acc;
    acc.name = cat.name;
    for (const auto& p : cat.problems) {
      const auto a = table.find(p.a), b = table.find(p.b), c = table.find(p.c), d = table.find(p.d);
      if (!a || !b || !c || !d) {
        ++acc.dropped;
        continue;
      }
      // Unnormalized b - a + c; scaling the query does not change the argmax.
      for (std::size_t k = 0; k < q.size(); ++k) {
        q[k] = table.vector(*b)[k] - table.vector(*a)[k] + table.vector(*c)[k];
      }
      const auto best = index.best(q, [&](std::size_t i) {
        return options.exclude_question_words && (i == *a || i == *b || i == *c);
      });
      ++acc.evaluated;
      if (best && *best == *d) ++acc.correct;
    }
    result.total.correct += acc.correct;
    result.total.evaluated += acc.evaluated;
    result.total.dropped += acc.dropped;
    result.categories.push_back(std::move(acc));
  }
  return result;
}

JobPlaceResult eval_job_place(const EmbeddingTable& table, const JobPlaceDataset& dataset) {
  struct Job {
    std::size_t id;
    std::vector<std::size_t> places;
  };
  std::vector<Job> jobs;
  JobPlaceResult result;
  for (const auto& jp : dataset) {
    const auto id = table.find(jp.job);
    Job job{id.value_or(0), {}};
    for (const auto& p : jp.places) {
      if (const auto pid = table.find(p)) job.places.push_back(*pid);
    }
    std::sort(job.places.begin(), job.places.end());
    job.places.erase(std::unique(job.places.begin(), job.places.end()), job.places.end());
    if (!id || job.places.empty()) {
      ++result.jobs_dropped;
      continue;
    }
    jobs.push_back(std::move(job));
  }

  const SearchIndex index(table);
  std::vector<double> q(table.dims());
  for (const auto& j1 : jobs) {
    std::fill(q.begin(), q.end(), 0.0);
    for (auto p : j1.places) axpy(1.0 / static_cast<double>(j1.places.size()), table.vector(p), q);
    axpy(-1.0, table.vector(j1.id), q);
    for (const auto& j2 : jobs) {
      if (&j1 == &j2) continue;
      std::vector<double> query = q;
      axpy(1.0, table.vector(j2.id), query);
      auto in = [](const std::vector<std::size_t>& set, std::size_t i) {
        return std::binary_search(set.begin(), set.end(), i);
      };
      const auto best = index.best(query, [&](std::size_t i) {
        return i == j1.id || i == j2.id || (in(j1.places, i) && !in(j2.places, i));
      });
      ++result.pairs;
      if (best && in(j2.places, *best)) ++result.correct;
    }
  }
  return result;
}

std::vector<std::pair<std::string, double>> nearest(const EmbeddingTable& table, std::span<const double> query,
                                                    std::size_t k, std::span<const std::size_t> exclude) {
  const double qn = norm(query);
  if (qn == 0.0) throw numeric_error("nearest: zero query vector");
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (std::find(exclude.begin(), exclude.end(), i) != exclude.end()) continue;
    const double n = norm(table.vector(i));
    if (n == 0.0) continue;
    scored.emplace_back(dot(table.vector(i), query) / (n * qn), i);
  }
  const auto top = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top), scored.end(),
                    [](const auto& x, const auto& y) { return x.first != y.first ? x.first > y.first : x.second < y.second; });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < top; ++i) out.emplace_back(table.words()[scored[i].second], scored[i].first);
  return out;
}

SteigerResult dependent_correlation_test(double r1, double r2, double r12, std::size_t n) {
  if (n < 4) throw usage_error("dependent correlation test needs n >= 4");
  for (double r : {r1, r2, r12}) {
    if (!std::isfinite(r) || std::abs(r) >= 1.0) throw numeric_error("degenerate correlation (|r| >= 1)");
  }
  if (r1 == r2) return {0.0, 1.0};
  const double rb = (r1 + r2) / 2.0;
  const double rb2 = rb * rb;
  const double s = (r12 * (1.0 - 2.0 * rb2) - 0.5 * rb2 * (1.0 - 2.0 * rb2 - r12 * r12)) / ((1.0 - rb2) * (1.0 - rb2));
  const double z = (std::atanh(r1) - std::atanh(r2)) * std::sqrt(static_cast<double>(n) - 3.0) / std::sqrt(2.0 - 2.0 * s);
  return {z, std::erfc(std::abs(z) / std::sqrt(2.0))};
}

}  // namespace gwe::eval
