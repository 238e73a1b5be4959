#include "gwe/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "gwe/cooc.hpp"
#include "gwe/convae.hpp"
#include "gwe/corpus.hpp"
#include "gwe/embed.hpp"
#include "gwe/error.hpp"
#include "gwe/eval.hpp"
#include "gwe/glyph.hpp"
#include "gwe/glyph_table.hpp"
#include "gwe/seqmodel.hpp"
#include "gwe/utf8.hpp"

namespace gwe {

namespace fs = std::filesystem;

const std::vector<SettingSpec>& setting_specs() {
  using T = SettingType;
  static const std::vector<SettingSpec> specs = {
      {"corpus", "", T::kPath, "segmented corpus, one sentence per line"},
      {"bitmaps", "", T::kPath, "glyph bitmap archive directory"},
      {"convae", "", T::kPath, "convAE checkpoint"},
      {"features", "", T::kPath, "glyph feature TSV (default <output_dir>/glyph_features.tsv)"},
      {"radicals", "", T::kPath, "char<TAB>radical map"},
      {"similarity", "", T::kString, "comma-separated similarity datasets"},
      {"analogy", "", T::kString, "comma-separated analogy datasets"},
      {"jobplace", "", T::kString, "comma-separated job&place datasets"},
      {"output_dir", "out", T::kPath, "directory for every output"},
      {"chars", "", T::kString, "characters to render when no corpus is given"},
      {"variant", "cbow", T::kString, "model to train"},
      {"min_count", "25", T::kInt, "keep words seen more than this many times"},
      {"window", "5", T::kInt, "context window on each side"},
      {"negatives", "10", T::kInt, "negative samples per prediction"},
      {"subsample", "1e-5", T::kReal, "subsampling threshold t, 0 disables"},
      {"dims", "512", T::kInt, "window-model and GloVe dimensionality"},
      {"multi_embedding", "3", T::kInt, "character vectors per character (position slots)"},
      {"lr", "0.025", T::kReal, "window-model starting learning rate"},
      {"min_lr_fraction", "1e-4", T::kReal, "learning-rate floor as a fraction of lr"},
      {"epochs", "5", T::kInt, "window-model epochs"},
      {"word_only", "false", T::kBool, "export w_i alone instead of the composed vector"},
      {"harmonic", "true", T::kBool, "1/d co-occurrence weighting"},
      {"x_max", "100", T::kReal, "GloVe weighting cutoff"},
      {"alpha", "0.75", T::kReal, "GloVe weighting exponent"},
      {"glove_lr", "0.05", T::kReal, "GloVe Adagrad learning rate"},
      {"glove_epochs", "25", T::kInt, "GloVe epochs"},
      {"cooc_min", "0.5", T::kReal, "RNN-GloVe drops entries below this value"},
      {"rnn_dims", "200", T::kInt, "RNN word-vector size"},
      {"rnn_hidden", "256", T::kInt, "GRU hidden size"},
      {"rnn_head_hidden", "200", T::kInt, "ELU head inner size"},
      {"rnn_lr", "0.001", T::kReal, "RNN Adagrad learning rate"},
      {"rnn_epochs", "1", T::kInt, "RNN epochs"},
      {"convae_epochs", "100", T::kInt, "convAE epochs per level"},
      {"convae_batch", "20", T::kInt, "convAE batch size"},
      {"convae_lr", "0.001", T::kReal, "convAE Adagrad learning rate"},
      {"convae_level_lr_scale", "1,1,1,1,1", T::kString, "per-level multipliers on convae_lr"},
      {"convae_l1", "1e-4", T::kReal, "l1 weight on encoder activations"},
      {"convae_path", "full", T::kString, "full or truncated reconstruction path"},
      {"point_size", "48", T::kInt, "rasterizer resolution"},
      {"margin", "4", T::kInt, "blank border in the 60x60 canvas"},
      {"baseline_offset", "0", T::kInt, "vertical glyph shift"},
      {"synthetic_groups", "8", T::kInt, "component groups of the synthetic font"},
      {"exclude_question_words", "true", T::kBool, "drop a, b, c from analogy candidates"},
      {"seed", "1", T::kSeed, "root seed"},
      {"threads", "1", T::kInt, "worker threads (>1 is not reproducible)"},
  };
  return specs;
}

namespace {

const SettingSpec& spec_of(std::string_view key) {
  for (const auto& s : setting_specs()) {
    if (s.key == key) return s;
  }
  throw usage_error("unknown setting '" + std::string(key) + "'");
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::ofstream create(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

PipelineConfig::PipelineConfig() {
  for (const auto& s : setting_specs()) values_.emplace(std::string(s.key), std::string(s.default_value));
}

void PipelineConfig::set(std::string_view key, std::string_view raw) {
  const auto& spec = spec_of(key);
  const std::string value = trim(raw);
  bool ok = true;
  switch (spec.type) {
    case SettingType::kInt: {
      std::int64_t v;
      ok = parse_number(value, v);
      break;
    }
    case SettingType::kSeed: {
      std::uint64_t v;
      ok = parse_number(value, v);
      break;
    }
    case SettingType::kReal: {
      double v;
      ok = parse_number(value, v) && std::isfinite(v);
      break;
    }
    case SettingType::kBool:
      ok = value == "true" || value == "false";
      break;
    default:
      break;
  }
  if (!ok) throw usage_error("setting '" + std::string(key) + "': cannot parse '" + value + "'");
  values_[std::string(key)] = value;
}

void PipelineConfig::apply(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw usage_error(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set(trim(text.substr(0, eq)), text.substr(eq + 1));
    } catch (const Error& e) {
      throw usage_error(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void PipelineConfig::apply_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw usage_error("cannot open config '" + path.string() + "'");
  apply(in, path.string());
}

const std::string& PipelineConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw usage_error("unknown setting '" + std::string(key) + "'");
  return it->second;
}

std::string PipelineConfig::required(std::string_view key) const {
  const auto& v = get(key);
  if (v.empty()) throw usage_error("setting '" + std::string(key) + "' is required here");
  return v;
}

std::int64_t PipelineConfig::integer(std::string_view key) const {
  std::int64_t v = 0;
  parse_number(get(key), v);
  return v;
}

double PipelineConfig::real(std::string_view key) const {
  double v = 0;
  parse_number(get(key), v);
  return v;
}

bool PipelineConfig::flag(std::string_view key) const { return get(key) == "true"; }

std::uint64_t PipelineConfig::seed() const {
  std::uint64_t v = 0;
  parse_number(get("seed"), v);
  return v;
}

fs::path PipelineConfig::output_dir() const { return required("output_dir"); }

void PipelineConfig::write(std::ostream& out) const {
  for (const auto& s : setting_specs()) out << s.key << '=' << get(s.key) << '\n';
}

void write_config_echo(const PipelineConfig& config, std::string_view command) {
  auto out = create(config.output_dir() / (std::string(command) + ".conf"));
  config.write(out);
}

// ---------------------------------------------------------------------------
// Shared loading

namespace {

int positive_int(const PipelineConfig& c, std::string_view key, std::int64_t min = 1) {
  const auto v = c.integer(key);
  if (v < min || v > (1 << 30)) {
    throw usage_error("setting '" + std::string(key) + "' must be >= " + std::to_string(min));
  }
  return static_cast<int>(v);
}

Vocabulary corpus_vocab(const PipelineConfig& c) {
  std::ifstream in(c.required("corpus"), std::ios::binary);
  if (!in) throw data_error("cannot open corpus '" + c.get("corpus") + "'");
  return build_vocab(in, c.integer("min_count"));
}

EncodedCorpus corpus_lines(const PipelineConfig& c, const Vocabulary& vocab) {
  std::ifstream in(c.required("corpus"), std::ios::binary);
  if (!in) throw data_error("cannot open corpus '" + c.get("corpus") + "'");
  return encode_corpus(in, vocab);
}

RenderParams render_params(const PipelineConfig& c) {
  RenderParams p;
  p.point_size = positive_int(c, "point_size");
  p.margin = positive_int(c, "margin", 0);
  p.baseline_offset = static_cast<int>(c.integer("baseline_offset"));
  return p;
}

convae::TrainConfig convae_config(const PipelineConfig& c) {
  convae::TrainConfig t;
  t.epochs_per_level = positive_int(c, "convae_epochs", 0);
  t.batch = positive_int(c, "convae_batch");
  t.lr = c.real("convae_lr");
  t.l1_weight = c.real("convae_l1");
  t.seed = derive_seed(c.seed(), "convae");
  const auto& path = c.get("convae_path");
  if (path == "full") {
    t.path = convae::TrainPath::kFull;
  } else if (path == "truncated") {
    t.path = convae::TrainPath::kTruncated;
  } else {
    throw usage_error("convae_path must be 'full' or 'truncated'");
  }
  const auto scales = split_list(c.get("convae_level_lr_scale"));
  if (scales.size() != t.level_lr_scale.size()) throw usage_error("convae_level_lr_scale needs 5 values");
  for (std::size_t l = 0; l < scales.size(); ++l) {
    if (!parse_number(scales[l], t.level_lr_scale[l]) || !(t.level_lr_scale[l] > 0)) {
      throw usage_error("convae_level_lr_scale: bad value '" + scales[l] + "'");
    }
  }
  return t;
}

double subsample_threshold(const PipelineConfig& c) {
  const double t = c.real("subsample");
  if (t < 0) throw usage_error("subsample must be >= 0");
  return t == 0 ? kNoSubsampling : t;
}

fs::path features_path(const PipelineConfig& c) {
  return c.get("features").empty() ? c.output_dir() / "glyph_features.tsv" : fs::path(c.get("features"));
}

std::vector<convae::GlyphFeature> load_glyph_features(const PipelineConfig& c) {
  return convae::load_features(features_path(c));
}

eval::EmbeddingTable make_table(const Vocabulary& vocab, Matrix vectors) {
  return eval::EmbeddingTable(vocab.words(), std::move(vectors));
}

void write_loss_csv(const fs::path& path, const std::vector<double>& losses) {
  auto out = create(path);
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) out << e + 1 << ',' << fixed(losses[e], 9) << '\n';
}

void write_info(const fs::path& vec_path, const std::string& representation) {
  auto out = create(fs::path(vec_path.string() + ".info"));
  out << "representation=" << representation << '\n';
}

std::string representation_of(const fs::path& vec_path) {
  std::ifstream in(vec_path.string() + ".info");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("representation=", 0) == 0) return line.substr(15);
  }
  return "unknown";
}

std::string label_of(const fs::path& p) { return p.filename().string(); }

}  // namespace

// ---------------------------------------------------------------------------
// Glyph commands

void cmd_render_glyphs(const PipelineConfig& config, CommandStreams io) {
  std::vector<char32_t> chars;
  if (!config.get("corpus").empty()) {
    chars = corpus_vocab(config).characters();
  } else {
    chars = utf8::decode(config.required("chars"));
  }
  std::sort(chars.begin(), chars.end());
  chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
  const SyntheticRasterizer raster(positive_int(config, "synthetic_groups"), derive_seed(config.seed(), "font"));
  const auto archive = render_archive(chars, raster, render_params(config), false);
  save_archive(archive, config.required("bitmaps"));
  write_config_echo(config, "render-glyphs");
  io.log << "rendered " << archive.entries.size() << " glyphs, " << archive.missing.size() << " missing\n";
}

void cmd_train_convae(const PipelineConfig& config, CommandStreams io) {
  const auto archive = load_archive(config.required("bitmaps"));
  if (archive.entries.empty()) throw data_error("bitmap archive is empty");
  std::vector<Bitmap> bitmaps;
  for (const auto& [cp, bmp] : archive.entries) bitmaps.push_back(bmp);
  const auto tc = convae_config(config);

  const auto dir = config.output_dir();
  auto csv = create(dir / "convae_loss.csv");
  csv << "level,epoch,loss\n";
  const auto result = convae::train_layerwise(bitmaps, tc, [&](const convae::EpochLog& e) {
    csv << e.level << ',' << e.epoch << ',' << fixed(e.loss, 9) << '\n';
    if (e.epoch == tc.epochs_per_level) io.log << "level " << e.level << " done, loss " << fixed(e.loss, 4) << '\n';
  });
  convae::save_params(dir / "convae.gwt", result.params);
  write_config_echo(config, "train-convae");

  std::vector<convae::FeatureMap> maps;
  for (const auto& b : bitmaps) maps.push_back(convae::bitmap_to_map(b));
  io.out << "reconstruction_mse\t" << fixed(convae::reconstruction_mse(maps, result.params), 6) << '\n';
}

void cmd_extract_glyphs(const PipelineConfig& config, CommandStreams io) {
  auto archive = load_archive(config.required("bitmaps"));
  const auto params = convae::load_params(config.required("convae"));
  std::set<char32_t> blank;
  if (!config.get("corpus").empty()) {
    const auto vocab = corpus_vocab(config);
    for (char32_t cp : vocab.characters()) {
      if (!archive.entries.count(cp)) blank.insert(cp);
    }
  }
  for (char32_t cp : blank) {
    io.log << "warning: no bitmap for " << utf8::codepoint_label(cp) << " (" << utf8::encode(cp)
           << "), using a blank bitmap\n";
    Bitmap b;
    b.codepoint = cp;
    archive.entries.emplace(cp, b);
  }
  std::vector<convae::GlyphFeature> features;
  for (const auto& [cp, bmp] : archive.entries) features.push_back(convae::encode(bmp, params));

  const fs::path out_path = features_path(config);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  convae::save_features(out_path, features);
  {
    auto missing = create(config.output_dir() / "blank_glyphs.txt");
    for (char32_t cp : blank) missing << utf8::codepoint_label(cp) << '\t' << utf8::encode(cp) << '\n';
  }
  write_config_echo(config, "extract-glyphs");
  io.log << "wrote " << features.size() << " feature rows (" << blank.size() << " blank) to " << out_path.string()
         << '\n';
}

// ---------------------------------------------------------------------------
// Training

namespace {

void export_char_tables(const fs::path& dir, const std::string& name, const EmbeddingStore& store,
                        const Vocabulary& vocab, const RadicalIndex* radicals) {
  static constexpr const char* kPos[] = {"begin", "middle", "end"};
  std::vector<std::string> names;
  for (std::size_t c = 0; c < vocab.char_count(); ++c) {
    for (const char* p : kPos) {
      names.push_back(std::string("#CHAR:") + p + ":" + utf8::encode(vocab.character(static_cast<CharId>(c))));
    }
  }
  eval::save_embeddings(dir / (name + ".chars.vec"), eval::EmbeddingTable(std::move(names), store.chars));
  if (radicals) {
    std::vector<std::string> rnames;
    for (const auto& r : radicals->names()) rnames.push_back("#RAD:" + r);
    eval::save_embeddings(dir / (name + ".radicals.vec"), eval::EmbeddingTable(std::move(rnames), store.radicals));
  }
}

void train_window(const PipelineConfig& config, const std::string& name, Variant variant, const Vocabulary& vocab,
                  const EncodedCorpus& corpus, CommandStreams io) {
  const auto dir = config.output_dir();
  EmbedConfig ec;
  ec.dims = static_cast<std::size_t>(positive_int(config, "dims"));
  ec.window = positive_int(config, "window");
  ec.negatives = positive_int(config, "negatives", 0);
  ec.subsample = subsample_threshold(config);
  ec.lr = config.real("lr");
  ec.min_lr_fraction = config.real("min_lr_fraction");
  ec.epochs = positive_int(config, "epochs", 0);
  ec.seed = derive_seed(config.seed(), "embed");
  ec.threads = positive_int(config, "threads");

  GlyphTable glyphs;
  RadicalIndex radicals;
  ModelContext ctx{&vocab, nullptr, nullptr};
  if (needs_glyphs(variant)) {
    glyphs = GlyphTable::from_features(load_glyph_features(config), vocab, ec.dims,
                                       derive_seed(config.seed(), "glyph-projection"));
    ctx.glyphs = &glyphs;
  }
  if (variant == Variant::kMge) {
    radicals = RadicalIndex::load(config.required("radicals"), vocab);
    if (!radicals.unmapped().empty()) {
      io.log << "warning: " << radicals.unmapped().size() << " characters have no radical entry\n";
    }
    ctx.radicals = &radicals;
  }
  TrainStats stats;
  const auto store = train_window_model(corpus, variant, ec, ctx, &stats);
  const bool word_only = config.flag("word_only");
  const auto vec_path = dir / (name + ".vec");
  eval::save_embeddings(vec_path, make_table(vocab, evaluation_vectors(variant, store, ctx, word_only)));
  std::string rep = "word";
  if (!word_only && variant != Variant::kCbow && variant != Variant::kSkipgram) {
    rep = (variant == Variant::kCtxG || variant == Variant::kSkipgramCtxG) ? "composed-ctxg" : "composed-cwe";
  }
  write_info(vec_path, rep);
  if (variant != Variant::kCbow && variant != Variant::kSkipgram) {
    export_char_tables(dir, name, store, vocab, ctx.radicals);
  }
  write_loss_csv(dir / (name + ".loss.csv"), stats.epoch_loss);
  io.log << name << ": " << stats.examples << " examples\n";
}

void train_glove(const PipelineConfig& config, const Vocabulary& vocab, const EncodedCorpus& corpus,
                 CommandStreams io) {
  const auto dir = config.output_dir();
  const auto cooc = build_cooc(corpus, vocab.size(), positive_int(config, "window"), config.flag("harmonic"));
  save_cooc(dir / "cooc.bin", cooc);
  GloveConfig gc;
  gc.dims = static_cast<std::size_t>(positive_int(config, "dims"));
  gc.epochs = positive_int(config, "glove_epochs", 0);
  gc.lr = config.real("glove_lr");
  gc.terms = {config.real("x_max"), config.real("alpha")};
  gc.seed = derive_seed(config.seed(), "glove");
  gc.threads = positive_int(config, "threads");
  std::vector<double> losses;
  const auto params = glove_train(cooc, gc, &losses);
  eval::save_embeddings(dir / "glove.vec", make_table(vocab, glove_output(params)));
  write_info(dir / "glove.vec", "w+w_tilde");
  write_loss_csv(dir / "glove.loss.csv", losses);
  io.log << "glove: " << cooc.entries.size() << " co-occurrence entries\n";
}

seq::RnnConfig rnn_config(const PipelineConfig& config) {
  seq::RnnConfig rc;
  rc.hidden = static_cast<std::size_t>(positive_int(config, "rnn_hidden"));
  rc.head_hidden = static_cast<std::size_t>(positive_int(config, "rnn_head_hidden"));
  rc.output = static_cast<std::size_t>(positive_int(config, "rnn_dims"));
  rc.window = positive_int(config, "window");
  rc.negatives = positive_int(config, "negatives", 0);
  rc.subsample = subsample_threshold(config);
  rc.lr = config.real("rnn_lr");
  rc.epochs = positive_int(config, "rnn_epochs", 0);
  rc.seed = derive_seed(config.seed(), "rnn");
  rc.terms = {config.real("x_max"), config.real("alpha")};
  rc.min_cooc = config.real("cooc_min");
  return rc;
}

void train_rnn(const PipelineConfig& config, bool glove, const Vocabulary& vocab, const EncodedCorpus& corpus,
               CommandStreams io) {
  const auto dir = config.output_dir();
  const auto features = load_glyph_features(config);
  if (features.empty()) throw data_error("glyph feature file is empty");
  const auto glyphs = GlyphTable::from_features(features, vocab, features.front().values.size());
  const auto rc = rnn_config(config);
  std::vector<double> losses;
  if (glove) {
    const auto cooc = build_cooc(corpus, vocab.size(), rc.window, config.flag("harmonic"));
    const auto model = seq::rnn_glove_train(cooc, vocab, glyphs, rc, &losses);
    save_tensor_file(dir / "rnn-glove.gwt", model.to_tensor_file());
    eval::save_embeddings(dir / "rnn-glove.vec", make_table(vocab, seq::rnn_glove_vectors(model, vocab, glyphs)));
    write_info(dir / "rnn-glove.vec", "w+w_tilde");
    write_loss_csv(dir / "rnn-glove.loss.csv", losses);
  } else {
    const auto model = seq::rnn_skipgram_train(corpus, vocab, glyphs, rc, &losses);
    save_tensor_file(dir / "rnn-sg.gwt", model.to_tensor_file());
    eval::save_embeddings(dir / "rnn-sg.vec", make_table(vocab, seq::rnn_skipgram_vectors(model, vocab, glyphs)));
    write_info(dir / "rnn-sg.vec", "word");
    write_loss_csv(dir / "rnn-sg.loss.csv", losses);
  }
  io.log << (glove ? "rnn-glove" : "rnn-sg") << ": done\n";
}

}  // namespace

void cmd_train(const PipelineConfig& config, CommandStreams io) {
  const auto name = config.required("variant");
  if (config.integer("multi_embedding") != static_cast<std::int64_t>(kPositionSlots)) {
    throw usage_error("multi_embedding must be 3 (begin/middle/end position slots)");
  }
  const bool is_window = name != "glove" && name != "rnn-sg" && name != "rnn-glove";
  const Variant variant = is_window ? parse_variant(name) : Variant::kCbow;
  const auto vocab = corpus_vocab(config);
  const auto corpus = corpus_lines(config, vocab);
  fs::create_directories(config.output_dir());
  save_vocab(config.output_dir() / "vocab.tsv", vocab);
  io.log << "vocabulary: " << vocab.size() << " words, " << vocab.char_count() << " characters\n";
  if (is_window) {
    train_window(config, name, variant, vocab, corpus, io);
  } else if (name == "glove") {
    train_glove(config, vocab, corpus, io);
  } else {
    train_rnn(config, name == "rnn-glove", vocab, corpus, io);
  }
  write_config_echo(config, "train-" + name);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

std::vector<eval::EmbeddingTable> load_tables(const std::vector<fs::path>& paths) {
  if (paths.empty()) throw usage_error("no embedding files given");
  std::vector<eval::EmbeddingTable> out;
  for (const auto& p : paths) out.push_back(eval::load_embeddings(p));
  return out;
}

void print_rule(std::ostream& out, std::size_t width) { out << std::string(width, '-') << '\n'; }

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

void write_report(const PipelineConfig& config, const std::string& name, const std::string& tsv) {
  auto out = create(config.output_dir() / name);
  out << tsv;
}

}  // namespace

void cmd_eval_sim(const PipelineConfig& config, const std::vector<fs::path>& embeddings, CommandStreams io) {
  const auto tables = load_tables(embeddings);
  const auto dataset_paths = split_list(config.required("similarity"));
  std::ostringstream tsv;
  tsv << "# representation:";
  for (const auto& p : embeddings) tsv << ' ' << label_of(p) << '=' << representation_of(p);
  tsv << "\nembedding\tdataset\trho\tpairs_used\tpairs_dropped\tz_vs_first\tp_vs_first\n";

  std::vector<std::vector<std::string>> cells(tables.size());
  for (const auto& dpath : dataset_paths) {
    const auto data = eval::load_similarity(dpath);
    const auto dname = fs::path(dpath).stem().string();
    for (std::size_t e = 0; e < tables.size(); ++e) {
      eval::SimilarityResult r;
      bool defined = true;
      try {
        r = eval::eval_similarity(tables[e], data);
      } catch (const Error& err) {
        if (err.kind() != ErrorKind::kNumeric) throw;
        io.log << "warning: " << label_of(embeddings[e]) << " on " << dname << ": " << err.what() << '\n';
        defined = false;
        r.rho = std::nan("");
      }
      std::string z = "", p = "";
      if (e > 0 && defined) {
        // Significance on the pairs both embeddings cover.
        std::vector<double> human, m1, m2;
        for (const auto& rec : data) {
          const auto a0 = tables[0].find(rec.a), b0 = tables[0].find(rec.b);
          const auto a1 = tables[e].find(rec.a), b1 = tables[e].find(rec.b);
          if (!a0 || !b0 || !a1 || !b1) continue;
          human.push_back(rec.score);
          m1.push_back(eval::cosine(tables[0].vector(*a0), tables[0].vector(*b0)));
          m2.push_back(eval::cosine(tables[e].vector(*a1), tables[e].vector(*b1)));
        }
        if (human.size() >= 4) {
          try {
            const auto s = eval::dependent_correlation_test(eval::spearman(human, m1), eval::spearman(human, m2),
                                                            eval::spearman(m1, m2), human.size());
            z = fixed(s.z, 4);
            p = fixed(s.p, 4);
          } catch (const Error& err) {
            io.log << "warning: no significance test for " << label_of(embeddings[e]) << " on " << dname << ": "
                   << err.what() << '\n';
          }
        }
      }
      tsv << label_of(embeddings[e]) << '\t' << dname << '\t' << fixed(r.rho, 6) << '\t' << r.pairs_used << '\t'
          << r.pairs_dropped << '\t' << z << '\t' << p << '\n';
      cells[e].push_back(defined ? fixed(r.rho, 4) + (p.empty() ? "" : " (p=" + p + ")") : "undefined");
    }
  }
  write_report(config, "eval_sim.tsv", tsv.str());
  write_config_echo(config, "eval-sim");

  io.out << pad("embedding", 24);
  for (const auto& d : dataset_paths) io.out << pad(fs::path(d).stem().string(), 20);
  io.out << '\n';
  print_rule(io.out, 24 + 20 * dataset_paths.size());
  for (std::size_t e = 0; e < tables.size(); ++e) {
    io.out << pad(label_of(embeddings[e]), 24);
    for (const auto& c : cells[e]) io.out << pad(c, 20);
    io.out << '\n';
  }
}

void cmd_eval_analogy(const PipelineConfig& config, const std::vector<fs::path>& embeddings, CommandStreams io) {
  const auto tables = load_tables(embeddings);
  eval::AnalogyOptions opts;
  opts.exclude_question_words = config.flag("exclude_question_words");
  std::ostringstream tsv;
  tsv << "embedding\tdataset\tcategory\tcorrect\tevaluated\tdropped\taccuracy\n";
  for (const auto& dpath : split_list(config.required("analogy"))) {
    const auto data = eval::load_analogy(dpath);
    const auto dname = fs::path(dpath).stem().string();
    io.out << dname << '\n' << pad("embedding", 24);
    for (const auto& c : data) io.out << pad(c.name, 12);
    io.out << pad("total", 12) << '\n';
    print_rule(io.out, 24 + 12 * (data.size() + 1));
    for (std::size_t e = 0; e < tables.size(); ++e) {
      const auto r = eval::eval_analogy(tables[e], data, opts);
      io.out << pad(label_of(embeddings[e]), 24);
      auto row = [&](const eval::CategoryAccuracy& c) {
        tsv << label_of(embeddings[e]) << '\t' << dname << '\t' << c.name << '\t' << c.correct << '\t' << c.evaluated
            << '\t' << c.dropped << '\t' << fixed(c.accuracy(), 6) << '\n';
        io.out << pad(fixed(c.accuracy(), 4), 12);
      };
      for (const auto& c : r.categories) row(c);
      row(r.total);
      io.out << '\n';
    }
  }
  write_report(config, "eval_analogy.tsv", tsv.str());
  write_config_echo(config, "eval-analogy");
}

void cmd_eval_jobplace(const PipelineConfig& config, const std::vector<fs::path>& embeddings, CommandStreams io) {
  const auto tables = load_tables(embeddings);
  std::ostringstream tsv;
  tsv << "embedding\tdataset\tcorrect\tpairs\tjobs_dropped\taccuracy\n";
  for (const auto& dpath : split_list(config.required("jobplace"))) {
    const auto data = eval::load_job_place(dpath);
    const auto dname = fs::path(dpath).stem().string();
    io.out << dname << '\n' << pad("embedding", 24) << pad("accuracy", 12) << pad("pairs", 10) << '\n';
    print_rule(io.out, 46);
    for (std::size_t e = 0; e < tables.size(); ++e) {
      const auto r = eval::eval_job_place(tables[e], data);
      tsv << label_of(embeddings[e]) << '\t' << dname << '\t' << r.correct << '\t' << r.pairs << '\t'
          << r.jobs_dropped << '\t' << fixed(r.accuracy(), 6) << '\n';
      io.out << pad(label_of(embeddings[e]), 24) << pad(fixed(r.accuracy(), 4), 12) << r.pairs << '\n';
    }
  }
  write_report(config, "eval_jobplace.tsv", tsv.str());
  write_config_echo(config, "eval-jobplace");
}

void cmd_sim(const std::vector<fs::path>& embeddings, const std::string& w1, const std::string& w2,
             std::size_t neighbors, CommandStreams io) {
  const auto tables = load_tables(embeddings);
  for (std::size_t e = 0; e < tables.size(); ++e) {
    const auto& t = tables[e];
    const auto a = t.find(w1), b = t.find(w2);
    io.out << label_of(embeddings[e]) << "\tcos(" << w1 << ", " << w2 << ")\t";
    if (a && b) {
      io.out << fixed(eval::cosine(t.vector(*a), t.vector(*b)), 6) << '\n';
    } else {
      io.out << "OOV\n";
    }
    if (neighbors == 0) continue;
    for (const auto& [word, idx] : {std::pair{w1, a}, std::pair{w2, b}}) {
      if (!idx) continue;
      const std::size_t self[] = {*idx};
      io.out << "  nearest to " << word << ':';
      for (const auto& [n, c] : eval::nearest(t, t.vector(*idx), neighbors, self)) io.out << ' ' << n << '(' << fixed(c, 3) << ')';
      io.out << '\n';
    }
  }
}

}  // namespace gwe
