#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gwe/error.hpp"
#include "gwe/pipeline.hpp"

namespace {

namespace fs = std::filesystem;

std::string flag_name(std::string_view key) {
  std::string s(key);
  for (auto& c : s) {
    if (c == '_') c = '-';
  }
  return "--" + s;
}

// Settings exposed as flags on one subcommand, collected before the config
// file is applied so flags win.
struct SettingFlags {
  std::optional<std::string> config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* cmd, const std::vector<std::string_view>& keys) {
    cmd->add_option("--config", config_file, "key=value settings file");
    for (auto key : keys) {
      const auto& spec = *std::find_if(gwe::setting_specs().begin(), gwe::setting_specs().end(),
                                       [&](const gwe::SettingSpec& s) { return s.key == key; });
      auto* opt = cmd->add_option_function<std::string>(
          flag_name(key), [this, key](const std::string& v) { values[std::string(key)] = v; },
          std::string(spec.help));
      if (!spec.default_value.empty()) opt->description(std::string(spec.help) + " [" + std::string(spec.default_value) + "]");
    }
  }

  gwe::PipelineConfig resolve() const {
    gwe::PipelineConfig config;
    if (config_file) config.apply_file(*config_file);
    for (const auto& [k, v] : values) config.set(k, v);
    return config;
  }
};

const std::vector<std::string_view> kGlyphKeys = {"corpus", "min_count", "chars", "bitmaps", "output_dir",
                                                  "point_size", "margin", "baseline_offset", "synthetic_groups",
                                                  "seed"};
const std::vector<std::string_view> kConvaeKeys = {"bitmaps", "output_dir", "convae_epochs", "convae_batch",
                                                   "convae_lr", "convae_level_lr_scale", "convae_l1", "convae_path",
                                                   "seed"};
const std::vector<std::string_view> kExtractKeys = {"bitmaps", "convae", "corpus", "min_count", "features",
                                                    "output_dir"};
const std::vector<std::string_view> kTrainKeys = {
    "corpus", "features", "radicals", "output_dir", "variant", "min_count", "window", "negatives", "subsample",
    "dims", "multi_embedding", "lr", "min_lr_fraction", "epochs", "word_only", "harmonic", "x_max", "alpha",
    "glove_lr", "glove_epochs", "cooc_min", "rnn_dims", "rnn_hidden", "rnn_head_hidden", "rnn_lr", "rnn_epochs",
    "seed", "threads"};

int exit_code(gwe::ErrorKind kind) {
  switch (kind) {
    case gwe::ErrorKind::kUsage:
      return 1;
    case gwe::ErrorKind::kData:
      return 2;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glyph-aware Chinese word embeddings: glyph features, training and evaluation"};
  app.require_subcommand(1);

  SettingFlags render_flags, convae_flags, extract_flags, train_flags, sim_flags, analogy_flags, job_flags;
  std::vector<std::string> embeddings;
  std::vector<std::string> pair;
  std::size_t neighbors = 0;

  render_flags.attach(app.add_subcommand("render-glyphs", "render synthetic glyph bitmaps into an archive"),
                      kGlyphKeys);
  convae_flags.attach(app.add_subcommand("train-convae", "train the convolutional autoencoder layer by layer"),
                      kConvaeKeys);
  extract_flags.attach(app.add_subcommand("extract-glyphs", "encode bitmaps into glyph feature vectors"),
                       kExtractKeys);
  train_flags.attach(app.add_subcommand("train", "train word embeddings"), kTrainKeys);

  auto add_eval = [&](const char* name, const char* help, SettingFlags& flags, std::vector<std::string_view> keys) {
    auto* cmd = app.add_subcommand(name, help);
    keys.push_back("output_dir");
    flags.attach(cmd, keys);
    cmd->add_option("embeddings", embeddings, "embedding files (word2vec text)")->required()->check(CLI::ExistingFile);
    return cmd;
  };
  auto* eval_sim = add_eval("eval-sim", "word similarity (Spearman)", sim_flags, {"similarity"});
  auto* eval_analogy =
      add_eval("eval-analogy", "word analogy (3CosAdd)", analogy_flags, {"analogy", "exclude_question_words"});
  auto* eval_job = add_eval("eval-jobplace", "job&place analogy", job_flags, {"jobplace"});

  auto* sim = app.add_subcommand("sim", "cosine similarity of a word pair");
  sim->add_option("--pair", pair, "two words")->required()->expected(2);
  sim->add_option("--nearest", neighbors, "also list this many nearest words");
  sim->add_option("embeddings", embeddings, "embedding files")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  gwe::CommandStreams io{std::cout, std::cerr};
  const std::vector<fs::path> paths(embeddings.begin(), embeddings.end());
  try {
    const auto& name = app.get_subcommands().front()->get_name();
    if (name == "render-glyphs") {
      gwe::cmd_render_glyphs(render_flags.resolve(), io);
    } else if (name == "train-convae") {
      gwe::cmd_train_convae(convae_flags.resolve(), io);
    } else if (name == "extract-glyphs") {
      gwe::cmd_extract_glyphs(extract_flags.resolve(), io);
    } else if (name == "train") {
      gwe::cmd_train(train_flags.resolve(), io);
    } else if (name == eval_sim->get_name()) {
      gwe::cmd_eval_sim(sim_flags.resolve(), paths, io);
    } else if (name == eval_analogy->get_name()) {
      gwe::cmd_eval_analogy(analogy_flags.resolve(), paths, io);
    } else if (name == eval_job->get_name()) {
      gwe::cmd_eval_jobplace(job_flags.resolve(), paths, io);
    } else if (name == sim->get_name()) {
      gwe::cmd_sim(paths, pair[0], pair[1], neighbors, io);
    }
  } catch (const gwe::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
