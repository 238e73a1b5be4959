#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace gwe {

enum class SettingType { kPath, kString, kInt, kReal, kBool, kSeed };

struct SettingSpec {
  std::string_view key;
  std::string_view default_value;
  SettingType type;
  std::string_view help;
};

/// Every recognized key, in the order the resolved config is written.
const std::vector<SettingSpec>& setting_specs();

/// Flat key=value settings. Starts from the defaults; unknown keys and values
/// that do not parse as the key's type are rejected.
class PipelineConfig {
 public:
  PipelineConfig();

  void set(std::string_view key, std::string_view value);
  /// `key=value` lines; blank lines and `#` comments are skipped.
  void apply(std::istream& in, const std::string& source = "<config>");
  void apply_file(const std::filesystem::path& path);

  const std::string& get(std::string_view key) const;
  std::string required(std::string_view key) const;  // throws when empty
  std::int64_t integer(std::string_view key) const;
  double real(std::string_view key) const;
  bool flag(std::string_view key) const;
  std::uint64_t seed() const;
  std::filesystem::path output_dir() const;

  /// One `key=value` line per setting, in setting_specs() order.
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Writes the resolved config as `<output_dir>/<command>.conf`.
void write_config_echo(const PipelineConfig& config, std::string_view command);

struct CommandStreams {
  std::ostream& out;  // reports
  std::ostream& log;  // progress and warnings
};

/// Synthetic bitmap archive for the corpus characters (or `chars`), into `bitmaps`.
void cmd_render_glyphs(const PipelineConfig& config, CommandStreams io);

/// Layer-wise convAE training on the `bitmaps` archive; writes convae.gwt and
/// convae_loss.csv.
void cmd_train_convae(const PipelineConfig& config, CommandStreams io);

/// Encodes every archive bitmap (and a blank bitmap for any corpus character
/// the archive lacks) with the `convae` checkpoint into `features`.
void cmd_extract_glyphs(const PipelineConfig& config, CommandStreams io);

/// Trains `variant` on `corpus`; writes <variant>.vec and its side files.
void cmd_train(const PipelineConfig& config, CommandStreams io);

void cmd_eval_sim(const PipelineConfig& config, const std::vector<std::filesystem::path>& embeddings,
                  CommandStreams io);
void cmd_eval_analogy(const PipelineConfig& config, const std::vector<std::filesystem::path>& embeddings,
                      CommandStreams io);
void cmd_eval_jobplace(const PipelineConfig& config, const std::vector<std::filesystem::path>& embeddings,
                       CommandStreams io);

/// Cosine of (w1, w2) in every embedding file, plus `neighbors` nearest words
/// of each.
void cmd_sim(const std::vector<std::filesystem::path>& embeddings, const std::string& w1, const std::string& w2,
             std::size_t neighbors, CommandStreams io);

}  // namespace gwe
