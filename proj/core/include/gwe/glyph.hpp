#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace gwe {

inline constexpr int kBitmapSide = 60;
inline constexpr int kBitmapPixels = kBitmapSide * kBitmapSide;

/// 60×60 grayscale character image. Ink is high intensity (255 = full ink,
/// 0 = background).
struct Bitmap {
  char32_t codepoint = 0;
  std::array<std::uint8_t, kBitmapPixels> pixels{};

  std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row * kBitmapSide + col)]; }
  std::uint8_t& at(int row, int col) { return pixels[static_cast<std::size_t>(row * kBitmapSide + col)]; }

  bool operator==(const Bitmap&) const = default;
};

struct RenderParams {
  int point_size = 48;       // rasterizer resolution before fitting
  int baseline_offset = 0;   // vertical shift in output pixels, positive = down
  int margin = 4;            // uniform blank border in the 60×60 canvas

  bool operator==(const RenderParams&) const = default;
};

/// Anti-aliased ink coverage of one glyph, values in [0,1], row-major.
struct GlyphCoverage {
  int width = 0;
  int height = 0;
  std::vector<double> coverage;
};

/// Font-rasterization backend. Returns nullopt when the font lacks the glyph.
class Rasterizer {
 public:
  virtual ~Rasterizer() = default;
  virtual std::string font_name() const = 0;
  virtual std::optional<GlyphCoverage> rasterize(char32_t codepoint, const RenderParams& params) const = 0;
};

/// Fits the glyph's ink box into the canvas (uniform scale, centered, box-filter
/// resampling) and maps coverage to [0,255]. Throws "missing glyph".
Bitmap render_bitmap(char32_t codepoint, const Rasterizer& rasterizer, const RenderParams& params);

/// Procedural stand-in for a font: every character is a left-side "radical"
/// motif, chosen by codepoint modulo `radical_groups`, plus a few strokes on the
/// right derived from a hash of the codepoint. Whitespace renders empty;
/// control characters and surrogates are missing.
class SyntheticRasterizer final : public Rasterizer {
 public:
  explicit SyntheticRasterizer(int radical_groups = 8, std::uint64_t style_seed = 0);

  std::string font_name() const override;
  std::optional<GlyphCoverage> rasterize(char32_t codepoint, const RenderParams& params) const override;

  int radical_of(char32_t codepoint) const;

 private:
  int radical_groups_;
  std::uint64_t style_seed_;
};

/// A motif-grouped synthetic set: `groups * per_group` bitmaps where the
/// characters of one group share the same left-side component.
struct MotifSet {
  std::vector<Bitmap> bitmaps;
  std::vector<int> group;  // parallel to bitmaps
};

MotifSet synthetic_motif_set(int groups, int per_group, std::uint64_t seed);

/// Bitmap set keyed by codepoint, plus the characters that had no glyph.
struct BitmapArchive {
  std::string font_name;
  RenderParams params;
  std::map<char32_t, Bitmap> entries;
  std::set<char32_t> missing;

  /// Throws on duplicate codepoints.
  void add(const Bitmap& bitmap);

  bool operator==(const BitmapArchive&) const = default;
};

/// Writes `U+XXXX.pgm` (binary P5, standard dark-ink polarity) per entry and
/// `manifest.tsv` (`codepoint<TAB>filename<TAB>polarity`) into `dir`.
void save_archive(const BitmapArchive& archive, const std::filesystem::path& dir);
BitmapArchive load_archive(const std::filesystem::path& dir);

/// P5 PGM, maxval 255, 60×60. `ink_high` selects the stored polarity.
void write_pgm(const std::filesystem::path& path, const Bitmap& bitmap, bool ink_high);
Bitmap read_pgm(const std::filesystem::path& path, bool ink_high);

/// Renders every codepoint; glyphs the rasterizer lacks go to `missing` and,
/// if `blank_for_missing`, also get an all-background entry.
BitmapArchive render_archive(const std::vector<char32_t>& codepoints, const Rasterizer& rasterizer,
                             const RenderParams& params, bool blank_for_missing = false);

}  // namespace gwe
