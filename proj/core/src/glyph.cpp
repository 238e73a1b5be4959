#include "gwe/glyph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gwe/error.hpp"
#include "gwe/rng.hpp"
#include "gwe/utf8.hpp"

namespace gwe {

Bitmap render_bitmap(char32_t codepoint, const Rasterizer& rasterizer, const RenderParams& params) {
  if (params.margin < 0 || 2 * params.margin >= kBitmapSide) throw usage_error("render margin out of range");
  auto glyph = rasterizer.rasterize(codepoint, params);
  if (!glyph) throw data_error("missing glyph " + utf8::codepoint_label(codepoint));
  Bitmap out;
  out.codepoint = codepoint;

  int top = glyph->height, bottom = -1, left = glyph->width, right = -1;
  for (int y = 0; y < glyph->height; ++y) {
    for (int x = 0; x < glyph->width; ++x) {
      if (glyph->coverage[static_cast<std::size_t>(y * glyph->width + x)] > 0.0) {
        top = std::min(top, y);
        bottom = std::max(bottom, y);
        left = std::min(left, x);
        right = std::max(right, x);
      }
    }
  }
  if (bottom < 0) return out;

  const int box_w = right - left + 1;
  const int box_h = bottom - top + 1;
  const double avail = kBitmapSide - 2 * params.margin;
  const double scale = avail / std::max(box_w, box_h);  // output px per source px
  const double off_x = params.margin + (avail - box_w * scale) / 2.0;
  const double off_y = params.margin + (avail - box_h * scale) / 2.0 + params.baseline_offset;

  // Box filter: average source coverage over each output pixel's footprint,
  // sampled on a 4×4 subgrid.
  constexpr int kSub = 4;
  for (int oy = 0; oy < kBitmapSide; ++oy) {
    for (int ox = 0; ox < kBitmapSide; ++ox) {
      double acc = 0.0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = (ox + (sx + 0.5) / kSub - off_x) / scale + left;
          const double py = (oy + (sy + 0.5) / kSub - off_y) / scale + top;
          const int ix = static_cast<int>(std::floor(px));
          const int iy = static_cast<int>(std::floor(py));
          if (ix < left || ix > right || iy < top || iy > bottom) continue;
          acc += glyph->coverage[static_cast<std::size_t>(iy * glyph->width + ix)];
        }
      }
      const double v = std::clamp(acc / (kSub * kSub), 0.0, 1.0);
      out.at(oy, ox) = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic rasterizer

namespace {

struct Stroke {
  double x0, y0, x1, y1;  // unit-square coordinates
  double width;           // unit-square thickness
};

void draw_stroke(GlyphCoverage& g, const Stroke& s) {
  const double n = g.width;
  const double ax = s.x0 * n, ay = s.y0 * n, bx = s.x1 * n, by = s.y1 * n;
  const double half = s.width * n / 2.0;
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double t = len2 > 0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double ex = px - (ax + t * dx), ey = py - (ay + t * dy);
      const double d = std::sqrt(ex * ex + ey * ey);
      const double c = std::clamp(half + 0.5 - d, 0.0, 1.0);
      auto& cell = g.coverage[static_cast<std::size_t>(y * g.width + x)];
      cell = std::max(cell, c);
    }
  }
}

constexpr double kStrokeW = 0.07;

// Left-column components, x within [0.05, 0.38].
std::vector<Stroke> radical_strokes(int radical) {
  switch (radical % 8) {
    case 0:  // person-like: slanted head + vertical
      return {{0.30, 0.08, 0.10, 0.40, kStrokeW}, {0.20, 0.25, 0.20, 0.95, kStrokeW}};
    case 1:  // water-like: three dots and a rising stroke
      return {{0.10, 0.12, 0.18, 0.20, kStrokeW}, {0.08, 0.40, 0.16, 0.48, kStrokeW},
              {0.08, 0.88, 0.28, 0.62, kStrokeW}};
    case 2:  // mouth-like box
      return {{0.08, 0.35, 0.34, 0.35, kStrokeW}, {0.08, 0.35, 0.08, 0.70, kStrokeW},
              {0.34, 0.35, 0.34, 0.70, kStrokeW}, {0.08, 0.70, 0.34, 0.70, kStrokeW}};
    case 3:  // tree-like cross with legs
      return {{0.05, 0.30, 0.36, 0.30, kStrokeW}, {0.20, 0.05, 0.20, 0.95, kStrokeW},
              {0.20, 0.35, 0.06, 0.65, kStrokeW}, {0.20, 0.35, 0.34, 0.55, kStrokeW}};
    case 4:  // hand-like: two bars and a hooked vertical
      return {{0.05, 0.25, 0.36, 0.25, kStrokeW}, {0.05, 0.55, 0.36, 0.45, kStrokeW},
              {0.22, 0.05, 0.22, 0.90, kStrokeW}, {0.22, 0.90, 0.12, 0.82, kStrokeW}};
    case 5:  // sun-like box with a middle bar
      return {{0.08, 0.15, 0.32, 0.15, kStrokeW}, {0.08, 0.15, 0.08, 0.85, kStrokeW},
              {0.32, 0.15, 0.32, 0.85, kStrokeW}, {0.08, 0.50, 0.32, 0.50, kStrokeW},
              {0.08, 0.85, 0.32, 0.85, kStrokeW}};
    case 6:  // speech-like: stacked short bars
      return {{0.10, 0.10, 0.30, 0.10, kStrokeW}, {0.05, 0.28, 0.36, 0.28, kStrokeW},
              {0.10, 0.46, 0.30, 0.46, kStrokeW}, {0.10, 0.64, 0.30, 0.64, kStrokeW},
              {0.10, 0.82, 0.30, 0.82, kStrokeW}};
    default:  // silk-like zigzag
      return {{0.25, 0.05, 0.08, 0.30, kStrokeW}, {0.08, 0.30, 0.30, 0.50, kStrokeW},
              {0.30, 0.50, 0.08, 0.75, kStrokeW}, {0.06, 0.92, 0.36, 0.92, kStrokeW}};
  }
}

std::vector<Stroke> detail_strokes(std::uint64_t seed) {
  Rng rng(seed);
  const int count = 2 + static_cast<int>(rng.below(3));
  std::vector<Stroke> out;
  for (int i = 0; i < count; ++i) {
    const auto kind = rng.below(3);
    if (kind == 0) {  // horizontal
      const double y = rng.uniform(0.1, 0.9);
      const double x0 = rng.uniform(0.46, 0.65), x1 = rng.uniform(0.75, 0.95);
      out.push_back({x0, y, x1, y, kStrokeW});
    } else if (kind == 1) {  // vertical
      const double x = rng.uniform(0.5, 0.92);
      const double y0 = rng.uniform(0.05, 0.35), y1 = rng.uniform(0.6, 0.95);
      out.push_back({x, y0, x, y1, kStrokeW});
    } else {  // diagonal
      out.push_back({rng.uniform(0.46, 0.7), rng.uniform(0.05, 0.5), rng.uniform(0.7, 0.95),
                     rng.uniform(0.5, 0.95), kStrokeW});
    }
  }
  return out;
}

bool is_blank(char32_t cp) { return cp == U' ' || cp == U'　' || cp == U' '; }

}  // namespace

SyntheticRasterizer::SyntheticRasterizer(int radical_groups, std::uint64_t style_seed)
    : radical_groups_(radical_groups), style_seed_(style_seed) {
  if (radical_groups < 1 || radical_groups > 8) throw usage_error("synthetic rasterizer supports 1..8 radical groups");
}

std::string SyntheticRasterizer::font_name() const {
  return "synthetic-motifs/" + std::to_string(radical_groups_) + "/" + std::to_string(style_seed_);
}

int SyntheticRasterizer::radical_of(char32_t codepoint) const {
  return static_cast<int>(codepoint % static_cast<char32_t>(radical_groups_));
}

std::optional<GlyphCoverage> SyntheticRasterizer::rasterize(char32_t codepoint,
                                                            const RenderParams& params) const {
  if (codepoint < 0x20 || (codepoint >= 0xd800 && codepoint <= 0xdfff) || codepoint > 0x10ffff) {
    return std::nullopt;
  }
  if (params.point_size < 8) throw usage_error("point size too small");
  GlyphCoverage g;
  g.width = g.height = params.point_size;
  g.coverage.assign(static_cast<std::size_t>(g.width * g.height), 0.0);
  if (is_blank(codepoint)) return g;
  for (const auto& s : radical_strokes(radical_of(codepoint))) draw_stroke(g, s);
  for (const auto& s : detail_strokes(mix64(codepoint ^ mix64(style_seed_)))) draw_stroke(g, s);
  // Anchor the frame so the fitted bounding box is the whole em square.
  g.coverage.front() = std::max(g.coverage.front(), 1e-9);
  g.coverage.back() = std::max(g.coverage.back(), 1e-9);
  return g;
}

MotifSet synthetic_motif_set(int groups, int per_group, std::uint64_t seed) {
  if (groups < 1 || groups > 8 || per_group < 1) throw usage_error("bad motif set shape");
  SyntheticRasterizer rasterizer(groups, seed);
  MotifSet set;
  std::vector<int> filled(static_cast<std::size_t>(groups), 0);
  RenderParams params;
  for (char32_t cp = 0x4e00; static_cast<int>(set.bitmaps.size()) < groups * per_group; ++cp) {
    const int g = rasterizer.radical_of(cp);
    if (filled[static_cast<std::size_t>(g)] >= per_group) continue;
    ++filled[static_cast<std::size_t>(g)];
    set.bitmaps.push_back(render_bitmap(cp, rasterizer, params));
    set.group.push_back(g);
  }
  return set;
}

// ---------------------------------------------------------------------------
// Archive

void BitmapArchive::add(const Bitmap& bitmap) {
  if (!entries.emplace(bitmap.codepoint, bitmap).second) {
    throw data_error("duplicate codepoint " + utf8::codepoint_label(bitmap.codepoint));
  }
}

void write_pgm(const std::filesystem::path& path, const Bitmap& bitmap, bool ink_high) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot open '" + path.string() + "' for writing");
  out << "P5\n" << kBitmapSide << ' ' << kBitmapSide << "\n255\n";
  std::array<std::uint8_t, kBitmapPixels> raw;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = ink_high ? bitmap.pixels[i] : static_cast<std::uint8_t>(255 - bitmap.pixels[i]);
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw data_error("write failed for '" + path.string() + "'");
}

namespace {

// Reads the next PGM header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Bitmap read_pgm(const std::filesystem::path& path, bool ink_high) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path.string() + "'");
  if (pgm_token(in) != "P5") throw data_error(path.string() + ": not a binary PGM (P5)");
  const auto w = pgm_token(in), h = pgm_token(in), maxval = pgm_token(in);
  if (w != "60" || h != "60") throw data_error(path.string() + ": expected 60x60, got " + w + "x" + h);
  if (maxval != "255") throw data_error(path.string() + ": expected maxval 255");
  Bitmap b;
  if (!in.read(reinterpret_cast<char*>(b.pixels.data()), kBitmapPixels)) {
    throw data_error(path.string() + ": truncated pixel data");
  }
  if (!ink_high) {
    for (auto& p : b.pixels) p = static_cast<std::uint8_t>(255 - p);
  }
  return b;
}

namespace {

constexpr const char* kInkDark = "ink-dark";
constexpr const char* kInkHigh = "ink-high";

std::string join_missing(const std::set<char32_t>& missing) {
  std::string s;
  for (char32_t cp : missing) {
    if (!s.empty()) s += ',';
    s += utf8::codepoint_label(cp);
  }
  return s;
}

}  // namespace

void save_archive(const BitmapArchive& archive, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream manifest(dir / "manifest.tsv", std::ios::binary);
  if (!manifest) throw data_error("cannot write manifest in '" + dir.string() + "'");
  manifest << "#font=" << archive.font_name << '\n'
           << "#point_size=" << archive.params.point_size << '\n'
           << "#baseline_offset=" << archive.params.baseline_offset << '\n'
           << "#margin=" << archive.params.margin << '\n'
           << "#missing=" << join_missing(archive.missing) << '\n';
  for (const auto& [cp, bitmap] : archive.entries) {
    const auto name = utf8::codepoint_label(cp) + ".pgm";
    write_pgm(dir / name, bitmap, false);
    manifest << utf8::codepoint_label(cp) << '\t' << name << '\t' << kInkDark << '\n';
  }
  if (!manifest) throw data_error("write failed for manifest in '" + dir.string() + "'");
}

BitmapArchive load_archive(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.tsv", std::ios::binary);
  if (!manifest) throw data_error("cannot open manifest in '" + dir.string() + "'");
  BitmapArchive archive;
  std::string line;
  std::size_t entry = 0;
  auto int_value = [&](const std::string& v, const std::string& key) {
    try {
      return std::stoi(v);
    } catch (const std::exception&) {
      throw data_error("manifest: bad value for " + key);
    }
  };
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const auto key = line.substr(1, eq - 1), value = line.substr(eq + 1);
      if (key == "font") archive.font_name = value;
      else if (key == "point_size") archive.params.point_size = int_value(value, key);
      else if (key == "baseline_offset") archive.params.baseline_offset = int_value(value, key);
      else if (key == "margin") archive.params.margin = int_value(value, key);
      else if (key == "missing") {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
          if (!item.empty()) archive.missing.insert(utf8::parse_codepoint(item));
        }
      }
      continue;
    }
    const auto where = "manifest entry " + std::to_string(entry + 1);
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t')) fields.push_back(f);
    if (fields.size() != 3) throw data_error(where + ": expected 3 tab-separated fields");
    char32_t cp;
    try {
      cp = utf8::parse_codepoint(fields[0]);
    } catch (const Error& e) {
      throw data_error(where + ": " + e.what());
    }
    bool ink_high;
    if (fields[2] == kInkDark) ink_high = false;
    else if (fields[2] == kInkHigh) ink_high = true;
    else throw data_error(where + ": unknown polarity '" + fields[2] + "'");
    Bitmap b;
    try {
      b = read_pgm(dir / fields[1], ink_high);
    } catch (const Error& e) {
      throw data_error(where + ": " + e.what());
    }
    b.codepoint = cp;
    if (!archive.entries.emplace(cp, b).second) {
      throw data_error(where + ": duplicate codepoint " + utf8::codepoint_label(cp));
    }
    ++entry;
  }
  return archive;
}

BitmapArchive render_archive(const std::vector<char32_t>& codepoints, const Rasterizer& rasterizer,
                             const RenderParams& params, bool blank_for_missing) {
  BitmapArchive archive;
  archive.font_name = rasterizer.font_name();
  archive.params = params;
  for (char32_t cp : codepoints) {
    if (archive.entries.contains(cp) || archive.missing.contains(cp)) continue;
    if (!rasterizer.rasterize(cp, params)) {
      archive.missing.insert(cp);
      if (blank_for_missing) {
        Bitmap blank;
        blank.codepoint = cp;
        archive.entries.emplace(cp, blank);
      }
      continue;
    }
    archive.entries.emplace(cp, render_bitmap(cp, rasterizer, params));
  }
  return archive;
}

}  // namespace gwe
