#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gwe/convae.hpp"
#include "gwe/corpus.hpp"
#include "gwe/matrix.hpp"

namespace gwe {

/// Frozen per-character glyph features indexed by char id. Trainers only ever
/// read from it.
class GlyphTable {
 public:
  GlyphTable() = default;
  explicit GlyphTable(Matrix values) : values_(std::move(values)) {}

  /// Looks up every vocabulary character; a missing feature is an error. When
  /// `dims` differs from the feature length, a fixed Gaussian projection
  /// (seeded by `projection_seed`, scaled by 1/sqrt(feature length)) maps the
  /// features to `dims`. Rows are then scaled by one common factor so the
  /// mean row norm is 1 (raw autoencoder codes can be in the hundreds).
  static GlyphTable from_features(const std::vector<convae::GlyphFeature>& features, const Vocabulary& vocab,
                                  std::size_t dims, std::uint64_t projection_seed = 0);

  std::size_t dims() const noexcept { return values_.cols(); }
  std::size_t size() const noexcept { return values_.rows(); }
  std::span<const double> row(CharId id) const { return values_.row(static_cast<std::size_t>(id)); }
  const Matrix& values() const noexcept { return values_; }
  std::size_t checksum() const { return gwe::checksum(values_.values()); }

 private:
  Matrix values_;
};

}  // namespace gwe
