#pragma once

#include <filesystem>

#include "pmiris/image.hpp"
#include "pmiris/segmentation.hpp"

namespace pmiris {

/// Rubber-sheet iris: rows run from the pupil boundary (row 0) to the limbus,
/// columns sweep angle 2*pi*j/cols counter-clockwise from +x (image y points down).
struct NormalizedIris {
  Raster<double> texture;      ///< width = cols, height = rows, values in [0, 255]
  BinaryMask validity_mask;    ///< same shape as texture
  Circle pupil;
  Circle iris;

  int rows() const { return texture.height(); }
  int cols() const { return texture.width(); }
};

inline constexpr int kDefaultNormRows = 64;
inline constexpr int kDefaultNormCols = 512;

/// Angle of column `col`, in radians.
double column_angle(int col, int cols) noexcept;

NormalizedIris normalize(const GrayImage& image, const SegmentationResult& seg,
                         int rows = kDefaultNormRows, int cols = kDefaultNormCols);

/// Writes `<stem>.tex.pgm`, `<stem>.mask.pgm` and `<stem>.geom.json`.
void save_normalized(const std::filesystem::path& stem, const NormalizedIris& norm);
/// Reads the files written by save_normalized; the texture comes back quantized to 8 bits.
NormalizedIris load_normalized(const std::filesystem::path& stem);

}  // namespace pmiris
