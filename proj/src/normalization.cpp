#include "pmiris/normalization.hpp"

#include <cmath>
#include <numbers>
#include <tuple>
#include <utility>

#include "json.hpp"
#include "pmiris/io.hpp"
#include "pmiris/raster_ops.hpp"

namespace pmiris {
namespace {

double angle_of(int col, int cols) noexcept { return 2.0 * std::numbers::pi * col / cols; }

std::filesystem::path with_suffix(const std::filesystem::path& stem, const char* suffix) {
  auto p = stem;
  p += suffix;
  return p;
}

/// cos/sin of the column angle, exact at the four axis directions.
std::pair<double, double> column_cos_sin(int col, int cols) noexcept {
  if (col == 0) return {1.0, 0.0};
  if (4 * col == cols) return {0.0, 1.0};
  if (2 * col == cols) return {-1.0, 0.0};
  if (4 * col == 3 * cols) return {0.0, -1.0};
  const double t = angle_of(col, cols);
  return {std::cos(t), std::sin(t)};
}

}  // namespace

double column_angle(int col, int cols) noexcept {
  return angle_of(col, cols);
}

NormalizedIris normalize(const GrayImage& image, const SegmentationResult& seg, int rows,
                         int cols) {
  if (rows < 8 || cols < 64) throw InvalidInput("normalize: need rows >= 8 and cols >= 64");
  validate_segmentation(seg, image);

  const auto& p = seg.pupil;
  const auto& ir = seg.iris;
  std::vector<double> cos_t(cols), sin_t(cols);
  for (int j = 0; j < cols; ++j) {
    std::tie(cos_t[j], sin_t[j]) = column_cos_sin(j, cols);
    const double px = p.center_x + p.radius * cos_t[j];
    const double py = p.center_y - p.radius * sin_t[j];
    const double ix = ir.center_x + ir.radius * cos_t[j];
    const double iy = ir.center_y - ir.radius * sin_t[j];
    // Boundaries must be ordered along the ray and at least 2 px apart.
    const double along = (ix - px) * cos_t[j] - (iy - py) * sin_t[j];
    if (along < 2.0)
      throw DegenerateGeometry("normalize: annulus narrower than 2 px at column " +
                               std::to_string(j));
  }

  NormalizedIris out;
  out.texture = Raster<double>(cols, rows, 0.0);
  out.validity_mask = BinaryMask(cols, rows, 0);
  out.pupil = p;
  out.iris = ir;
  const int w = image.width();
  const int h = image.height();
  const auto& mask = seg.occlusion_mask;

#pragma omp parallel for schedule(static)
  for (int i = 0; i < rows; ++i) {
    const double t = (i + 0.5) / rows;
    for (int j = 0; j < cols; ++j) {
      const double px = p.center_x + p.radius * cos_t[j];
      const double py = p.center_y - p.radius * sin_t[j];
      const double ix = ir.center_x + ir.radius * cos_t[j];
      const double iy = ir.center_y - ir.radius * sin_t[j];
      const double x = px + t * (ix - px);
      const double y = py + t * (iy - py);
      const int x0 = static_cast<int>(std::floor(x));
      const int y0 = static_cast<int>(std::floor(y));
      const bool inside = x0 >= 0 && y0 >= 0 && x0 + 1 < w && y0 + 1 < h;
      if (!inside) {
        // Out-of-image samples keep texture 0 and are invalid.
        continue;
      }
      const double fx = x - x0;
      const double fy = y - y0;
      const double v = (1 - fy) * ((1 - fx) * image(x0, y0) + fx * image(x0 + 1, y0)) +
                       fy * ((1 - fx) * image(x0, y0 + 1) + fx * image(x0 + 1, y0 + 1));
      out.texture(j, i) = v;
      out.validity_mask(j, i) = (mask(x0, y0) && mask(x0 + 1, y0) && mask(x0, y0 + 1) &&
                                 mask(x0 + 1, y0 + 1))
                                    ? 1
                                    : 0;
    }
  }
  return out;
}

void save_normalized(const std::filesystem::path& stem, const NormalizedIris& norm) {
  GrayImage tex(norm.cols(), norm.rows());
  for (std::size_t k = 0; k < tex.size(); ++k)
    tex.data()[k] =
        static_cast<std::uint8_t>(std::clamp(std::lround(norm.texture.data()[k]), 0L, 255L));
  write_pgm(with_suffix(stem, ".tex.pgm"), tex);
  write_mask_pgm(with_suffix(stem, ".mask.pgm"), norm.validity_mask);
  nlohmann::ordered_json j;
  auto circle = [](const Circle& c) {
    return nlohmann::ordered_json{{"cx", c.center_x}, {"cy", c.center_y}, {"r", c.radius}};
  };
  j["rows"] = norm.rows();
  j["cols"] = norm.cols();
  j["pupil"] = circle(norm.pupil);
  j["iris"] = circle(norm.iris);
  io::write_file_atomic(with_suffix(stem, ".geom.json"), j.dump(2) + "\n");
}

NormalizedIris load_normalized(const std::filesystem::path& stem) {
  const auto tex = read_pgm(with_suffix(stem, ".tex.pgm"));
  NormalizedIris n;
  n.texture = to_double(tex);
  n.validity_mask = read_mask_pgm(with_suffix(stem, ".mask.pgm"));
  if (!n.validity_mask.same_shape(n.texture))
    throw DimensionMismatch("normalized texture and mask differ in shape: " + stem.string());
  const auto geom_path = with_suffix(stem, ".geom.json");
  if (std::filesystem::exists(geom_path)) {
    try {
      const auto j = nlohmann::json::parse(io::read_file(geom_path));
      auto circle = [](const nlohmann::json& c) {
        return Circle{c.at("cx").get<double>(), c.at("cy").get<double>(), c.at("r").get<double>()};
      };
      n.pupil = circle(j.at("pupil"));
      n.iris = circle(j.at("iris"));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("bad geometry sidecar " + geom_path.string() + ": " + e.what());
    }
  }
  return n;
}

}  // namespace pmiris
