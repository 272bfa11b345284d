#include "pmiris/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "pmiris/io.hpp"
#include "pmiris/raster_ops.hpp"

namespace pmiris {
namespace {

struct Candidate {
  double score = -std::numeric_limits<double>::infinity();
  double contrast = 0.0;
  Circle circle;
  bool valid = false;
};

enum class EdgeKind { pupil, iris };

struct SearchStage {
  double center_x0, center_x1, center_y0, center_y1, center_step;
  double radius0, radius1, radius_step;
  int ring;  ///< number of radius samples on each side of the boundary
  int angles;
};

/// Contour means of `smooth` around (cx, cy) for radii r0, r0 + dr, ... (count samples).
/// Angles are restricted to lateral sectors for the iris to avoid eyelids.
std::vector<double> contour_profile(const Raster<double>& smooth, double cx, double cy,
                                    double r0, double dr, int count, int angles,
                                    EdgeKind kind) {
  std::vector<double> sum(count, 0.0);
  std::vector<int> hits(count, 0);
  const double w1 = smooth.width() - 1;
  const double h1 = smooth.height() - 1;
  for (int a = 0; a < angles; ++a) {
    double theta;
    if (kind == EdgeKind::pupil) {
      theta = 2.0 * std::numbers::pi * a / angles;
    } else {
      // Two lateral sectors of +-45 degrees around 0 and 180.
      const int half = angles / 2;
      const double local = (a % half + 0.5) / half;  // (0,1)
      theta = (local - 0.5) * std::numbers::pi / 2.0 + (a < half ? 0.0 : std::numbers::pi);
    }
    const double ux = std::cos(theta);
    const double uy = -std::sin(theta);
    for (int s = 0; s < count; ++s) {
      const double r = r0 + dr * s;
      const double x = cx + r * ux;
      const double y = cy + r * uy;
      if (x < 0.0 || y < 0.0 || x > w1 || y > h1) continue;
      sum[s] += bilinear_at(smooth, x, y);
      ++hits[s];
    }
  }
  std::vector<double> mean(count, std::numeric_limits<double>::quiet_NaN());
  for (int s = 0; s < count; ++s)
    if (hits[s] * 2 >= angles) mean[s] = sum[s] / hits[s];
  return mean;
}

/// Best radius for a fixed center; scans radii in ascending order so ties keep the smallest.
Candidate best_radius(const Raster<double>& smooth, double cx, double cy,
                      const SearchStage& st, EdgeKind kind, double min_contrast) {
  const int nr = static_cast<int>(std::floor((st.radius1 - st.radius0) / st.radius_step + 1e-9)) + 1;
  const double r0 = st.radius0 - st.ring * st.radius_step;
  const int count = nr + 2 * st.ring;
  const auto prof = contour_profile(smooth, cx, cy, r0, st.radius_step, count, st.angles, kind);
  Candidate best;
  for (int i = 0; i < nr; ++i) {
    const int s = i + st.ring;
    double inner = 0.0, outer = 0.0;
    bool ok = true;
    for (int k = 1; k <= st.ring; ++k) {
      const double a = prof[s - k];
      const double b = prof[s + k];
      if (std::isnan(a) || std::isnan(b)) {
        ok = false;
        break;
      }
      inner += a;
      outer += b;
    }
    if (!ok) continue;
    inner /= st.ring;
    outer /= st.ring;
    const double contrast = outer - inner;
    if (contrast < min_contrast) continue;
    const double score = kind == EdgeKind::pupil ? contrast / (inner + 16.0) : contrast;
    if (score > best.score) {
      best.score = score;
      best.contrast = contrast;
      best.circle = {cx, cy, st.radius0 + i * st.radius_step};
      best.valid = true;
    }
  }
  return best;
}

/// Exhaustive search over a center grid. Parallel over centers; the reduction runs in
/// (cy, cx) order so the result does not depend on the thread count.
Candidate search(const Raster<double>& smooth, const SearchStage& st, EdgeKind kind,
                 double min_contrast, const Raster<std::uint8_t>* allowed_centers) {
  std::vector<std::pair<double, double>> centers;
  for (double cy = st.center_y0; cy <= st.center_y1 + 1e-9; cy += st.center_step) {
    for (double cx = st.center_x0; cx <= st.center_x1 + 1e-9; cx += st.center_step) {
      if (allowed_centers) {
        const int ix = static_cast<int>(std::lround(cx));
        const int iy = static_cast<int>(std::lround(cy));
        if (!allowed_centers->contains(ix, iy) || !(*allowed_centers)(ix, iy)) continue;
      }
      centers.emplace_back(cx, cy);
    }
  }
  std::vector<Candidate> per_center(centers.size());
  const long n = static_cast<long>(centers.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < n; ++i)
    per_center[i] = best_radius(smooth, centers[i].first, centers[i].second, st, kind, min_contrast);

  Candidate best;
  for (const auto& c : per_center)
    if (c.valid && c.score > best.score) best = c;
  return best;
}

double percentile_of(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * (values.size() - 1));
  std::nth_element(values.begin(), values.begin() + k, values.end());
  return values[k];
}

}  // namespace

bool in_annulus(const Circle& pupil, const Circle& iris, double x, double y) noexcept {
  const double dp = std::hypot(x - pupil.center_x, y - pupil.center_y);
  const double di = std::hypot(x - iris.center_x, y - iris.center_y);
  return dp > pupil.radius && di < iris.radius;
}

BinaryMask annulus_mask(int width, int height, const Circle& pupil, const Circle& iris) {
  BinaryMask mask(width, height, 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) mask(x, y) = in_annulus(pupil, iris, x, y) ? 1 : 0;
  return mask;
}

SegmentationResult segment(const GrayImage& image, const SegmentationOptions& opt) {
  const int w = image.width();
  const int h = image.height();
  if (std::min(w, h) < 64) throw InvalidInput("segment: minimum image dimension is 64");

  const auto smooth = gaussian_blur(to_double(image), 1.5);
  const double min_dim = std::min(w, h);

  // Pupil: centers restricted to the darkest 30% of the smoothed image.
  const double dark = percentile_of(smooth.data(), 0.30);
  Raster<std::uint8_t> dark_centers(w, h, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) dark_centers(x, y) = smooth(x, y) <= dark ? 1 : 0;

  const double rp_min = opt.pupil_radius_min_frac * min_dim;
  const double rp_max = opt.pupil_radius_max_frac * min_dim;
  const double margin = 0.1 * min_dim;
  SearchStage coarse{margin, w - 1 - margin, margin, h - 1 - margin, 4.0,
                     std::ceil(rp_min), std::floor(rp_max), 1.0, 4, 64};
  auto pupil = search(smooth, coarse, EdgeKind::pupil, opt.min_edge_contrast, &dark_centers);
  if (!pupil.valid) throw SegmentationFailure("segment: no pupil boundary found");

  auto refine = [&](const Candidate& c, double cwin, double cstep, double rwin, double rstep,
                    int ring, int angles, EdgeKind kind, double rlo, double rhi) {
    SearchStage st{c.circle.center_x - cwin, c.circle.center_x + cwin,
                   c.circle.center_y - cwin, c.circle.center_y + cwin, cstep,
                   std::max(rlo, c.circle.radius - rwin), std::min(rhi, c.circle.radius + rwin),
                   rstep, ring, angles};
    auto r = search(smooth, st, kind, opt.min_edge_contrast, nullptr);
    return r.valid ? r : c;
  };
  pupil = refine(pupil, 4.0, 1.0, 4.0, 0.5, 2, 128, EdgeKind::pupil, rp_min, rp_max);
  pupil = refine(pupil, 1.0, 0.5, 1.0, 0.25, 2, 256, EdgeKind::pupil, rp_min, rp_max);

  // Iris: concentric-biased window around the pupil center.
  const auto& pc = pupil.circle;
  const double ri_min = std::ceil(opt.iris_to_pupil_min * pc.radius);
  const double ri_max = std::floor(std::min(opt.iris_to_pupil_max * pc.radius,
                                            1.5 * std::max(w, h)));
  const double win = std::max(6.0, 0.35 * pc.radius);
  SearchStage iris_coarse{pc.center_x - win, pc.center_x + win, pc.center_y - win,
                          pc.center_y + win, 2.0, ri_min, ri_max, 1.0, 4, 64};
  auto iris = search(smooth, iris_coarse, EdgeKind::iris, opt.min_edge_contrast, nullptr);
  if (!iris.valid) throw SegmentationFailure("segment: no iris boundary found");
  iris = refine(iris, 2.0, 0.5, 3.0, 0.5, 2, 128, EdgeKind::iris, ri_min, ri_max);

  SegmentationResult result;
  result.pupil = pupil.circle;
  result.iris = iris.circle;
  if (std::hypot(result.pupil.center_x - result.iris.center_x,
                 result.pupil.center_y - result.iris.center_y) >= result.iris.radius ||
      result.pupil.radius >= result.iris.radius)
    throw SegmentationFailure("segment: implausible circle pair");

  // Occlusions: bright outliers inside the annulus.
  auto mask = annulus_mask(w, h, result.pupil, result.iris);
  std::vector<double> values;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(x, y)) values.push_back(image(x, y));
  if (values.empty()) throw SegmentationFailure("segment: empty annulus");
  const double med = median_of(values);
  std::vector<double> dev(values.size());
  std::transform(values.begin(), values.end(), dev.begin(),
                 [med](double v) { return std::abs(v - med); });
  const double robust_sd = std::max(1.4826 * median_of(dev), 2.0);
  const double limit = med + opt.occlusion_k * robust_sd;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(x, y) && image(x, y) > limit) mask(x, y) = 0;

  result.occlusion_mask = std::move(mask);
  result.status = SegmentationStatus::detected;
  return result;
}

void validate_segmentation(const SegmentationResult& seg, const GrayImage& image) {
  if (!seg.occlusion_mask.same_shape(image))
    throw DimensionMismatch("segmentation mask is " + std::to_string(seg.occlusion_mask.width()) +
                            "x" + std::to_string(seg.occlusion_mask.height()) +
                            ", image is " + std::to_string(image.width()) + "x" +
                            std::to_string(image.height()));
  for (const auto* c : {&seg.pupil, &seg.iris}) {
    if (!(c->radius > 0.0) || !std::isfinite(c->center_x) || !std::isfinite(c->center_y))
      throw InvariantViolation("circle radius must be positive and center finite");
    if (c->center_x < -c->radius || c->center_y < -c->radius ||
        c->center_x > image.width() - 1 + c->radius || c->center_y > image.height() - 1 + c->radius)
      throw InvariantViolation("circle center outside image bounds extended by one radius");
  }
  if (seg.pupil.radius >= seg.iris.radius)
    throw InvariantViolation("pupil radius must be smaller than iris radius");
  if (std::hypot(seg.pupil.center_x - seg.iris.center_x,
                 seg.pupil.center_y - seg.iris.center_y) >= seg.iris.radius)
    throw InvariantViolation("pupil center must lie inside the iris circle");
}

SegmentationResult ingest_segmentation(const GrayImage& image, const std::filesystem::path& path) {
  const auto lines = io::split_lines(io::read_file(path));
  std::optional<Circle> pupil, iris;
  std::optional<std::filesystem::path> mask_path;
  long row = 0;
  for (const auto& raw : lines) {
    ++row;
    const auto line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "pupil" || key == "iris") {
      std::string a, b, c, extra;
      ss >> a >> b >> c;
      if (c.empty() || (ss >> extra))
        throw ParseError("sidecar line " + std::to_string(row) + ": expected '" + key + " cx cy r'", row);
      Circle circle;
      try {
        circle = {io::parse_double(a), io::parse_double(b), io::parse_double(c)};
      } catch (const InvalidInput& e) {
        throw ParseError("sidecar line " + std::to_string(row) + ": " + e.what(), row);
      }
      (key == "pupil" ? pupil : iris) = circle;
    } else if (key == "mask") {
      std::string rest;
      std::getline(ss, rest);
      rest = io::trim(rest);
      if (rest.empty()) throw ParseError("sidecar line " + std::to_string(row) + ": empty mask path", row);
      mask_path = std::filesystem::path(rest);
    } else {
      throw ParseError("sidecar line " + std::to_string(row) + ": unknown key '" + key + "'", row);
    }
  }
  if (!pupil || !iris || !mask_path)
    throw ParseError("sidecar " + path.string() + ": requires pupil, iris and mask lines");
  auto mp = *mask_path;
  if (mp.is_relative()) mp = path.parent_path() / mp;

  SegmentationResult seg;
  seg.pupil = *pupil;
  seg.iris = *iris;
  seg.occlusion_mask = read_mask_pgm(mp);
  seg.status = SegmentationStatus::ingested;
  validate_segmentation(seg, image);
  return seg;
}

void write_segmentation(const std::filesystem::path& sidecar_path,
                        const std::filesystem::path& mask_path, const SegmentationResult& seg) {
  write_mask_pgm(mask_path, seg.occlusion_mask);
  auto ref = mask_path;
  if (mask_path.parent_path() == sidecar_path.parent_path()) ref = mask_path.filename();
  auto circle = [](const char* key, const Circle& c) {
    return std::string(key) + ' ' + io::format_double(c.center_x) + ' ' +
           io::format_double(c.center_y) + ' ' + io::format_double(c.radius) + '\n';
  };
  io::write_file_atomic(sidecar_path,
                        circle("pupil", seg.pupil) + circle("iris", seg.iris) + "mask " +
                            ref.string() + '\n');
}

}  // namespace pmiris
