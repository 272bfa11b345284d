#include "pmiris/quality.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "pmiris/error.hpp"
#include "pmiris/io.hpp"
#include "pmiris/raster_ops.hpp"

namespace pmiris {
namespace {

constexpr std::array<std::string_view, kQualityMetricCount> kNames = {
    "USABLE_IRIS_AREA",       "IRIS_SCLERA_CONTRAST",       "IRIS_PUPIL_CONTRAST",
    "PUPIL_BOUNDARY_CIRCULARITY", "GREY_SCALE_UTILIZATION", "IRIS_RADIUS",
    "PUPIL_IRIS_RATIO",       "IRIS_PUPIL_CONCENTRICITY",   "MARGIN_ADEQUACY",
    "SHARPNESS",              "MOTION_BLUR",                "OVERALL_QUALITY"};

constexpr std::array<QualityMetric, 8> kUnitMetrics = {
    QualityMetric::usable_iris_area,     QualityMetric::iris_sclera_contrast,
    QualityMetric::iris_pupil_contrast,  QualityMetric::pupil_boundary_circularity,
    QualityMetric::pupil_iris_ratio,     QualityMetric::iris_pupil_concentricity,
    QualityMetric::margin_adequacy,      QualityMetric::sharpness};

double clamp100(double v) { return std::clamp(v, 0.0, 100.0); }

/// Bounding box of a circle scaled by `scale`, clipped to the image.
struct Box {
  int x0, y0, x1, y1;
};
Box circle_box(const GrayImage& img, const Circle& c, double scale) {
  const double r = c.radius * scale + 1.0;
  return {std::max(0, static_cast<int>(std::floor(c.center_x - r))),
          std::max(0, static_cast<int>(std::floor(c.center_y - r))),
          std::min(img.width() - 1, static_cast<int>(std::ceil(c.center_x + r))),
          std::min(img.height() - 1, static_cast<int>(std::ceil(c.center_y + r)))};
}

/// 100 * (hi - lo) / (hi + lo) clamped; nullopt when the denominator vanishes.
std::optional<double> michelson(double hi, double lo) {
  if (hi + lo <= 0.0) return std::nullopt;
  return clamp100(100.0 * (hi - lo) / (hi + lo));
}

// Classic integer 5x5 Laplacian-of-Gaussian approximation (sigma ~ 1.4), zero-sum.
constexpr std::array<double, 25> kLogKernel = {
    0,  0,  -1, 0,  0,   //
    0,  -1, -2, -1, 0,   //
    -1, -2, 16, -2, -1,  //
    0,  -1, -2, -1, 0,   //
    0,  0,  -1, 0,  0};

}  // namespace

std::string_view metric_name(QualityMetric m) { return kNames[static_cast<std::size_t>(m)]; }

std::optional<QualityMetric> parse_metric_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<QualityMetric>(i);
  return std::nullopt;
}

bool is_percent_metric(QualityMetric m) {
  return m != QualityMetric::grey_scale_utilization && m != QualityMetric::iris_radius &&
         m != QualityMetric::motion_blur;
}

void QualityRecord::set(QualityMetric m, std::optional<double> v) {
  const auto i = static_cast<std::size_t>(m);
  computed[i] = v.has_value() && std::isfinite(*v);
  values[i] = computed[i] ? *v : kQualitySentinel;
}

const std::array<double, 25>& sharpness_kernel() {
  return kLogKernel;
}

double entropy_bits(std::span<const double> histogram) {
  if (histogram.size() != 256) throw InvalidInput("entropy_bits: histogram must have 256 bins");
  double total = 0.0;
  for (double c : histogram) {
    if (c < 0.0 || !std::isfinite(c)) throw InvalidInput("entropy_bits: negative count");
    total += c;
  }
  if (total <= 0.0) throw InvalidInput("entropy_bits: empty histogram");
  double h = 0.0;
  for (double c : histogram) {
    if (c <= 0.0) continue;
    const double p = c / total;
    h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

namespace metrics {

std::optional<double> usable_iris_area(const SegmentationResult& seg) {
  const auto& m = seg.occlusion_mask;
  long total = 0, usable = 0;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (in_annulus(seg.pupil, seg.iris, x, y)) {
        ++total;
        if (m(x, y)) ++usable;
      }
  if (total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(usable) / static_cast<double>(total);
}

std::optional<double> iris_sclera_contrast(const GrayImage& image, const SegmentationResult& seg,
                                           int min_pixels) {
  const auto& ir = seg.iris;
  std::vector<double> iris_band, sclera_band;
  const auto box = circle_box(image, ir, 1.3);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) {
      const double d = std::hypot(x - ir.center_x, y - ir.center_y);
      if (d >= 0.9 * ir.radius && d <= ir.radius && seg.occlusion_mask(x, y) &&
          in_annulus(seg.pupil, ir, x, y))
        iris_band.push_back(image(x, y));
      else if (d >= 1.1 * ir.radius && d <= 1.3 * ir.radius)
        sclera_band.push_back(image(x, y));
    }
  if (std::ssize(iris_band) < min_pixels || std::ssize(sclera_band) < min_pixels)
    return std::nullopt;
  return michelson(median_of(std::move(sclera_band)), median_of(std::move(iris_band)));
}

std::optional<double> iris_pupil_contrast(const GrayImage& image, const SegmentationResult& seg,
                                          int min_pixels) {
  const auto& p = seg.pupil;
  std::vector<double> pupil_px, iris_band;
  const auto box = circle_box(image, p, 1.1);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) {
      const double d = std::hypot(x - p.center_x, y - p.center_y);
      if (d < p.radius)
        pupil_px.push_back(image(x, y));
      else if (d <= 1.1 * p.radius && seg.occlusion_mask(x, y) && in_annulus(p, seg.iris, x, y))
        iris_band.push_back(image(x, y));
    }
  if (std::ssize(pupil_px) < min_pixels || std::ssize(iris_band) < min_pixels) return std::nullopt;
  return michelson(median_of(std::move(iris_band)), median_of(std::move(pupil_px)));
}

std::optional<double> circularity_from_radii(std::span<const double> radii, int harmonics) {
  const auto n = radii.size();
  if (n < static_cast<std::size_t>(2 * harmonics + 1)) return std::nullopt;
  auto coefficient = [&](int m) {
    std::complex<double> c{0.0, 0.0};
    for (std::size_t k = 0; k < n; ++k) {
      const double t = -2.0 * std::numbers::pi * m * static_cast<double>(k) / static_cast<double>(n);
      c += radii[k] * std::complex<double>(std::cos(t), std::sin(t));
    }
    return c;
  };
  const double c0 = std::norm(coefficient(0));
  if (c0 <= 0.0) return std::nullopt;
  double harmonic_energy = 0.0;
  for (int m = 1; m <= harmonics; ++m) harmonic_energy += std::norm(coefficient(m));
  return 100.0 * std::max(0.0, 1.0 - harmonic_energy / c0);
}

std::optional<double> pupil_boundary_circularity(const GrayImage& image,
                                                 const SegmentationResult& seg, int angles,
                                                 int harmonics, std::vector<double>* radii_out) {
  const auto& p = seg.pupil;
  const auto& ir = seg.iris;
  // Only the neighbourhood of the pupil is needed; blur a padded crop.
  const auto smooth = gaussian_blur(to_double(image), 1.0);
  const double w1 = image.width() - 1, h1 = image.height() - 1;
  const double step = 0.25;
  std::vector<double> radii(angles, std::numeric_limits<double>::quiet_NaN());
  int found = 0;
  for (int a = 0; a < angles; ++a) {
    const double t = 2.0 * std::numbers::pi * a / angles;
    const double ux = std::cos(t), uy = -std::sin(t);
    // Limbus distance along this ray from the pupil centre.
    const double ox = p.center_x - ir.center_x, oy = p.center_y - ir.center_y;
    const double b = ox * ux + oy * uy;
    const double disc = b * b - (ox * ox + oy * oy) + ir.radius * ir.radius;
    const double limbus = disc > 0.0 ? -b + std::sqrt(disc) : ir.radius;
    const double r_lo = std::max(1.0, 0.5 * p.radius);
    const double r_hi = std::min(1.5 * p.radius, 0.5 * (p.radius + limbus));
    double best = 5.0;  // minimum edge strength in grey levels
    double best_r = std::numeric_limits<double>::quiet_NaN();
    for (double r = r_lo; r <= r_hi; r += step) {
      const double xa = p.center_x + (r - 1.0) * ux, ya = p.center_y + (r - 1.0) * uy;
      const double xb = p.center_x + (r + 1.0) * ux, yb = p.center_y + (r + 1.0) * uy;
      if (xa < 0 || ya < 0 || xb < 0 || yb < 0 || xa > w1 || xb > w1 || ya > h1 || yb > h1)
        continue;
      const double d = bilinear_at(smooth, xb, yb) - bilinear_at(smooth, xa, ya);
      if (d > best) {
        best = d;
        best_r = r;
      }
    }
    if (!std::isnan(best_r)) {
      radii[a] = best_r;
      ++found;
    }
  }
  if (found * 4 < angles * 3) return std::nullopt;
  std::vector<double> valid;
  for (double r : radii)
    if (!std::isnan(r)) valid.push_back(r);
  const double fill = median_of(valid);
  for (auto& r : radii)
    if (std::isnan(r)) r = fill;
  if (radii_out) *radii_out = radii;
  return circularity_from_radii(radii, harmonics);
}

double grey_scale_utilization(const GrayImage& image) {
  std::array<double, 256> hist{};
  for (auto v : image.data()) hist[v] += 1.0;
  if (image.empty()) return 0.0;
  return entropy_bits(hist);
}

double pupil_iris_ratio(const SegmentationResult& seg) {
  return clamp100(100.0 * seg.pupil.radius / seg.iris.radius);
}

double iris_pupil_concentricity(const SegmentationResult& seg) {
  const double d = std::hypot(seg.pupil.center_x - seg.iris.center_x,
                              seg.pupil.center_y - seg.iris.center_y);
  return clamp100(100.0 * (1.0 - d / seg.iris.radius));
}

double margin_adequacy(const GrayImage& image, const SegmentationResult& seg) {
  const auto& c = seg.iris;
  const double left = c.center_x - c.radius;
  const double right = (image.width() - 1) - (c.center_x + c.radius);
  const double top = c.center_y - c.radius;
  const double bottom = (image.height() - 1) - (c.center_y + c.radius);
  const double nearest = std::min({left, right, top, bottom});
  return 100.0 * std::clamp(nearest / (0.6 * c.radius), 0.0, 1.0);
}

std::optional<double> sharpness_energy(const GrayImage& image, const SegmentationResult& seg,
                                       int min_pixels) {
  const auto& k = sharpness_kernel();
  const int w = image.width(), h = image.height();
  double sum = 0.0;
  long n = 0;
  const auto box = circle_box(image, seg.iris, 1.0);
  for (int y = box.y0; y <= box.y1; ++y)
    for (int x = box.x0; x <= box.x1; ++x) {
      // The whole 5x5 footprint must be usable iris texture, so boundary edges and
      // occlusion borders do not register as sharpness.
      bool usable = true;
      for (int j = -2; j <= 2 && usable; ++j)
        for (int i = -2; i <= 2 && usable; ++i) {
          const int xx = x + i, yy = y + j;
          usable = xx >= 0 && yy >= 0 && xx < w && yy < h && seg.occlusion_mask(xx, yy) &&
                   in_annulus(seg.pupil, seg.iris, xx, yy);
        }
      if (!usable) continue;
      double r = 0.0;
      for (int j = -2; j <= 2; ++j)
        for (int i = -2; i <= 2; ++i)
          r += k[(j + 2) * 5 + (i + 2)] *
               image(std::clamp(x + i, 0, w - 1), std::clamp(y + j, 0, h - 1));
      sum += r * r;
      ++n;
    }
  if (n < min_pixels) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::optional<double> sharpness(const GrayImage& image, const SegmentationResult& seg,
                                double half_power, int min_pixels) {
  const auto f = sharpness_energy(image, seg, min_pixels);
  if (!f) return std::nullopt;
  return clamp100(100.0 * *f / (*f + half_power));
}

std::optional<double> motion_blur(const GrayImage& image, int radius) {
  if (image.width() < 2 * radius + 3 || image.height() < 2 * radius + 3) return std::nullopt;
  const auto window = gradient_autocorrelation(image, radius);
  return lobe_axis_ratio(window, radius);
}

std::optional<double> overall_quality(const QualityRecord& partial) {
  double log_sum = 0.0;
  int n = 0;
  bool zero = false;
  for (auto m : kUnitMetrics) {
    if (!partial.is_computed(m)) continue;
    const double u = partial.value(m) / 100.0;
    ++n;
    if (u <= 0.0)
      zero = true;
    else
      log_sum += std::log(u);
  }
  if (n < 4) return std::nullopt;
  if (zero) return 0.0;
  return clamp100(100.0 * std::exp(log_sum / n));
}

}  // namespace metrics

std::vector<double> gradient_autocorrelation(const GrayImage& image, int radius) {
  const int w = image.width(), h = image.height();
  // Central differences on interior pixels; border gradients are zero and excluded.
  Raster<double> gx(w, h, 0.0), gy(w, h, 0.0);
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      gx(x, y) = 0.5 * (image(x + 1, y) - image(x - 1, y));
      gy(x, y) = 0.5 * (image(x, y + 1) - image(x, y - 1));
    }
  const int side = 2 * radius + 1;
  std::vector<double> window(static_cast<std::size_t>(side) * side, 0.0);
  // A(-d) = A(d): evaluate the half-plane dy > 0 or (dy == 0, dx >= 0) and mirror.
  const int shifts = side * side;
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < shifts; ++s) {
    const int dx = s % side - radius;
    const int dy = s / side - radius;
    if (dy < 0 || (dy == 0 && dx < 0)) continue;
    const int x0 = 1 + std::max(0, -dx), x1 = w - 1 - std::max(0, dx);
    const int y0 = 1, y1 = h - 1 - dy;
    double acc = 0.0;
    long n = 0;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x) {
        acc += gx(x, y) * gx(x + dx, y + dy) + gy(x, y) * gy(x + dx, y + dy);
        ++n;
      }
    const double v = n > 0 ? acc / n : 0.0;
    window[s] = v;
    window[(radius - dy) * side + (radius - dx)] = v;
  }
  return window;
}

std::optional<double> lobe_axis_ratio(std::span<const double> window, int radius) {
  const int side = 2 * radius + 1;
  const double peak = window[radius * side + radius];
  if (!(peak > 0.0)) return std::nullopt;
  const double half = 0.5 * peak;
  std::vector<std::uint8_t> seen(window.size(), 0);
  std::vector<int> stack{radius * side + radius};
  seen[stack.back()] = 1;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  long n = 0;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    const double x = s % side - radius, y = s / side - radius;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
    ++n;
    const int cx = s % side, cy = s / side;
    const int nbr[4][2] = {{cx + 1, cy}, {cx - 1, cy}, {cx, cy + 1}, {cx, cy - 1}};
    for (auto [nx, ny] : nbr) {
      if (nx < 0 || ny < 0 || nx >= side || ny >= side) continue;
      const int t = ny * side + nx;
      if (!seen[t] && window[t] >= half) {
        seen[t] = 1;
        stack.push_back(t);
      }
    }
  }
  // Region second moments; each cell contributes its own unit-square spread (1/12).
  const double mx = sx / n, my = sy / n;
  const double cxx = sxx / n - mx * mx + 1.0 / 12.0;
  const double cyy = syy / n - my * my + 1.0 / 12.0;
  const double cxy = sxy / n - mx * my;
  const double tr = cxx + cyy;
  const double det_term = std::sqrt(std::max(0.0, 0.25 * (cxx - cyy) * (cxx - cyy) + cxy * cxy));
  const double lmax = 0.5 * tr + det_term;
  const double lmin = 0.5 * tr - det_term;
  if (!(lmin > 0.0)) return std::nullopt;
  return std::max(1.0, std::sqrt(lmax / lmin));
}

QualityRecord quality_record(const GrayImage& image, const SegmentationResult* seg,
                             const QualityOptions& opt) {
  QualityRecord rec;
  rec.set(QualityMetric::grey_scale_utilization,
          image.empty() ? std::nullopt : std::optional(metrics::grey_scale_utilization(image)));
  rec.set(QualityMetric::motion_blur, metrics::motion_blur(image, opt.autocorrelation_radius));
  if (seg) {
    validate_segmentation(*seg, image);
    rec.set(QualityMetric::usable_iris_area, metrics::usable_iris_area(*seg));
    rec.set(QualityMetric::iris_sclera_contrast,
            metrics::iris_sclera_contrast(image, *seg, opt.min_band_pixels));
    rec.set(QualityMetric::iris_pupil_contrast,
            metrics::iris_pupil_contrast(image, *seg, opt.min_band_pixels));
    rec.set(QualityMetric::pupil_boundary_circularity,
            metrics::pupil_boundary_circularity(image, *seg, opt.circularity_angles,
                                                opt.circularity_harmonics));
    rec.set(QualityMetric::iris_radius, seg->iris.radius);
    rec.set(QualityMetric::pupil_iris_ratio, metrics::pupil_iris_ratio(*seg));
    rec.set(QualityMetric::iris_pupil_concentricity, metrics::iris_pupil_concentricity(*seg));
    rec.set(QualityMetric::margin_adequacy, metrics::margin_adequacy(image, *seg));
    rec.set(QualityMetric::sharpness, metrics::sharpness(image, *seg, opt.sharpness_half_power,
                                                         opt.min_band_pixels));
  }
  rec.set(QualityMetric::overall_quality, metrics::overall_quality(rec));
  return rec;
}

std::string format_quality_csv(const std::vector<QualityRow>& rows) {
  std::string out = "image_id";
  for (auto name : kNames) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (const auto& row : rows) {
    out += row.image_id;
    for (std::size_t i = 0; i < kQualityMetricCount; ++i) {
      out += ',';
      out += row.record.computed[i] ? io::format_double(row.record.values[i]) : "255";
    }
    out += '\n';
  }
  return out;
}

std::vector<QualityRow> parse_quality_csv(std::string_view text) {
  auto lines = io::split_lines(text);
  if (lines.empty()) throw ParseError("quality CSV: missing header", 1);
  const auto header = io::split_csv_line(lines[0]);
  if (header.size() != kQualityMetricCount + 1 || header[0] != "image_id")
    throw ParseError("quality CSV: unexpected header", 1);
  for (std::size_t i = 0; i < kQualityMetricCount; ++i)
    if (header[i + 1] != kNames[i]) throw ParseError("quality CSV: unexpected column " + header[i + 1], 1);
  std::vector<QualityRow> rows;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (io::trim(lines[l]).empty()) continue;
    const auto f = io::split_csv_line(lines[l]);
    if (f.size() != kQualityMetricCount + 1)
      throw ParseError("quality CSV row " + std::to_string(l + 1) + ": wrong field count",
                       static_cast<long>(l + 1));
    QualityRow row;
    row.image_id = f[0];
    for (std::size_t i = 0; i < kQualityMetricCount; ++i) {
      double v;
      try {
        v = io::parse_double(f[i + 1]);
      } catch (const InvalidInput& e) {
        throw ParseError("quality CSV row " + std::to_string(l + 1) + ": " + e.what(),
                         static_cast<long>(l + 1));
      }
      row.record.values[i] = v;
      row.record.computed[i] = v != kQualitySentinel;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pmiris
