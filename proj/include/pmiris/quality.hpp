#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmiris/image.hpp"
#include "pmiris/segmentation.hpp"

namespace pmiris {

/// The twelve iris quality metrics, in report column order.
enum class QualityMetric {
  usable_iris_area,
  iris_sclera_contrast,
  iris_pupil_contrast,
  pupil_boundary_circularity,
  grey_scale_utilization,
  iris_radius,
  pupil_iris_ratio,
  iris_pupil_concentricity,
  margin_adequacy,
  sharpness,
  motion_blur,
  overall_quality,
};

inline constexpr std::size_t kQualityMetricCount = 12;
/// Value written for a metric that could not be calculated.
inline constexpr double kQualitySentinel = 255.0;

std::string_view metric_name(QualityMetric m);  ///< e.g. "USABLE_IRIS_AREA"
std::optional<QualityMetric> parse_metric_name(std::string_view name);
/// True for the metrics reported on a 0..100 scale.
bool is_percent_metric(QualityMetric m);

struct QualityRecord {
  std::array<double, kQualityMetricCount> values{};
  std::array<bool, kQualityMetricCount> computed{};

  QualityRecord() { values.fill(kQualitySentinel); }

  double value(QualityMetric m) const { return values[static_cast<std::size_t>(m)]; }
  bool is_computed(QualityMetric m) const { return computed[static_cast<std::size_t>(m)]; }
  void set(QualityMetric m, std::optional<double> v);
};

struct QualityOptions {
  /// Half-power constant of the sharpness score 100 * F / (F + c).
  double sharpness_half_power = 1800.0;
  int circularity_angles = 256;
  int circularity_harmonics = 8;
  /// Half-width of the autocorrelation window used for motion blur.
  int autocorrelation_radius = 10;
  int min_band_pixels = 50;
};

/// Computes all twelve metrics. With no segmentation only the image-level metrics
/// (grey-scale utilization, motion blur) can be computed.
QualityRecord quality_record(const GrayImage& image, const SegmentationResult* seg,
                             const QualityOptions& options = {});

/// Shannon entropy (bits) of a 256-bin histogram. Throws InvalidInput for an all-zero
/// histogram or wrong size.
double entropy_bits(std::span<const double> histogram);

/// 5x5 Laplacian-of-Gaussian used for sharpness (sigma 1.4, zero-sum, row-major).
const std::array<double, 25>& sharpness_kernel();

namespace metrics {

std::optional<double> usable_iris_area(const SegmentationResult& seg);
std::optional<double> iris_sclera_contrast(const GrayImage& image, const SegmentationResult& seg,
                                           int min_pixels = 50);
std::optional<double> iris_pupil_contrast(const GrayImage& image, const SegmentationResult& seg,
                                          int min_pixels = 50);
/// Also returns the detected per-angle pupil radii through `radii` when non-null.
std::optional<double> pupil_boundary_circularity(const GrayImage& image,
                                                 const SegmentationResult& seg, int angles = 256,
                                                 int harmonics = 8,
                                                 std::vector<double>* radii = nullptr);
/// Circularity score of an explicit radius function r(theta).
std::optional<double> circularity_from_radii(std::span<const double> radii, int harmonics);
double grey_scale_utilization(const GrayImage& image);
double pupil_iris_ratio(const SegmentationResult& seg);
double iris_pupil_concentricity(const SegmentationResult& seg);
double margin_adequacy(const GrayImage& image, const SegmentationResult& seg);
/// Mean squared LoG response over usable annulus pixels.
std::optional<double> sharpness_energy(const GrayImage& image, const SegmentationResult& seg,
                                       int min_pixels = 50);
std::optional<double> sharpness(const GrayImage& image, const SegmentationResult& seg,
                                double half_power = 1800.0, int min_pixels = 50);
std::optional<double> motion_blur(const GrayImage& image, int radius = 10);
std::optional<double> overall_quality(const QualityRecord& partial);

}  // namespace metrics

/// Autocorrelation of the central-difference gradient field, window (2R+1)^2,
/// row-major with (dx, dy) = (0, 0) at the centre. Mean product over the overlap.
std::vector<double> gradient_autocorrelation(const GrayImage& image, int radius);

/// Axis ratio of the ellipse fitted to the half-maximum lobe around the window centre.
std::optional<double> lobe_axis_ratio(std::span<const double> window, int radius);

struct QualityRow {
  std::string image_id;
  QualityRecord record;
};

/// Header `image_id,USABLE_IRIS_AREA,...,OVERALL_QUALITY`; sentinel written as 255.
std::string format_quality_csv(const std::vector<QualityRow>& rows);
std::vector<QualityRow> parse_quality_csv(std::string_view text);

}  // namespace pmiris
