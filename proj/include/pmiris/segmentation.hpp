#pragma once

#include <filesystem>

#include "pmiris/image.hpp"

namespace pmiris {

struct Circle {
  double center_x = 0.0;
  double center_y = 0.0;
  double radius = 0.0;
  friend bool operator==(const Circle&, const Circle&) = default;
};

enum class SegmentationStatus { detected, ingested, failed };

struct SegmentationResult {
  Circle pupil;
  Circle iris;
  BinaryMask occlusion_mask;  ///< image-sized, 1 = usable iris texture
  SegmentationStatus status = SegmentationStatus::failed;
};

struct SegmentationOptions {
  /// Pixels brighter than median + k * robust_sd of the annulus are occluded.
  double occlusion_k = 2.5;
  /// Candidate circles need at least this ring contrast, in grey levels.
  double min_edge_contrast = 8.0;
  double pupil_radius_min_frac = 0.10;
  double pupil_radius_max_frac = 0.40;
  double iris_to_pupil_min = 1.5;
  double iris_to_pupil_max = 4.0;
};

/// Classical integro-differential search: pupil first (darkest-interior circle with the
/// strongest relative radial edge), then iris near the pupil center.
/// Throws SegmentationFailure when no plausible circle pair exists.
SegmentationResult segment(const GrayImage& image, const SegmentationOptions& options = {});

/// True when the pixel center lies strictly outside the pupil and strictly inside the iris.
bool in_annulus(const Circle& pupil, const Circle& iris, double x, double y) noexcept;

/// Annulus mask for the given circles, no occlusion removal.
BinaryMask annulus_mask(int width, int height, const Circle& pupil, const Circle& iris);

/// Checks the SegmentationResult invariants against `image`; throws InvariantViolation or
/// DimensionMismatch.
void validate_segmentation(const SegmentationResult& seg, const GrayImage& image);

/// Reads a sidecar (`pupil cx cy r`, `iris cx cy r`, `mask <pgm>`); the mask path is
/// resolved relative to the sidecar.
SegmentationResult ingest_segmentation(const GrayImage& image, const std::filesystem::path& path);

/// Writes the sidecar plus its mask PGM (`mask_path`, stored relative to the sidecar when
/// both share a directory).
void write_segmentation(const std::filesystem::path& sidecar_path,
                        const std::filesystem::path& mask_path, const SegmentationResult& seg);

}  // namespace pmiris
