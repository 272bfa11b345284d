#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "pmiris/image.hpp"
#include "pmiris/pmi_dataset.hpp"
#include "pmiris/segmentation.hpp"

namespace pmiris::phantom {

/// Identity-specific iris texture: a sum of smooth polar waves in
/// (rho, theta), rho = 0 at the pupil boundary and 1 at the limbus.
class IrisTexture {
 public:
  IrisTexture() = default;
  IrisTexture(std::uint64_t seed, int components = 32, double amplitude = 30.0);

  double operator()(double rho, double theta) const;

 private:
  struct Wave {
    double amplitude, angular, radial, phase;
  };
  std::vector<Wave> waves_;
};

struct EyeScene {
  Circle pupil{128.0, 128.0, 40.0};
  Circle iris{128.0, 128.0, 100.0};
  double pupil_level = 30.0;
  double iris_level = 110.0;
  double sclera_level = 220.0;
  /// Optional additive iris texture; theta follows the normalization convention
  /// (counter-clockwise from +x with y pointing down).
  std::function<double(double rho, double theta)> texture;
  /// Texture rotation in radians, counter-clockwise.
  double rotation = 0.0;
  double noise_sd = 0.0;
  std::uint64_t noise_seed = 0;
  int supersample = 4;
};

/// Default geometry with a fine-grained texture (iris waves plus pixel grain); the
/// reference input for sharpness and motion-blur ordering checks.
EyeScene textured_scene(std::uint64_t seed = 1);

/// Renders an eye: dark pupil disk, iris annulus, bright sclera.
GrayImage render_eye(int width, int height, const EyeScene& scene);

/// Point-samples (optionally supersamples) an arbitrary intensity field.
GrayImage render_field(int width, int height, const std::function<double(double x, double y)>& f,
                       int supersample = 1);

/// Paints rows y < fraction * height with `level` (synthetic upper eyelid).
void paint_top_band(GrayImage& image, double fraction, std::uint8_t level);

/// Ground-truth segmentation for a scene: exact circles plus annulus mask.
SegmentationResult ground_truth(int width, int height, const EyeScene& scene);

/// Separable 1-D box blur of length `length` along x (replicate borders).
GrayImage box_blur_horizontal(const GrayImage& image, int length);
/// Square box blur of odd size (replicate borders).
GrayImage box_blur(const GrayImage& image, int size);

struct CorpusOptions {
  int subjects = 3;
  int images_per_subject = 4;
  int size = 256;
  std::uint64_t seed = 1;
};

/// Renders a small multi-subject eye corpus: each subject has its own iris texture, and
/// each image varies pose, pupil size, rotation and noise. Writes `<dir>/sNN_K.pgm` and
/// `<dir>/manifest.csv`; returns the manifest entries.
std::vector<ManifestEntry> write_eye_corpus(const std::filesystem::path& dir,
                                            const CorpusOptions& options = {});

}  // namespace pmiris::phantom
