#include "pmiris/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "pmiris/io.hpp"

namespace pmiris::phantom {
namespace {

std::uint8_t to_level(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

IrisTexture::IrisTexture(std::uint64_t seed, int components, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> angular(3, 40);
  std::uniform_real_distribution<double> radial(0.5, 6.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> amp(0.5, 1.0);
  double total = 0.0;
  for (int i = 0; i < components; ++i) {
    Wave w{amp(rng), static_cast<double>(angular(rng)), radial(rng), phase(rng)};
    total += w.amplitude;
    waves_.push_back(w);
  }
  // Peak amplitude is bounded by `amplitude`, typical excursions are much smaller.
  const double scale = amplitude * 3.0 / std::max(total, 1e-12);
  for (auto& w : waves_) w.amplitude *= scale;
}

double IrisTexture::operator()(double rho, double theta) const {
  double v = 0.0;
  for (const auto& w : waves_)
    v += w.amplitude * std::cos(w.angular * theta + w.radial * std::numbers::pi * rho + w.phase);
  return v;
}

EyeScene textured_scene(std::uint64_t seed) {
  EyeScene s;
  s.texture = IrisTexture(seed, 32, 20.0);
  s.noise_sd = 8.0;
  s.noise_seed = seed;
  return s;
}

GrayImage render_field(int width, int height, const std::function<double(double, double)>& f,
                       int supersample) {
  GrayImage img(width, height);
  const int s = std::max(1, supersample);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      double acc = 0.0;
      for (int j = 0; j < s; ++j)
        for (int i = 0; i < s; ++i)
          acc += f(x + (i + 0.5) / s - 0.5, y + (j + 0.5) / s - 0.5);
      img(x, y) = to_level(acc / (s * s));
    }
  return img;
}

GrayImage render_eye(int width, int height, const EyeScene& scene) {
  const auto& p = scene.pupil;
  const auto& ir = scene.iris;
  auto field = [&](double x, double y) {
    const double dp = std::hypot(x - p.center_x, y - p.center_y);
    if (dp <= p.radius) return scene.pupil_level;
    const double di = std::hypot(x - ir.center_x, y - ir.center_y);
    if (di >= ir.radius) return scene.sclera_level;
    double v = scene.iris_level;
    if (scene.texture) {
      const double theta = std::atan2(-(y - p.center_y), x - p.center_x);
      // Distance from the pupil center to the limbus along this ray.
      const double ux = (x - p.center_x) / dp, uy = (y - p.center_y) / dp;
      const double ox = p.center_x - ir.center_x, oy = p.center_y - ir.center_y;
      const double b = ox * ux + oy * uy;
      const double limbus = -b + std::sqrt(std::max(0.0, b * b - (ox * ox + oy * oy) + ir.radius * ir.radius));
      const double rho = std::clamp((dp - p.radius) / std::max(limbus - p.radius, 1e-9), 0.0, 1.0);
      v += scene.texture(rho, theta - scene.rotation);
    }
    return v;
  };
  auto img = render_field(width, height, field, scene.supersample);
  if (scene.noise_sd > 0.0) {
    std::mt19937_64 rng(scene.noise_seed);
    std::normal_distribution<double> noise(0.0, scene.noise_sd);
    for (auto& px : img.data()) px = to_level(px + noise(rng));
  }
  return img;
}

void paint_top_band(GrayImage& image, double fraction, std::uint8_t level) {
  const int rows = static_cast<int>(std::ceil(fraction * image.height()));
  for (int y = 0; y < std::min(rows, image.height()); ++y)
    for (int x = 0; x < image.width(); ++x) image(x, y) = level;
}

SegmentationResult ground_truth(int width, int height, const EyeScene& scene) {
  SegmentationResult seg;
  seg.pupil = scene.pupil;
  seg.iris = scene.iris;
  seg.occlusion_mask = annulus_mask(width, height, scene.pupil, scene.iris);
  seg.status = SegmentationStatus::ingested;
  return seg;
}

GrayImage box_blur_horizontal(const GrayImage& image, int length) {
  GrayImage out(image.width(), image.height());
  const int lo = -(length / 2);
  const int hi = lo + length - 1;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      double acc = 0.0;
      for (int i = lo; i <= hi; ++i) acc += image(std::clamp(x + i, 0, image.width() - 1), y);
      out(x, y) = to_level(acc / length);
    }
  return out;
}

GrayImage box_blur(const GrayImage& image, int size) {
  GrayImage out(image.width(), image.height());
  const int r = size / 2;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      double acc = 0.0;
      for (int j = -r; j <= r; ++j)
        for (int i = -r; i <= r; ++i)
          acc += image(std::clamp(x + i, 0, image.width() - 1),
                       std::clamp(y + j, 0, image.height() - 1));
      out(x, y) = to_level(acc / (size * size));
    }
  return out;
}

std::vector<ManifestEntry> write_eye_corpus(const std::filesystem::path& dir,
                                            const CorpusOptions& opt) {
  if (opt.subjects <= 0 || opt.images_per_subject <= 0 || opt.size < 128)
    throw InvalidInput("corpus: need subjects, images and size >= 128");
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double c = opt.size / 2.0;
  const double scale = opt.size / 256.0;
  std::vector<ManifestEntry> entries;
  for (int s = 0; s < opt.subjects; ++s) {
    const IrisTexture texture(opt.seed * 1000 + s, 32, 30.0);
    for (int k = 0; k < opt.images_per_subject; ++k) {
      EyeScene scene;
      scene.pupil = {c + 4 * u(rng), c + 4 * u(rng), (40 + 4 * u(rng)) * scale};
      scene.iris = {scene.pupil.center_x + 2 * u(rng), scene.pupil.center_y + 2 * u(rng),
                    (100 + 5 * u(rng)) * scale};
      scene.iris_level = 110 + 5 * u(rng);
      scene.texture = texture;
      scene.rotation = 0.04 * u(rng);
      scene.noise_sd = 3.0;
      scene.noise_seed = rng();
      scene.supersample = 2;
      char name[32];
      std::snprintf(name, sizeof name, "s%02d_%d.pgm", s, k);
      write_pgm(dir / name, render_eye(opt.size, opt.size, scene));
      ManifestEntry e;
      e.image_path = dir / name;
      e.subject_id = "subject" + std::to_string(s);
      e.pmi_hours = 10.0 + 24.0 * k + s;
      e.eye = Eye::left;
      e.session_id = "session" + std::to_string(k);
      e.source_dataset = SourceDataset::other;
      entries.push_back(e);
    }
  }
  // Paths relative to the manifest, so the corpus directory can move.
  auto rel = entries;
  for (auto& e : rel) e.image_path = e.image_path.filename();
  io::write_file_atomic(dir / "manifest.csv", format_manifest(rel));
  return entries;
}

}  // namespace pmiris::phantom
