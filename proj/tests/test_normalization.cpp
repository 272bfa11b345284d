#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pmiris/error.hpp"
#include "pmiris/normalization.hpp"
#include "pmiris/phantom.hpp"

using namespace pmiris;

namespace {

SegmentationResult concentric(int w, int h, double rp, double ri, bool full_mask = true) {
  SegmentationResult seg;
  seg.pupil = {128, 128, rp};
  seg.iris = {128, 128, ri};
  seg.occlusion_mask = full_mask ? BinaryMask(w, h, 1) : annulus_mask(w, h, seg.pupil, seg.iris);
  seg.status = SegmentationStatus::ingested;
  return seg;
}

double angle_deg(double x, double y) {
  double a = std::atan2(-(y - 128.0), x - 128.0) * 180.0 / std::numbers::pi;
  return a < 0 ? a + 360.0 : a;
}

/// Smooth angular/radial field centred on (128,128), rotated by `rot` radians.
GrayImage smooth_field(double rot) {
  return phantom::render_field(256, 256, [rot](double x, double y) {
    const double r = std::hypot(x - 128.0, y - 128.0);
    const double t = std::atan2(-(y - 128.0), x - 128.0) - rot;
    return 120.0 + 40.0 * std::sin(3.0 * t + 0.02 * r) + 25.0 * std::cos(7.0 * t - 0.05 * r) +
           10.0 * std::sin(2.0 * t);
  });
}

}  // namespace

TEST_CASE("angular-only pattern gives radially constant columns") {
  const auto img = phantom::render_field(
      256, 256, [](double x, double y) { return 40.0 + angle_deg(x, y) / 2.0; });
  const auto n = normalize(img, concentric(256, 256, 40, 100));
  // Columns next to the 0/360 degree seam straddle the intensity discontinuity.
  for (int j = 8; j < n.cols() - 8; ++j) {
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < n.rows(); ++i) {
      lo = std::min(lo, n.texture(j, i));
      hi = std::max(hi, n.texture(j, i));
    }
    CHECK_MESSAGE(hi - lo <= 1.0, "column " << j);
  }
}

TEST_CASE("fully unmasked annulus is fully valid") {
  GrayImage img(256, 256, 77);
  const auto n = normalize(img, concentric(256, 256, 40, 100));
  CHECK(n.rows() == kDefaultNormRows);
  CHECK(n.cols() == kDefaultNormCols);
  CHECK(std::all_of(n.validity_mask.data().begin(), n.validity_mask.data().end(),
                    [](auto v) { return v == 1; }));
  CHECK(n.texture(5, 5) == doctest::Approx(77.0));
}

TEST_CASE("top half-plane mask invalidates columns with angles in (0, 180)") {
  GrayImage img(256, 256, 77);
  auto seg = concentric(256, 256, 40, 100);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 256; ++x) seg.occlusion_mask(x, y) = 0;
  const auto n = normalize(img, seg);
  for (int j = 0; j < n.cols(); ++j) {
    // Sample y = 128 - r sin(theta); its bilinear neighbours reach row floor(y) < 128 exactly
    // when sin(theta) > 0.
    const double deg = 360.0 * j / n.cols();
    const bool expect_valid = !(deg > 0.0 && deg < 180.0);
    for (int i = 0; i < n.rows(); ++i)
      CHECK_MESSAGE(n.validity_mask(j, i) == (expect_valid ? 1 : 0), "col " << j << " row " << i);
  }
}

TEST_CASE("annulus mask removes the boundary rows only") {
  GrayImage img(256, 256, 77);
  const auto n = normalize(img, concentric(256, 256, 40, 100, false));
  long valid = 0;
  for (auto v : n.validity_mask.data()) valid += v;
  CHECK(valid > 0.9 * n.validity_mask.size());
  for (int j = 0; j < n.cols(); ++j)
    for (int i = 3; i < n.rows() - 3; ++i) CHECK(n.validity_mask(j, i) == 1);
}

TEST_CASE("degenerate geometry is rejected") {
  GrayImage img(256, 256, 77);
  CHECK_THROWS_AS(normalize(img, concentric(256, 256, 99, 100)), DegenerateGeometry);
  CHECK_THROWS_AS(normalize(img, concentric(256, 256, 40, 100), 4, 512), InvalidInput);
  auto bad = concentric(256, 256, 40, 100);
  bad.occlusion_mask = BinaryMask(10, 10, 1);
  CHECK_THROWS_AS(normalize(img, bad), DimensionMismatch);
}

TEST_CASE("rotation by k columns shifts the normalized texture by k") {
  const auto seg = concentric(256, 256, 40, 100);
  const auto base = normalize(smooth_field(0.0), seg);
  for (int k : {1, 7, 64}) {
    const double rot = 2.0 * std::numbers::pi * k / base.cols();
    const auto rotated = normalize(smooth_field(rot), seg);
    double worst = 0.0;
    for (int i = 0; i < base.rows(); ++i)
      for (int j = 0; j < base.cols(); ++j) {
        const int src = ((j - k) % base.cols() + base.cols()) % base.cols();
        worst = std::max(worst, std::abs(rotated.texture(j, i) - base.texture(src, i)));
      }
    INFO("k=" << k << " worst=" << worst);
    CHECK(worst <= 1.5);
  }
}

TEST_CASE("save and load normalized iris") {
  const auto dir = std::filesystem::temp_directory_path() / "pmiris_norm_io";
  std::filesystem::remove_all(dir);
  const auto n = normalize(smooth_field(0.3), concentric(256, 256, 40, 100, false), 16, 128);
  save_normalized(dir / "eye", n);
  const auto back = load_normalized(dir / "eye");
  CHECK(back.rows() == 16);
  CHECK(back.cols() == 128);
  CHECK(back.validity_mask == n.validity_mask);
  CHECK(back.iris == n.iris);
  for (std::size_t k = 0; k < n.texture.size(); ++k)
    CHECK(std::abs(back.texture.data()[k] - n.texture.data()[k]) <= 0.5);
}
