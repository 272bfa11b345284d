#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pmiris/image.hpp"

namespace pmiris {

Raster<double> to_double(const GrayImage& image);

/// Separable Gaussian blur with replicate borders; kernel radius ceil(3 sigma).
Raster<double> gaussian_blur(const Raster<double>& input, double sigma);

/// Bilinear sample; (x, y) must lie inside [0, w-1] x [0, h-1].
inline double bilinear_at(const Raster<double>& r, double x, double y) noexcept {
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const double fx = x - x0;
  const double fy = y - y0;
  const int x1 = std::min(x0 + 1, r.width() - 1);
  const int y1 = std::min(y0 + 1, r.height() - 1);
  const double top = (1.0 - fx) * r(x0, y0) + fx * r(x1, y0);
  const double bottom = (1.0 - fx) * r(x0, y1) + fx * r(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

/// Median (mean of the two middle elements for even sizes). Copies its input.
double median_of(std::vector<double> values);

}  // namespace pmiris
