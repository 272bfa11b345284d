#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pmiris/matcher.hpp"
#include "pmiris/pmi_dataset.hpp"
#include "pmiris/quality.hpp"

namespace pmiris {

struct EcdfPoint {
  double value = 0.0;
  double fraction = 0.0;  ///< P(X <= value)
  friend bool operator==(const EcdfPoint&, const EcdfPoint&) = default;
};

/// Distinct sorted values with their cumulative fractions; the last fraction is exactly 1.
std::vector<EcdfPoint> ecdf(std::span<const double> values);
/// Right-continuous evaluation of an ecdf() table.
double ecdf_at(const std::vector<EcdfPoint>& table, double x);

struct DPrime {
  double value = 0.0;
  bool infinite = false;  ///< both samples constant with different means
};

/// |mean_g - mean_i| / sqrt((var_g + var_i) / 2) with sample variances. Needs n >= 2 each.
DPrime d_prime(std::span<const double> genuine, std::span<const double> impostor);

inline constexpr std::array<double, 7> kSummaryQuantiles{0.01, 0.05, 0.25, 0.50, 0.75, 0.95, 0.99};

struct SummaryStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  ///< sample standard deviation, 0 for n = 1
  double min = 0.0;
  double max = 0.0;
  std::array<double, 7> quantiles{};  ///< at kSummaryQuantiles
};

SummaryStats summarize(std::span<const double> values);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

struct Histogram {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::size_t> counts;  ///< equal-width bins; the last bin is closed
};

/// Values outside [lower, upper] are ignored. A zero-width range puts everything in bin 0.
Histogram histogram(std::span<const double> values, int bins, double lower, double upper);

/// Rows grouped by the PMI class of their probe (or image) entry; rows whose id is not in
/// the manifest are listed in `unjoined`.
template <typename Row>
struct ClassPartition {
  std::map<int, std::vector<Row>> groups;
  std::vector<Row> unjoined;
};

ClassPartition<ScoreRecord> partition_by_class(const ScoreSet& scores, const ManifestIndex& manifest);
ClassPartition<QualityRow> partition_by_class(const std::vector<QualityRow>& rows,
                                              const ManifestIndex& manifest);

}  // namespace pmiris
