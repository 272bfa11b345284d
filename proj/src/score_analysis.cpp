#include "pmiris/score_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmiris/error.hpp"

namespace pmiris {
namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

void require_finite(std::span<const double> values, const char* what) {
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite value");
}

template <typename Row, typename IdOf>
ClassPartition<Row> partition(const std::vector<Row>& rows, const ManifestIndex& manifest, IdOf id_of) {
  ClassPartition<Row> out;
  for (const auto& row : rows) {
    const ManifestEntry* e = manifest.find(id_of(row));
    if (!e)
      out.unjoined.push_back(row);
    else
      out.groups[assign_pmi_class(e->pmi_hours).index].push_back(row);
  }
  return out;
}

}  // namespace

std::vector<EcdfPoint> ecdf(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("ecdf: empty sample");
  require_finite(values, "ecdf");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  std::vector<EcdfPoint> out;
  for (std::size_t i = 0; i < sorted.size(); ++i)
    if (i + 1 == sorted.size() || sorted[i + 1] != sorted[i])
      out.push_back({sorted[i], static_cast<double>(i + 1) / n});
  return out;
}

double ecdf_at(const std::vector<EcdfPoint>& table, double x) {
  auto it = std::upper_bound(table.begin(), table.end(), x,
                             [](double v, const EcdfPoint& p) { return v < p.value; });
  return it == table.begin() ? 0.0 : std::prev(it)->fraction;
}

DPrime d_prime(std::span<const double> genuine, std::span<const double> impostor) {
  if (genuine.size() < 2 || impostor.size() < 2)
    throw InsufficientData("d_prime: both samples need at least 2 values");
  require_finite(genuine, "d_prime");
  require_finite(impostor, "d_prime");
  const double mg = mean_of(genuine), mi = mean_of(impostor);
  const double pooled = (sample_variance(genuine, mg) + sample_variance(impostor, mi)) / 2.0;
  const double gap = std::abs(mg - mi);
  if (pooled == 0.0) return gap == 0.0 ? DPrime{0.0, false} : DPrime{0.0, true};
  return {gap / std::sqrt(pooled), false};
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvalidInput("quantile: empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  // Clamp guards against rounding outside [sorted[lo], sorted[hi]].
  return std::clamp(sorted[lo] + frac * (sorted[hi] - sorted[lo]), sorted[lo], sorted[hi]);
}

SummaryStats summarize(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("summarize: empty sample");
  require_finite(values, "summarize");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  SummaryStats s;
  s.n = sorted.size();
  s.mean = mean_of(sorted);
  s.sd = std::sqrt(sample_variance(sorted, s.mean));
  s.min = sorted.front();
  s.max = sorted.back();
  for (std::size_t i = 0; i < kSummaryQuantiles.size(); ++i)
    s.quantiles[i] = quantile_sorted(sorted, kSummaryQuantiles[i]);
  return s;
}

Histogram histogram(std::span<const double> values, int bins, double lower, double upper) {
  if (bins <= 0) throw InvalidInput("histogram: bin count must be positive");
  if (!(lower <= upper)) throw InvalidInput("histogram: lower bound above upper bound");
  Histogram h{lower, upper, std::vector<std::size_t>(bins, 0)};
  const double width = (upper - lower) / bins;
  for (double v : values) {
    if (!(v >= lower && v <= upper)) continue;
    int b = width > 0 ? static_cast<int>(std::floor((v - lower) / width)) : 0;
    ++h.counts[std::clamp(b, 0, bins - 1)];
  }
  return h;
}

ClassPartition<ScoreRecord> partition_by_class(const ScoreSet& scores, const ManifestIndex& manifest) {
  return partition(scores.records, manifest, [](const ScoreRecord& r) { return r.probe_id; });
}

ClassPartition<QualityRow> partition_by_class(const std::vector<QualityRow>& rows,
                                              const ManifestIndex& manifest) {
  return partition(rows, manifest, [](const QualityRow& r) { return r.image_id; });
}

}  // namespace pmiris
