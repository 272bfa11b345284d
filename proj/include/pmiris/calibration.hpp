#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pmiris/matcher.hpp"
#include "pmiris/pmi_dataset.hpp"

namespace pmiris {

struct LatentVector {
  std::vector<double> components;
  std::string identity_id;
};

enum class PerturbMode { multiplicative, additive_hypersphere };
std::string_view to_string(PerturbMode mode);
PerturbMode parse_perturb_mode(std::string_view text);

struct PerturbationPolicy {
  PerturbMode mode = PerturbMode::additive_hypersphere;
  double epsilon_max = 0.05;
  std::uint64_t rng_seed = 0;
};

/// w' = eps * w (multiplicative) or w + eps * direction (additive; direction has unit norm).
LatentVector apply_perturbation(const LatentVector& w, PerturbMode mode, double epsilon,
                                std::span<const double> direction = {});

struct Perturbation {
  LatentVector vector;
  double epsilon = 0.0;
};

/// Stateful sampler: each call draws eps uniformly on (0, epsilon_max) and, in additive
/// mode, a direction uniform on the unit sphere. Same seed, same sequence.
class Perturber {
 public:
  explicit Perturber(const PerturbationPolicy& policy);
  Perturbation operator()(const LatentVector& w);

 private:
  PerturbationPolicy policy_;
  std::mt19937_64 rng_;
};

enum class DistanceStatistic { ks, wasserstein1 };
std::string_view to_string(DistanceStatistic s);
DistanceStatistic parse_distance_statistic(std::string_view text);

struct DistributionDistance {
  DistanceStatistic statistic = DistanceStatistic::ks;
  double value = 0.0;
};

/// sup |F_a - F_b| over the empirical CDFs.
DistributionDistance ks_distance(std::span<const double> a, std::span<const double> b);
/// Integral of |F_a - F_b|.
DistributionDistance wasserstein1(std::span<const double> a, std::span<const double> b);
DistributionDistance distance(DistanceStatistic s, std::span<const double> a, std::span<const double> b);

inline const std::vector<double> kDefaultEpsilonGrid{0.01, 0.03, 0.05, 0.07, 0.09, 0.11};

struct CalibrationOptions {
  DistanceStatistic statistic = DistanceStatistic::ks;
  bool per_class = false;
  std::size_t min_global_genuine = 30;
  std::size_t min_class_genuine = 10;
};

struct CandidateDistance {
  double epsilon_max = 0.0;
  double distance = 0.0;
  std::size_t n_authentic = 0;
  std::size_t n_synthetic = 0;
};

struct ClassCalibration {
  double epsilon_hat = 0.0;
  std::vector<CandidateDistance> table;
};

struct CalibrationResult {
  DistanceStatistic statistic = DistanceStatistic::ks;
  std::vector<double> candidates;
  double global_epsilon_hat = 0.0;
  std::vector<CandidateDistance> global_table;
  std::map<int, ClassCalibration> per_class;
  std::vector<std::string> warnings;
  std::map<std::string, std::uint64_t> seeds;  ///< recorded verbatim, for provenance
};

/// Picks, among the candidate epsilon_max values, the one whose synthetic genuine scores
/// are closest to the authentic genuine scores; ties go to the smaller candidate.
/// In per-class mode `manifest` must cover the probe ids of both score sets; classes
/// with too few genuine scores on either side are skipped with a warning.
CalibrationResult calibrate_epsilon(const ScoreSet& authentic,
                                    const std::map<double, ScoreSet>& synthetic_by_epsilon,
                                    const CalibrationOptions& options = {},
                                    const ManifestIndex* manifest = nullptr);

/// Stable JSON rendering (fixed key order, shortest round-trip numbers).
std::string format_calibration_json(const CalibrationResult& result);

struct NamedSample {
  std::string name;
  std::vector<double> values;
};

struct ReportOptions {
  int bins = 50;
  std::string title = "distribution report";
};

/// File name -> content for histograms.csv, ecdf.csv, summary.csv, pairwise.csv and
/// overlay.svg; empty samples get a note row in summary.csv and a warning.
struct DistributionReport {
  std::map<std::string, std::string> files;
  std::vector<std::string> warnings;
};

DistributionReport distribution_report(const std::vector<NamedSample>& samples,
                                       const ReportOptions& options = {});
void write_report(const std::filesystem::path& dir, const DistributionReport& report);

}  // namespace pmiris
