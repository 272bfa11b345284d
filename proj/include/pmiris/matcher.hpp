#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pmiris/encoder.hpp"
#include "pmiris/pmi_dataset.hpp"

namespace pmiris {

struct MatchOptions {
  int max_shift = 16;
  std::size_t min_valid_bits = 512;
};

struct ComparisonScore {
  double score = 0.0;
  std::size_t disagreeing_bits = 0;
  std::size_t valid_bits = 0;
  /// Column shift applied to the second code: b'(c) = b(c - best_shift).
  int best_shift = 0;
};

/// Masked fractional Hamming distance. Throws DimensionMismatch or InsufficientOverlap.
double hamming(const IrisCode& a, const IrisCode& b, std::size_t min_valid_bits = 512);

/// Raw counts without the overlap threshold.
ComparisonScore hamming_counts(const IrisCode& a, const IrisCode& b);

/// Minimum masked Hamming distance over circular shifts of `b` in [-max_shift, max_shift].
/// Ties go to the smallest |shift|, then the negative shift.
ComparisonScore match(const IrisCode& a, const IrisCode& b, const MatchOptions& options = {});

enum class ScoreLabel { genuine, impostor };
std::string_view to_string(ScoreLabel label);

struct ScoreRecord {
  std::string probe_id;
  std::string gallery_id;
  double score = 0.0;
  int best_shift = 0;
  ScoreLabel label = ScoreLabel::impostor;
  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

struct ScoreSet {
  std::vector<ScoreRecord> records;

  std::vector<double> scores(ScoreLabel label) const;
  std::size_t count(ScoreLabel label) const;
};

struct Exclusion {
  std::string probe_id;
  std::string gallery_id;
  std::string reason;  ///< missing_code, unreadable_code, dim_mismatch, insufficient_overlap, unknown_id
  friend bool operator==(const Exclusion&, const Exclusion&) = default;
};

/// One side of a comparison. `code` is empty when the file was missing or unreadable;
/// `failure` then holds the exclusion reason.
struct CodeEntry {
  std::string id;
  std::optional<IrisCode> code;
  std::string failure = "missing_code";
};

struct ScoreRun {
  ScoreSet scores;
  std::vector<Exclusion> exclusions;
};

/// True when the two manifest entries show the same iris: same subject, and the same eye
/// unless either eye is unknown.
bool same_identity(const ManifestEntry& a, const ManifestEntry& b);

/// Scores every probe/gallery pair (no self pairs; a pair present in both orders is
/// scored once, probe id < gallery id). Output sorted by (probe_id, gallery_id).
/// Parallel across probes; result independent of the thread count.
ScoreRun score_all(std::span<const CodeEntry> probes, std::span<const CodeEntry> gallery,
                   const ManifestIndex& manifest, const MatchOptions& options = {});

/// `probe_id,gallery_id,score,best_shift,label`
std::string format_scores_csv(const ScoreSet& set);
ScoreSet parse_scores_csv(std::string_view text);
/// `probe_id,gallery_id,reason`
std::string format_exclusions_csv(const std::vector<Exclusion>& exclusions);

}  // namespace pmiris
