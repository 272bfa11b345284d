#pragma once

// Straightforward serial implementations of the parallel kernels. They share no code
// with the optimized paths and exist to check them (tests) and to time them (bench).

#include <span>

#include "pmiris/encoder.hpp"
#include "pmiris/matcher.hpp"

namespace pmiris::reference {

/// Per-bit masked Hamming distance; nullopt when fewer than `min_valid_bits` overlap.
std::optional<double> hamming_bitwise(const IrisCode& a, const IrisCode& b,
                                      std::size_t min_valid_bits);

/// Shift search on per-bit comparisons, same tie rule as pmiris::match.
std::optional<ComparisonScore> match_bitwise(const IrisCode& a, const IrisCode& b,
                                             const MatchOptions& options);

/// Direct per-sample correlation and brute-force footprint test for every bit.
IrisCode encode(const NormalizedIris& norm, const FilterBank& bank);

/// Single-threaded score_all.
ScoreRun score_all(std::span<const CodeEntry> probes, std::span<const CodeEntry> gallery,
                   const ManifestIndex& manifest, const MatchOptions& options);

}  // namespace pmiris::reference
