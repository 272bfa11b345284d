#include "pmiris/matcher.hpp"

#include <algorithm>
#include <bit>
#include <map>
#include <set>

#include "pmiris/error.hpp"
#include "pmiris/io.hpp"

namespace pmiris {
namespace {

struct Counts {
  std::size_t diff = 0;
  std::size_t valid = 0;
};

Counts count_words(const IrisCode& a, const IrisCode& b) {
  const auto& ab = a.bit_words();
  const auto& am = a.mask_words();
  const auto& bb = b.bit_words();
  const auto& bm = b.mask_words();
  Counts c;
  for (std::size_t i = 0; i < ab.size(); ++i) {
    const std::uint64_t joint = am[i] & bm[i];
    c.valid += static_cast<std::size_t>(std::popcount(joint));
    c.diff += static_cast<std::size_t>(std::popcount((ab[i] ^ bb[i]) & joint));
  }
  return c;
}

/// diff_a / valid_a < diff_b / valid_b, exactly.
bool lower_ratio(const Counts& a, const Counts& b) {
  return static_cast<unsigned __int128>(a.diff) * b.valid <
         static_cast<unsigned __int128>(b.diff) * a.valid;
}

/// Shifts in tie-break order: 0, -1, +1, -2, +2, ...
std::vector<int> shift_order(int max_shift) {
  std::vector<int> out{0};
  for (int s = 1; s <= max_shift; ++s) {
    out.push_back(-s);
    out.push_back(s);
  }
  return out;
}

void check_dims(const IrisCode& a, const IrisCode& b) {
  if (!a.same_dims(b)) throw DimensionMismatch("iris codes have different dimensions");
}

void check_shift(const IrisCode& a, const MatchOptions& opt) {
  if (opt.max_shift < 0 || opt.max_shift * 4 > a.cols())
    throw InvalidInput("max_shift must lie in [0, cols/4]");
}

/// Best score over precomputed probe rotations (rotations[i] = a shifted by -order[i]).
std::optional<ComparisonScore> best_over(const std::vector<IrisCode>& rotations,
                                         const std::vector<int>& order, const IrisCode& b,
                                         std::size_t min_valid) {
  std::optional<ComparisonScore> best;
  Counts best_counts;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto c = count_words(rotations[i], b);
    if (c.valid < min_valid || c.valid == 0) continue;
    if (!best || lower_ratio(c, best_counts)) {
      best_counts = c;
      best = ComparisonScore{static_cast<double>(c.diff) / static_cast<double>(c.valid), c.diff,
                             c.valid, order[i]};
    }
  }
  return best;
}

std::vector<IrisCode> rotations_of(const IrisCode& a, const std::vector<int>& order) {
  std::vector<IrisCode> out;
  out.reserve(order.size());
  for (int s : order) out.push_back(a.shifted(-s));
  return out;
}

}  // namespace

std::string_view to_string(ScoreLabel label) {
  return label == ScoreLabel::genuine ? "genuine" : "impostor";
}

ComparisonScore hamming_counts(const IrisCode& a, const IrisCode& b) {
  check_dims(a, b);
  const auto c = count_words(a, b);
  return {c.valid ? static_cast<double>(c.diff) / static_cast<double>(c.valid) : 0.0, c.diff,
          c.valid, 0};
}

double hamming(const IrisCode& a, const IrisCode& b, std::size_t min_valid_bits) {
  const auto c = hamming_counts(a, b);
  if (c.valid_bits < std::max<std::size_t>(min_valid_bits, 1))
    throw InsufficientOverlap("joint valid bits " + std::to_string(c.valid_bits) + " below " +
                              std::to_string(min_valid_bits));
  return c.score;
}

ComparisonScore match(const IrisCode& a, const IrisCode& b, const MatchOptions& opt) {
  check_dims(a, b);
  check_shift(a, opt);
  const auto order = shift_order(opt.max_shift);
  const auto best = best_over(rotations_of(a, order), order, b, opt.min_valid_bits);
  if (!best) throw InsufficientOverlap("no shift reaches the minimum joint valid bits");
  return *best;
}

std::vector<double> ScoreSet::scores(ScoreLabel label) const {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.label == label) out.push_back(r.score);
  return out;
}

std::size_t ScoreSet::count(ScoreLabel label) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.label == label; }));
}

bool same_identity(const ManifestEntry& a, const ManifestEntry& b) {
  if (a.subject_id != b.subject_id) return false;
  if (a.eye == Eye::unknown || b.eye == Eye::unknown) return true;
  return a.eye == b.eye;
}

ScoreRun score_all(std::span<const CodeEntry> probes, std::span<const CodeEntry> gallery,
                   const ManifestIndex& manifest, const MatchOptions& opt) {
  std::vector<const CodeEntry*> ps, gs;
  for (const auto& p : probes) ps.push_back(&p);
  for (const auto& g : gallery) gs.push_back(&g);
  auto by_id = [](const CodeEntry* x, const CodeEntry* y) { return x->id < y->id; };
  std::sort(ps.begin(), ps.end(), by_id);
  std::sort(gs.begin(), gs.end(), by_id);
  std::set<std::string_view> probe_ids, gallery_ids;
  for (auto* p : ps) probe_ids.insert(p->id);
  for (auto* g : gs) gallery_ids.insert(g->id);

  const auto order = shift_order(opt.max_shift);
  struct Row {
    std::optional<ScoreRecord> record;
    std::optional<Exclusion> exclusion;
  };
  std::vector<std::vector<Row>> per_probe(ps.size());

  const long np = static_cast<long>(ps.size());
#pragma omp parallel for schedule(dynamic)
  for (long pi = 0; pi < np; ++pi) {
    const CodeEntry& p = *ps[pi];
    const ManifestEntry* pm = manifest.find(p.id);
    std::vector<IrisCode> rotations;
    bool rotations_ready = false;
    auto& rows = per_probe[pi];
    for (const CodeEntry* gp : gs) {
      const CodeEntry& g = *gp;
      if (g.id == p.id) continue;
      if (p.id > g.id && gallery_ids.count(p.id) && probe_ids.count(g.id)) continue;
      auto exclude = [&](std::string reason) {
        rows.push_back({std::nullopt, Exclusion{p.id, g.id, std::move(reason)}});
      };
      const ManifestEntry* gm = manifest.find(g.id);
      if (!pm || !gm) {
        exclude("unknown_id");
        continue;
      }
      if (!p.code) {
        exclude(p.failure);
        continue;
      }
      if (!g.code) {
        exclude(g.failure);
        continue;
      }
      if (!p.code->same_dims(*g.code)) {
        exclude("dim_mismatch");
        continue;
      }
      if (!rotations_ready) {
        check_shift(*p.code, opt);
        rotations = rotations_of(*p.code, order);
        rotations_ready = true;
      }
      const auto best = best_over(rotations, order, *g.code, opt.min_valid_bits);
      if (!best) {
        exclude("insufficient_overlap");
        continue;
      }
      rows.push_back({ScoreRecord{p.id, g.id, best->score, best->best_shift,
                                  same_identity(*pm, *gm) ? ScoreLabel::genuine : ScoreLabel::impostor},
                      std::nullopt});
    }
  }

  ScoreRun run;
  for (auto& rows : per_probe)
    for (auto& r : rows) {
      if (r.record) run.scores.records.push_back(std::move(*r.record));
      if (r.exclusion) run.exclusions.push_back(std::move(*r.exclusion));
    }
  return run;
}

std::string format_scores_csv(const ScoreSet& set) {
  std::string out = "probe_id,gallery_id,score,best_shift,label\n";
  for (const auto& r : set.records)
    out += r.probe_id + ',' + r.gallery_id + ',' + io::format_double(r.score) + ',' +
           std::to_string(r.best_shift) + ',' + std::string(to_string(r.label)) + '\n';
  return out;
}

ScoreSet parse_scores_csv(std::string_view text) {
  const auto lines = io::split_lines(text);
  if (lines.empty() || lines[0] != "probe_id,gallery_id,score,best_shift,label")
    throw ParseError("score CSV: header must be 'probe_id,gallery_id,score,best_shift,label'", 1);
  ScoreSet set;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (io::trim(lines[i]).empty()) continue;
    const long row = static_cast<long>(i) + 1;
    const auto f = io::split_csv_line(lines[i]);
    if (f.size() != 5) throw ParseError("score CSV row " + std::to_string(row) + ": expected 5 fields", row);
    ScoreRecord r;
    r.probe_id = f[0];
    r.gallery_id = f[1];
    try {
      r.score = io::parse_double(f[2]);
      r.best_shift = static_cast<int>(io::parse_int(f[3]));
    } catch (const InvalidInput& e) {
      throw ParseError("score CSV row " + std::to_string(row) + ": " + e.what(), row);
    }
    if (!(r.score >= 0.0 && r.score <= 1.0))
      throw ParseError("score CSV row " + std::to_string(row) + ": score outside [0,1]", row);
    if (f[4] == "genuine")
      r.label = ScoreLabel::genuine;
    else if (f[4] == "impostor")
      r.label = ScoreLabel::impostor;
    else
      throw ParseError("score CSV row " + std::to_string(row) + ": bad label '" + f[4] + "'", row);
    set.records.push_back(std::move(r));
  }
  return set;
}

std::string format_exclusions_csv(const std::vector<Exclusion>& exclusions) {
  std::string out = "probe_id,gallery_id,reason\n";
  for (const auto& e : exclusions) out += e.probe_id + ',' + e.gallery_id + ',' + e.reason + '\n';
  return out;
}

}  // namespace pmiris
