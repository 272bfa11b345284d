#include "pmiris/reference.hpp"

#include <algorithm>
#include <set>

#include "pmiris/error.hpp"

namespace pmiris::reference {

std::optional<double> hamming_bitwise(const IrisCode& a, const IrisCode& b,
                                      std::size_t min_valid_bits) {
  if (!a.same_dims(b)) throw DimensionMismatch("iris codes have different dimensions");
  std::size_t diff = 0, valid = 0;
  for (int f = 0; f < a.n_filters(); ++f)
    for (int r = 0; r < a.rows(); ++r)
      for (int c = 0; c < a.cols(); ++c)
        if (a.valid(f, r, c) && b.valid(f, r, c)) {
          ++valid;
          if (a.bit(f, r, c) != b.bit(f, r, c)) ++diff;
        }
  if (valid == 0 || valid < min_valid_bits) return std::nullopt;
  return static_cast<double>(diff) / static_cast<double>(valid);
}

std::optional<ComparisonScore> match_bitwise(const IrisCode& a, const IrisCode& b,
                                             const MatchOptions& opt) {
  if (!a.same_dims(b)) throw DimensionMismatch("iris codes have different dimensions");
  const int cols = a.cols();
  std::optional<ComparisonScore> best;
  auto consider = [&](int s) {
    std::size_t diff = 0, valid = 0;
    for (int f = 0; f < a.n_filters(); ++f)
      for (int r = 0; r < a.rows(); ++r)
        for (int c = 0; c < cols; ++c) {
          const int src = ((c - s) % cols + cols) % cols;  // b shifted by s
          if (a.valid(f, r, c) && b.valid(f, r, src)) {
            ++valid;
            if (a.bit(f, r, c) != b.bit(f, r, src)) ++diff;
          }
        }
    if (valid == 0 || valid < opt.min_valid_bits) return;
    const double score = static_cast<double>(diff) / static_cast<double>(valid);
    // Exact rational comparison so ties resolve by visiting order.
    if (!best || diff * best->valid_bits < best->disagreeing_bits * valid)
      best = ComparisonScore{score, diff, valid, s};
  };
  consider(0);
  for (int s = 1; s <= opt.max_shift; ++s) {
    consider(-s);
    consider(s);
  }
  return best;
}

IrisCode encode(const NormalizedIris& norm, const FilterBank& bank) {
  const int rows = norm.rows(), cols = norm.cols();
  const int kh = bank.kernel_height, kw = bank.kernel_width;
  if (rows < kh || cols < kw) throw DimensionMismatch("encode: texture smaller than kernels");
  IrisCode code(bank.n_filters, rows, cols);
  for (int f = 0; f < bank.n_filters; ++f)
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        double acc = 0.0;
        bool valid = true;
        for (int u = 0; u < kh; ++u)
          for (int v = 0; v < kw; ++v) {
            const int rr = std::clamp(r + u - kh / 2, 0, rows - 1);
            const int cc = ((c + v - kw / 2) % cols + cols) % cols;
            acc += bank.kernel(f)[u * kw + v] * norm.texture(cc, rr);
            valid = valid && norm.validity_mask(cc, rr) != 0;
          }
        code.set_bit(f, r, c, acc > 0.0);
        code.set_valid(f, r, c, valid);
      }
  return code;
}

ScoreRun score_all(std::span<const CodeEntry> probes, std::span<const CodeEntry> gallery,
                   const ManifestIndex& manifest, const MatchOptions& opt) {
  std::vector<CodeEntry> ps(probes.begin(), probes.end()), gs(gallery.begin(), gallery.end());
  auto by_id = [](const CodeEntry& x, const CodeEntry& y) { return x.id < y.id; };
  std::sort(ps.begin(), ps.end(), by_id);
  std::sort(gs.begin(), gs.end(), by_id);
  std::set<std::string> in_probes, in_gallery;
  for (const auto& p : ps) in_probes.insert(p.id);
  for (const auto& g : gs) in_gallery.insert(g.id);

  ScoreRun run;
  for (const auto& p : ps)
    for (const auto& g : gs) {
      if (p.id == g.id) continue;
      if (in_probes.count(g.id) && in_gallery.count(p.id) && g.id < p.id) continue;
      const auto* pm = manifest.find(p.id);
      const auto* gm = manifest.find(g.id);
      std::string reason;
      if (!pm || !gm)
        reason = "unknown_id";
      else if (!p.code)
        reason = p.failure;
      else if (!g.code)
        reason = g.failure;
      else if (!p.code->same_dims(*g.code))
        reason = "dim_mismatch";
      if (reason.empty()) {
        const auto best = match_bitwise(*p.code, *g.code, opt);
        if (!best) {
          reason = "insufficient_overlap";
        } else {
          run.scores.records.push_back(
              {p.id, g.id, best->score, best->best_shift,
               same_identity(*pm, *gm) ? ScoreLabel::genuine : ScoreLabel::impostor});
          continue;
        }
      }
      run.exclusions.push_back({p.id, g.id, reason});
    }
  return run;
}

}  // namespace pmiris::reference
