// Times the OpenMP kernels against their serial references on synthetic inputs.
// Usage: bench_kernels [threads]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>

#include "pmiris/encoder.hpp"
#include "pmiris/matcher.hpp"
#include "pmiris/reference.hpp"

using namespace pmiris;

namespace {

template <typename F>
double best_of(int reps, F f) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, bool same) {
  std::printf("%-26s serial %9.4f s   openmp %9.4f s   speedup %6.2fx   %s\n", name, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) omp_set_num_threads(std::atoi(argv[1]));
  std::printf("threads: %d\n", omp_get_max_threads());
  std::mt19937_64 rng(1);

  // Encoding: 7 filters of 17x17 over a 64x512 texture.
  NormalizedIris norm;
  norm.texture = Raster<double>(512, 64);
  norm.validity_mask = BinaryMask(512, 64, 1);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  for (auto& v : norm.texture.data()) v = u(rng);
  FilterBank bank;
  bank.n_filters = 7;
  bank.kernel_height = bank.kernel_width = 17;
  std::normal_distribution<double> g;
  for (int i = 0; i < 7 * 289; ++i) bank.coefficients.push_back(g(rng));
  IrisCode fast, slow;
  const double enc_serial = best_of(3, [&] { slow = reference::encode(norm, bank); });
  const double enc_parallel = best_of(3, [&] { fast = encode(norm, bank); });
  report("encode 7x17x17 on 64x512", enc_serial, enc_parallel, fast == slow);

  // Single comparison with rotation search.
  IrisCode a(7, 64, 512), b(7, 64, 512);
  for (auto* c : {&a, &b}) {
    for (auto& w : c->bit_words()) w = rng();
    for (auto& w : c->mask_words()) w = rng() | rng();
  }
  ComparisonScore m_fast;
  std::optional<ComparisonScore> m_slow;
  const double m_serial = best_of(3, [&] { m_slow = reference::match_bitwise(a, b, {}); });
  const double m_packed = best_of(3, [&] { m_fast = match(a, b); });
  report("match, shifts -16..16", m_serial, m_packed, m_slow && m_slow->score == m_fast.score);

  // All-pairs scoring over 12 codes (66 pairs).
  std::vector<ManifestEntry> entries;
  std::vector<CodeEntry> codes;
  for (int i = 0; i < 12; ++i) {
    ManifestEntry e;
    e.image_path = "img" + std::to_string(i) + ".pgm";
    e.subject_id = "s" + std::to_string(i / 4);
    e.pmi_hours = 10;
    entries.push_back(e);
    IrisCode c(7, 64, 512);
    for (auto& w : c.bit_words()) w = rng();
    for (auto& w : c.mask_words()) w = ~std::uint64_t{0};
    codes.push_back({"img" + std::to_string(i), c, ""});
  }
  ManifestIndex index(entries);
  ScoreRun r_fast, r_slow;
  const double s_serial = best_of(1, [&] { r_slow = reference::score_all(codes, codes, index, {}); });
  const double s_parallel = best_of(3, [&] { r_fast = score_all(codes, codes, index); });
  report("score_all, 12 codes", s_serial, s_parallel, r_fast.scores.records == r_slow.scores.records);
  return 0;
}
