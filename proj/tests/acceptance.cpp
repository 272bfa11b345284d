// Acceptance suite: one PASS/FAIL line per criterion. Criteria 1-9 write their artifacts
// under a work directory; the whole suite runs twice (1 and 4 threads) and criterion 10
// compares the two artifact trees byte for byte.

#include <omp.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pmiris/calibration.hpp"
#include "pmiris/cli.hpp"
#include "pmiris/encoder.hpp"
#include "pmiris/io.hpp"
#include "pmiris/matcher.hpp"
#include "pmiris/normalization.hpp"
#include "pmiris/phantom.hpp"
#include "pmiris/pmi_dataset.hpp"
#include "pmiris/quality.hpp"
#include "pmiris/reference.hpp"
#include "pmiris/score_analysis.hpp"

using namespace pmiris;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

struct Criterion {
  int number;
  std::string title;
  double limit_seconds;
  std::function<Verdict(const fs::path&)> body;
};

std::string num(double v) { return io::format_double(v); }

IrisCode random_code(std::mt19937_64& rng, int n = 7, int r = 64, int c = 512, bool random_mask = false) {
  IrisCode code(n, r, c);
  for (auto& w : code.bit_words()) w = rng();
  for (auto& w : code.mask_words()) w = random_mask ? (rng() | rng()) : ~std::uint64_t{0};
  return code;
}

// 1 ------------------------------------------------------------------------------------

constexpr std::array<std::size_t, 18> kTable1{2490, 1542, 1094, 484, 494, 222, 328, 174, 238,
                                              116,  125,  93,   45,  55,  64,  48,  54,  327};

Verdict pmi_binning(const fs::path& dir) {
  Verdict v;
  std::vector<ManifestEntry> entries;
  int serial = 0;
  for (int k = 1; k <= 18; ++k) {
    const std::size_t n = kTable1[k - 1];
    for (std::size_t i = 0; i < n; ++i) {
      ManifestEntry e;
      char name[32];
      std::snprintf(name, sizeof name, "img_%05d.png", serial++);
      e.image_path = name;
      e.subject_id = "subj" + std::to_string(serial % 997);
      // Spread over the bin, upper edge included: ((k-1)*24, k*24].
      e.pmi_hours = k < 18 ? 24.0 * (k - 1) + 24.0 * (i + 1) / n : 408.0 + (i % 1266) + 1.0;
      e.eye = i % 2 ? Eye::right : Eye::left;
      e.session_id = "s" + std::to_string(i % 5);
      entries.push_back(e);
    }
  }
  const auto text = format_manifest(entries);
  io::write_file_atomic(dir / "manifest.csv", text);
  const auto parsed = parse_manifest(text, dir);
  const auto inv = inventory(parsed);
  io::write_file_atomic(dir / "inventory.csv", format_inventory_csv(inv));
  for (int k = 1; k <= 18; ++k)
    v.require(inv.count(k) == kTable1[k - 1],
              "class " + std::to_string(k) + ": " + std::to_string(inv.count(k)) + " != " +
                  std::to_string(kTable1[k - 1]));
  return v;
}

// 2 ------------------------------------------------------------------------------------

Verdict matcher_oracle(const fs::path& dir) {
  Verdict v;
  std::mt19937_64 rng(20240201);
  std::string csv = "pair,packed,reference\n";
  for (int t = 0; t < 100; ++t) {
    const auto a = random_code(rng, 7, 64, 512, true);
    const auto b = random_code(rng, 7, 64, 512, true);
    const double packed = hamming(a, b);
    const auto ref = reference::hamming_bitwise(a, b, 512);
    v.require(ref && *ref == packed, "pair " + std::to_string(t) + " differs from the per-bit reference");
    csv += std::to_string(t) + ',' + num(packed) + ',' + (ref ? num(*ref) : "") + '\n';
  }
  const auto a = random_code(rng);
  IrisCode comp = a;
  for (auto& w : comp.bit_words()) w = ~w;
  v.require(hamming(a, a) == 0.0, "identity score not 0");
  v.require(hamming(a, comp) == 1.0, "complement score not 1");
  double total = 0.0;
  for (int t = 0; t < 100; ++t) total += hamming(random_code(rng), random_code(rng));
  const double mean = total / 100.0;
  v.require(std::abs(mean - 0.5) <= 0.005, "random-pair mean " + num(mean));
  csv += "random_mean," + num(mean) + ",\n";
  io::write_file_atomic(dir / "scores.csv", csv);
  return v;
}

// 3 ------------------------------------------------------------------------------------

Verdict rotation_compensation(const fs::path& dir) {
  Verdict v;
  std::mt19937_64 rng(77);
  std::string csv = "code,k,score,best_shift\n";
  for (int t = 0; t < 50; ++t) {
    const auto a = random_code(rng, 7, 64, 512, true);
    for (int k = -16; k <= 16; ++k) {
      const auto m = match(a, a.shifted(k));
      v.require(m.score == 0.0 && m.best_shift == -k,
                "code " + std::to_string(t) + " k=" + std::to_string(k) + " gave shift " +
                    std::to_string(m.best_shift) + " score " + num(m.score));
      csv += std::to_string(t) + ',' + std::to_string(k) + ',' + num(m.score) + ',' +
             std::to_string(m.best_shift) + '\n';
    }
  }
  io::write_file_atomic(dir / "shifts.csv", csv);
  return v;
}

// 4 ------------------------------------------------------------------------------------

Verdict normalization_equivariance(const fs::path& dir) {
  Verdict v;
  auto scene_at = [](double rotation) {
    phantom::EyeScene s;
    s.texture = [](double rho, double theta) {
      return 30.0 * std::sin(3.0 * theta + 2.0 * rho) + 18.0 * std::cos(7.0 * theta - 3.0 * rho) +
             10.0 * std::sin(2.0 * theta);
    };
    s.rotation = rotation;
    return s;
  };
  const auto base_scene = scene_at(0.0);
  // Pixels straddling the pupil or limbus edge mix two levels and do not rotate with the
  // texture; the mask keeps only pixels lying wholly inside the iris.
  auto seg = phantom::ground_truth(256, 256, base_scene);
  for (int y = 0; y < 256; ++y)
    for (int x = 0; x < 256; ++x) {
      const double r = std::hypot(x - seg.pupil.center_x, y - seg.pupil.center_y);
      seg.occlusion_mask(x, y) = r > seg.pupil.radius + 1.0 && r < seg.iris.radius - 1.0;
    }
  const auto base = normalize(phantom::render_eye(256, 256, base_scene), seg);
  save_normalized(dir / "k0", base);
  std::string csv = "k,max_abs_diff,valid_fraction\n";
  for (int k : {1, 7, 64}) {
    const auto rotated = normalize(phantom::render_eye(256, 256, scene_at(2.0 * std::numbers::pi * k / 512)), seg);
    save_normalized(dir / ("k" + std::to_string(k)), rotated);
    double worst = 0.0;
    long compared = 0;
    for (int i = 0; i < base.rows(); ++i)
      for (int j = 0; j < base.cols(); ++j) {
        const int src = ((j - k) % 512 + 512) % 512;
        if (!rotated.validity_mask(j, i) || !base.validity_mask(src, i)) continue;
        ++compared;
        worst = std::max(worst, std::abs(rotated.texture(j, i) - base.texture(src, i)));
      }
    const double coverage = static_cast<double>(compared) / (base.rows() * base.cols());
    v.require(coverage >= 0.9, "k=" + std::to_string(k) + " only " + num(coverage) + " of cells valid");
    v.require(worst <= 1.5, "k=" + std::to_string(k) + " max difference " + num(worst));
    csv += std::to_string(k) + ',' + num(worst) + ',' + num(coverage) + '\n';
  }
  io::write_file_atomic(dir / "equivariance.csv", csv);
  return v;
}

// 5 ------------------------------------------------------------------------------------

bool in_declared_range(QualityMetric m, double x) {
  switch (m) {
    case QualityMetric::grey_scale_utilization: return x >= 0.0 && x <= 8.0;
    case QualityMetric::iris_radius: return x > 0.0;
    case QualityMetric::motion_blur: return x >= 1.0;
    default: return x >= 0.0 && x <= 100.0;
  }
}

GrayImage fuzz_image(std::mt19937_64& rng, int kind, int size, SegmentationResult& seg, bool& has_seg) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GrayImage img(size, size);
  const double c = size / 2.0;
  const double rp = size * (0.08 + 0.12 * u(rng));
  const double ri = rp * (1.6 + 1.4 * u(rng));
  Circle pupil{c + 6 * (u(rng) - 0.5), c + 6 * (u(rng) - 0.5), rp};
  Circle iris{pupil.center_x + 4 * (u(rng) - 0.5), pupil.center_y + 4 * (u(rng) - 0.5), ri};
  switch (kind) {
    case 0: {  // uniform noise
      for (auto& p : img.data()) p = static_cast<std::uint8_t>(rng() & 0xFF);
      break;
    }
    case 1: {  // constant
      std::fill(img.data().begin(), img.data().end(), static_cast<std::uint8_t>(rng() & 0xFF));
      break;
    }
    case 2: {  // two levels
      const auto lo = static_cast<std::uint8_t>(rng() & 0x7F), hi = static_cast<std::uint8_t>(128 + (rng() & 0x7F));
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) img(x, y) = ((x / 7 + y / 5) % 2) ? hi : lo;
      break;
    }
    default: {  // rendered eye, random levels, sometimes blurred or with an eyelid
      phantom::EyeScene s;
      s.pupil = pupil;
      s.iris = iris;
      s.pupil_level = 5 + 60 * u(rng);
      s.iris_level = 60 + 120 * u(rng);
      s.sclera_level = 100 + 155 * u(rng);
      s.texture = phantom::IrisTexture(rng(), 16, 40 * u(rng));
      s.noise_sd = 10 * u(rng);
      s.noise_seed = rng();
      s.supersample = 1;
      img = phantom::render_eye(size, size, s);
      if (u(rng) < 0.3) img = phantom::box_blur_horizontal(img, 1 + 2 * static_cast<int>(rng() % 6));
      if (u(rng) < 0.3) phantom::paint_top_band(img, 0.5 * u(rng), 240);
      break;
    }
  }
  has_seg = u(rng) < 0.8;
  seg.pupil = pupil;
  seg.iris = iris;
  seg.occlusion_mask = annulus_mask(size, size, pupil, iris);
  seg.status = SegmentationStatus::ingested;
  if (u(rng) < 0.3) {
    // Random occluded blob; occasionally the whole annulus.
    const bool all = u(rng) < 0.1;
    const double bx = size * u(rng), by = size * u(rng), br = size * 0.3 * u(rng);
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x)
        if (all || std::hypot(x - bx, y - by) < br) seg.occlusion_mask(x, y) = 0;
  }
  return img;
}

Verdict quality_contracts(const fs::path& dir) {
  Verdict v;
  std::mt19937_64 rng(5150);
  std::vector<QualityRow> rows;
  std::size_t computed = 0, sentinels = 0;
  for (int t = 0; t < 1000; ++t) {
    SegmentationResult seg;
    bool has_seg = false;
    const int size = 64 + static_cast<int>(rng() % 97);
    const auto img = fuzz_image(rng, t % 6, size, seg, has_seg);
    const auto rec = quality_record(img, has_seg ? &seg : nullptr);
    for (std::size_t m = 0; m < kQualityMetricCount; ++m) {
      const auto metric = static_cast<QualityMetric>(m);
      if (rec.is_computed(metric)) {
        ++computed;
        v.require(std::isfinite(rec.value(metric)) && in_declared_range(metric, rec.value(metric)),
                  "case " + std::to_string(t) + ": " + std::string(metric_name(metric)) + " = " +
                      num(rec.value(metric)) + " outside its range");
      } else {
        ++sentinels;
        v.require(rec.value(metric) == 255.0, "case " + std::to_string(t) + ": sentinel is not 255");
      }
    }
    rows.push_back({"fuzz" + std::to_string(t), rec});
  }
  const auto csv = format_quality_csv(rows);
  io::write_file_atomic(dir / "fuzz_quality.csv", csv);
  v.require(computed > 0 && sentinels > 0, "fuzz corpus did not exercise both computed and sentinel values");
  const auto back = parse_quality_csv(csv);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t m = 0; m < kQualityMetricCount; ++m)
      if (!back[i].record.is_computed(static_cast<QualityMetric>(m)))
        v.require(back[i].record.value(static_cast<QualityMetric>(m)) == 255.0, "sentinel lost in CSV");

  // Entropy: exact 0, 1 and 8 bits.
  std::vector<double> h(256, 0.0);
  h[17] = 5;
  v.require(entropy_bits(h) == 0.0, "single-level entropy not 0");
  h[200] = 5;
  v.require(entropy_bits(h) == 1.0, "two-level entropy not 1");
  std::fill(h.begin(), h.end(), 3.0);
  v.require(entropy_bits(h) == 8.0, "flat entropy not 8");
  GrayImage all_levels(256, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 256; ++x) all_levels(x, y) = static_cast<std::uint8_t>(x);
  v.require(metrics::grey_scale_utilization(all_levels) == 8.0, "all-levels image not 8 bits");

  // Ordering on the textured oracle.
  const auto scene = phantom::textured_scene();
  const auto img = phantom::render_eye(256, 256, scene);
  const auto seg = phantom::ground_truth(256, 256, scene);
  const auto sharp = metrics::sharpness(img, seg);
  const auto soft = metrics::sharpness(phantom::box_blur(img, 3), seg);
  const auto mb_sharp = metrics::motion_blur(img);
  const auto mb_smear = metrics::motion_blur(phantom::box_blur_horizontal(img, 9));
  v.require(sharp && soft && *sharp > *soft, "sharpness does not rank sharp above blurred");
  v.require(mb_sharp && mb_smear && *mb_smear > *mb_sharp, "motion blur does not rank smeared above sharp");
  io::write_file_atomic(dir / "oracle.csv", "metric,sharp,blurred\nSHARPNESS," + num(sharp.value_or(255)) + ',' +
                                                num(soft.value_or(255)) + "\nMOTION_BLUR," +
                                                num(mb_sharp.value_or(255)) + ',' + num(mb_smear.value_or(255)) + '\n');
  return v;
}

// 6 ------------------------------------------------------------------------------------

Verdict ica_properties(const fs::path& dir) {
  Verdict v;
  std::vector<NormalizedIris> irises;
  for (int i = 0; i < 4; ++i) {
    phantom::EyeScene s;
    s.texture = phantom::IrisTexture(300 + i, 32, 30.0);
    s.noise_sd = 4.0;
    s.noise_seed = 9 + i;
    s.supersample = 1;
    irises.push_back(normalize(phantom::render_eye(256, 256, s), phantom::ground_truth(256, 256, s)));
  }
  const auto patches = sample_patches(irises, 17, 10000, 42);
  IcaOptions opt;
  opt.seed = 42;
  const auto first = learn_filters_ica(patches, opt);
  const auto second = learn_filters_ica(patches, opt);
  save_bank(dir / "bank.txt", first.bank);
  save_bank(dir / "bank_again.txt", second.bank);
  v.require(first.whitened_covariance_error <= 1e-6, "whitened covariance error " + num(first.whitened_covariance_error));
  v.require(first.orthonormality_error <= 1e-6, "orthonormality error " + num(first.orthonormality_error));
  v.require(io::read_file(dir / "bank.txt") == io::read_file(dir / "bank_again.txt"), "bank files differ between runs");
  io::write_file_atomic(dir / "ica.csv", "whitened_covariance_error,orthonormality_error,iterations,converged\n" +
                                              num(first.whitened_covariance_error) + ',' +
                                              num(first.orthonormality_error) + ',' +
                                              std::to_string(first.iterations) + ',' +
                                              (first.converged ? "1" : "0") + '\n');
  return v;
}

// 7 ------------------------------------------------------------------------------------

ScoreSet gaussian_genuine(std::mt19937_64& rng, double mean, double sd, int n) {
  std::normal_distribution<double> g(mean, sd);
  ScoreSet s;
  s.records.reserve(n);
  for (int i = 0; i < n; ++i) s.records.push_back({"p", "g", g(rng), 0, ScoreLabel::genuine});
  return s;
}

Verdict calibration_recovery(const fs::path& dir) {
  Verdict v;
  const auto& grid = kDefaultEpsilonGrid;
  v.require(std::count(grid.begin(), grid.end(), 0.05) == 1 && std::count(grid.begin(), grid.end(), 0.09) == 1,
            "default grid lacks 0.05 or 0.09");
  int hits = 0;
  std::string csv = "trial,epsilon_hat\n";
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(1000 + trial);
    const auto authentic = gaussian_genuine(rng, 0.25, 0.03, 2000);
    std::map<double, ScoreSet> synthetic;
    for (double eps : grid) synthetic[eps] = gaussian_genuine(rng, 0.20 + eps, 0.03, 2000);
    const auto r = calibrate_epsilon(authentic, synthetic);
    if (r.global_epsilon_hat == 0.05) ++hits;
    csv += std::to_string(trial) + ',' + num(r.global_epsilon_hat) + '\n';
    if (trial == 0) io::write_file_atomic(dir / "calibration_trial0.json", format_calibration_json(r));
  }
  io::write_file_atomic(dir / "trials.csv", csv);
  v.require(hits >= 95, "selected 0.05 in " + std::to_string(hits) + " of 100 trials");
  return v;
}

// 8 ------------------------------------------------------------------------------------

Verdict perturbation_contract(const fs::path& dir) {
  Verdict v;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  LatentVector w{std::vector<double>(512), "identity"};
  for (double& c : w.components) c = g(rng);

  const double eps_max = 0.05;
  Perturber additive({PerturbMode::additive_hypersphere, eps_max, 123});
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const auto p = additive(w);
    double ss = 0.0;
    for (std::size_t k = 0; k < w.components.size(); ++k) {
      const double d = p.vector.components[k] - w.components[k];
      ss += d * d;
    }
    worst = std::max(worst, std::sqrt(ss));
  }
  v.require(worst < eps_max, "additive displacement reached " + num(worst));

  LatentVector unit{std::vector<double>(512, 0.0), "unit"};
  unit.components[0] = 1.0;
  const auto scaled = apply_perturbation(unit, PerturbMode::multiplicative, 0.05);
  v.require(scaled.components[0] == 0.05 &&
                std::all_of(scaled.components.begin() + 1, scaled.components.end(), [](double x) { return x == 0.0; }),
            "multiplicative (1,0,...,0) with eps 0.05 is not (0.05,0,...,0)");
  Perturber mult({PerturbMode::multiplicative, eps_max, 321});
  std::string csv = "draw,epsilon,w0_prime\n";
  for (int i = 0; i < 1000; ++i) {
    const auto p = mult(w);
    bool exact = p.epsilon > 0.0 && p.epsilon < eps_max;
    for (std::size_t k = 0; k < w.components.size(); ++k) exact = exact && p.vector.components[k] == p.epsilon * w.components[k];
    v.require(exact, "multiplicative draw " + std::to_string(i) + " is not eps * w");
    if (i < 20) csv += std::to_string(i) + ',' + num(p.epsilon) + ',' + num(p.vector.components[0]) + '\n';
  }
  csv += "additive_max_displacement," + num(worst) + ",\n";
  io::write_file_atomic(dir / "perturbation.csv", csv);
  return v;
}

// 9 ------------------------------------------------------------------------------------

Verdict end_to_end(const fs::path& dir, int threads) {
  Verdict v;
  phantom::write_eye_corpus(dir / "corpus");
  const auto m = (dir / "corpus" / "manifest.csv").string();
  const auto d = [&](const char* sub) { return (dir / sub).string(); };
  const std::string t = std::to_string(threads);
  const std::vector<std::vector<std::string>> steps{
      {"ingest", "--manifest", m, "--out", d("ingest")},
      {"segment", "--manifest", m, "--out", d("seg")},
      {"normalize", "--manifest", m, "--seg", d("seg"), "--out", d("norm")},
      {"quality", "--manifest", m, "--seg", d("seg"), "--out", d("quality")},
      {"learn-bank", "--manifest", m, "--norm", d("norm"), "--out", d("bank"), "--seed", "7"},
      {"encode", "--manifest", m, "--norm", d("norm"), "--bank", d("bank") + "/bank.txt", "--out", d("codes")},
      {"match", "--manifest", m, "--probes", d("codes"), "--out", d("match")},
      {"analyze", "--scores", d("match") + "/scores.csv", "--manifest", m, "--out", d("analysis")},
  };
  for (const auto& s : steps) {
    std::vector<std::string> args{"pmiris", "--threads", t};
    args.insert(args.end(), s.begin(), s.end());
    const int code = cli::run(args);
    v.require(code == 0, s[0] + " exited with " + std::to_string(code));
    if (code != 0) return v;
  }
  const auto scores = parse_scores_csv(io::read_file(dir / "match" / "scores.csv"));
  const auto g = scores.scores(ScoreLabel::genuine), i = scores.scores(ScoreLabel::impostor);
  v.require(g.size() == 18 && i.size() == 48,
            "expected 18 genuine and 48 impostor scores, got " + std::to_string(g.size()) + " and " +
                std::to_string(i.size()));
  if (g.size() < 2 || i.size() < 2) return v;
  const auto sg = summarize(g), si = summarize(i);
  const auto dp = d_prime(g, i);
  v.require(sg.mean < si.mean, "genuine mean " + num(sg.mean) + " not below impostor mean " + num(si.mean));
  v.require(dp.infinite || dp.value > 1.0, "d' = " + num(dp.value));
  v.detail = v.pass ? "genuine " + num(sg.mean) + ", impostor " + num(si.mean) + ", d' " + num(dp.value) : v.detail;
  return v;
}

// 10 -----------------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = io::read_file(e.path());
  return files;
}

struct RunResult {
  Verdict verdict;
  double seconds = 0.0;
};

std::vector<RunResult> run_suite(const std::vector<Criterion>& criteria, const fs::path& work) {
  std::vector<RunResult> out;
  for (const auto& c : criteria) {
    const auto dir = work / ("criterion" + std::to_string(c.number));
    fs::create_directories(dir);
    const auto t0 = std::chrono::steady_clock::now();
    RunResult r;
    try {
      r.verdict = c.body(dir);
    } catch (const std::exception& e) {
      r.verdict.pass = false;
      r.verdict.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(r);
  }
  return out;
}

void print_line(bool pass, int number, const std::string& title, const std::string& timing, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)%s%s\n", pass ? "PASS" : "FAIL", number, title.c_str(), timing.c_str(),
              detail.empty() ? "" : "; ", detail.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "pmiris_acceptance";
  fs::remove_all(root);
  const fs::path work = root / "work";

  int threads = 1;
  const std::vector<Criterion> criteria{
      {1, "PMI binning reproduces the per-class training counts", 1.0, pmi_binning},
      {2, "packed matcher equals per-bit reference; identity 0, complement 1, random mean 0.5", 10.0, matcher_oracle},
      {3, "rotation compensation recovers every shift in [-16, 16]", 10.0, rotation_compensation},
      {4, "normalization is rotation-equivariant within 1.5 levels", 5.0, normalization_equivariance},
      {5, "quality metrics respect ranges, sentinel and entropy contracts", 60.0, quality_contracts},
      {6, "ICA whitening, orthonormality and determinism", 30.0, ica_properties},
      {7, "calibration selects 0.05 on the Gaussian oracle in >= 95 of 100 trials", 30.0, calibration_recovery},
      {8, "perturbation stays inside the hypersphere; multiplicative is eps * w", 5.0, perturbation_contract},
      {9, "end-to-end CLI pipeline separates genuine from impostor", 120.0,
       [&threads](const fs::path& d) { return end_to_end(d, threads); }},
  };

  omp_set_num_threads(threads);
  const auto first = run_suite(criteria, work);
  fs::rename(work, root / "threads1");
  threads = 4;
  omp_set_num_threads(threads);
  const auto second = run_suite(criteria, work);

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto& c = criteria[i];
    const auto& r = first[i];
    const bool in_time = r.seconds < c.limit_seconds;
    const bool pass = r.verdict.pass && in_time && second[i].verdict.pass;
    char timing[64];
    std::snprintf(timing, sizeof timing, "%.2f s, limit %g s", r.seconds, c.limit_seconds);
    std::string detail = r.verdict.detail;
    if (!in_time) detail = "too slow" + (detail.empty() ? "" : "; " + detail);
    if (r.verdict.pass && !second[i].verdict.pass) detail = "second run (4 threads): " + second[i].verdict.detail;
    print_line(pass, c.number, c.title, timing, detail);
    all = all && pass;
  }

  const auto a = snapshot(root / "threads1"), b = snapshot(work);
  std::string diff;
  if (a.size() != b.size()) diff = std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " files";
  for (const auto& [name, content] : a) {
    if (!diff.empty()) break;
    auto it = b.find(name);
    if (it == b.end()) diff = name + " missing in the 4-thread run";
    else if (it->second != content) diff = name + " differs";
  }
  const bool same = diff.empty();
  print_line(same, 10, "artifacts byte-identical across runs with 1 and 4 threads",
             std::to_string(a.size()) + " files compared", diff);
  all = all && same;
  return all ? 0 : 1;
}
