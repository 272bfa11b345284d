#include "pmiris/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "pmiris/calibration.hpp"
#include "pmiris/encoder.hpp"
#include "pmiris/error.hpp"
#include "pmiris/io.hpp"
#include "pmiris/matcher.hpp"
#include "pmiris/normalization.hpp"
#include "pmiris/pmi_dataset.hpp"
#include "pmiris/quality.hpp"
#include "pmiris/score_analysis.hpp"
#include "pmiris/segmentation.hpp"

namespace pmiris::cli {
namespace {

namespace fs = std::filesystem;

/// Bad flags or configuration detected after parsing; exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Warnings collected during a run, written to <out>/run.log (no timestamps, so reruns
/// produce identical logs) and echoed to stderr.
class RunLog {
 public:
  explicit RunLog(std::string command) : command_(std::move(command)) {}

  void warn(const std::string& message) {
    lines_.push_back("warning: " + message);
    std::cerr << "pmiris " << command_ << ": warning: " << message << "\n";
  }
  void info(const std::string& message) { lines_.push_back("info: " + message); }

  void write(const fs::path& dir) const {
    std::string text = "command: " + command_ + "\n";
    for (const auto& l : lines_) text += l + "\n";
    io::write_file_atomic(dir / "run.log", text);
  }

 private:
  std::string command_;
  std::vector<std::string> lines_;
};

void prepare_out(const fs::path& out) {
  if (out.empty()) throw UsageError("--out: output directory is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out))
    throw UsageError("--out: cannot create output directory " + out.string());
}

struct Dataset {
  std::vector<ManifestEntry> entries;
  ManifestIndex index;
};

Dataset load_dataset(const fs::path& manifest) {
  if (manifest.empty()) throw UsageError("--manifest: manifest path is required");
  if (!fs::exists(manifest)) throw UsageError("--manifest: file not found: " + manifest.string());
  Dataset d;
  d.entries = load_manifest(manifest);
  d.index = ManifestIndex(d.entries);
  return d;
}

/// Runs fn(i) for every index in parallel and returns the results in index order.
/// fn must not throw.
template <typename Fn>
auto parallel_map(std::size_t n, Fn fn) {
  std::vector<decltype(fn(std::size_t{0}))> out(n);
  const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic)
  for (long i = 0; i < count; ++i) out[i] = fn(static_cast<std::size_t>(i));
  return out;
}

template <typename T>
struct Outcome {
  std::optional<T> value;
  std::string error;
};

template <typename T, typename Fn>
Outcome<T> capture(Fn fn) {
  try {
    return {fn(), {}};
  } catch (const std::exception& e) {
    return {std::nullopt, e.what()};
  }
}

fs::path sidecar_path(const fs::path& dir, const std::string& id) { return dir / (id + ".seg"); }

/// Sidecar from `seg_dir` if present, otherwise automatic segmentation.
SegmentationResult obtain_segmentation(const GrayImage& img, const fs::path& seg_dir, const std::string& id) {
  if (!seg_dir.empty() && fs::exists(sidecar_path(seg_dir, id)))
    return ingest_segmentation(img, sidecar_path(seg_dir, id));
  return segment(img);
}

std::pair<std::string, std::string> split_assignment(const std::string& text, const std::string& flag) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == text.size())
    throw UsageError(flag + ": expected NAME=VALUE, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

// ---------------------------------------------------------------------------------------

struct IngestArgs {
  fs::path manifest, out;
};

void cmd_ingest(const IngestArgs& a) {
  prepare_out(a.out);
  RunLog log("ingest");
  const auto d = load_dataset(a.manifest);
  for (const auto& e : d.entries)
    if (!fs::exists(e.image_path)) log.warn("image file not found: " + e.image_path.string());
  io::write_file_atomic(a.out / "manifest.csv", format_manifest(d.entries));
  io::write_file_atomic(a.out / "inventory.csv", format_inventory_csv(inventory(d.entries)));
  log.info("entries: " + std::to_string(d.entries.size()));
  log.write(a.out);
}

struct SegmentArgs {
  fs::path manifest, out, sidecars;
};

std::string circle_fields(const Circle& c) {
  return io::format_double(c.center_x) + ',' + io::format_double(c.center_y) + ',' +
         io::format_double(c.radius);
}

void cmd_segment(const SegmentArgs& a) {
  prepare_out(a.out);
  RunLog log("segment");
  const auto d = load_dataset(a.manifest);
  const auto results = parallel_map(d.entries.size(), [&](std::size_t i) {
    return capture<SegmentationResult>([&] {
      const auto img = read_pgm(d.entries[i].image_path);
      return obtain_segmentation(img, a.sidecars, image_id(d.entries[i]));
    });
  });
  std::string csv = "image_id,status,pupil_x,pupil_y,pupil_r,iris_x,iris_y,iris_r\n";
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    const auto id = image_id(d.entries[i]);
    const auto& r = results[i];
    if (!r.value) {
      log.warn(id + ": segmentation failed: " + r.error);
      csv += id + ",failed,,,,,,\n";
      continue;
    }
    write_segmentation(sidecar_path(a.out, id), a.out / (id + ".occ.pgm"), *r.value);
    csv += id + ',' + (r.value->status == SegmentationStatus::ingested ? "ingested" : "detected") + ',' +
           circle_fields(r.value->pupil) + ',' + circle_fields(r.value->iris) + '\n';
  }
  io::write_file_atomic(a.out / "segmentation.csv", csv);
  log.write(a.out);
}

struct NormalizeArgs {
  fs::path manifest, seg, out;
  int rows = kDefaultNormRows, cols = kDefaultNormCols;
};

void cmd_normalize(const NormalizeArgs& a) {
  if (a.rows < 8 || a.cols < 64) throw UsageError("--rows/--cols: need rows >= 8 and cols >= 64");
  if (a.seg.empty()) throw UsageError("--seg: segmentation directory is required");
  prepare_out(a.out);
  RunLog log("normalize");
  const auto d = load_dataset(a.manifest);
  const auto results = parallel_map(d.entries.size(), [&](std::size_t i) {
    return capture<NormalizedIris>([&] {
      const auto id = image_id(d.entries[i]);
      if (!fs::exists(sidecar_path(a.seg, id))) throw IoError("no segmentation sidecar");
      const auto img = read_pgm(d.entries[i].image_path);
      return normalize(img, ingest_segmentation(img, sidecar_path(a.seg, id)), a.rows, a.cols);
    });
  });
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    const auto id = image_id(d.entries[i]);
    if (!results[i].value)
      log.warn(id + ": normalization skipped: " + results[i].error);
    else
      save_normalized(a.out / id, *results[i].value);
  }
  log.write(a.out);
}

struct QualityArgs {
  fs::path manifest, seg, out;
};

void cmd_quality(const QualityArgs& a) {
  prepare_out(a.out);
  RunLog log("quality");
  const auto d = load_dataset(a.manifest);
  struct Item {
    std::optional<QualityRow> row;
    std::string error, seg_error;
  };
  const auto items = parallel_map(d.entries.size(), [&](std::size_t i) {
    Item it;
    const auto id = image_id(d.entries[i]);
    try {
      const auto img = read_pgm(d.entries[i].image_path);
      std::optional<SegmentationResult> seg;
      try {
        seg = obtain_segmentation(img, a.seg, id);
      } catch (const std::exception& e) {
        it.seg_error = e.what();
      }
      it.row = QualityRow{id, quality_record(img, seg ? &*seg : nullptr)};
    } catch (const std::exception& e) {
      it.error = e.what();
    }
    return it;
  });
  std::vector<QualityRow> rows;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto id = image_id(d.entries[i]);
    if (!items[i].seg_error.empty())
      log.warn(id + ": no segmentation, iris metrics set to 255: " + items[i].seg_error);
    if (!items[i].row) {
      log.warn(id + ": quality skipped: " + items[i].error);
      continue;
    }
    rows.push_back(*items[i].row);
  }
  io::write_file_atomic(a.out / "quality.csv", format_quality_csv(rows));
  log.write(a.out);
}

struct LearnBankArgs {
  fs::path manifest, norm, out;
  int filters = 7, kernel = 17, patches = 20000, max_iterations = 500;
  std::uint64_t seed = 0;
};

void cmd_learn_bank(const LearnBankArgs& a) {
  if (a.filters <= 0) throw UsageError("--filters: must be positive");
  if (a.kernel <= 0 || a.kernel % 2 == 0) throw UsageError("--kernel: must be odd and positive");
  if (a.filters > a.kernel * a.kernel - 1) throw UsageError("--filters: at most kernel^2 - 1 filters");
  if (a.patches < 50 * a.filters) throw UsageError("--patches: need at least 50 per filter");
  if (a.norm.empty()) throw UsageError("--norm: normalized-iris directory is required");
  prepare_out(a.out);
  RunLog log("learn-bank");
  const auto d = load_dataset(a.manifest);
  std::vector<NormalizedIris> irises;
  for (const auto& e : d.entries) {
    const auto id = image_id(e);
    try {
      irises.push_back(load_normalized(a.norm / id));
    } catch (const std::exception& ex) {
      log.warn(id + ": normalized iris unavailable: " + ex.what());
    }
  }
  const auto patches = sample_patches(irises, a.kernel, a.patches, a.seed);
  IcaOptions opt;
  opt.n_filters = a.filters;
  opt.kernel_size = a.kernel;
  opt.seed = a.seed;
  opt.max_iterations = a.max_iterations;
  const auto r = learn_filters_ica(patches, opt);
  if (!r.converged)
    log.warn("ICA did not converge in " + std::to_string(r.iterations) + " iterations; bank is still usable");
  save_bank(a.out / "bank.txt", r.bank);
  log.info("iterations: " + std::to_string(r.iterations));
  log.info("whitened covariance error: " + io::format_double(r.whitened_covariance_error));
  log.info("orthonormality error: " + io::format_double(r.orthonormality_error));
  log.write(a.out);
}

struct EncodeArgs {
  fs::path manifest, norm, bank, out;
};

void cmd_encode(const EncodeArgs& a) {
  if (a.bank.empty()) throw UsageError("--bank: filter-bank file is required");
  if (a.norm.empty()) throw UsageError("--norm: normalized-iris directory is required");
  prepare_out(a.out);
  RunLog log("encode");
  const auto d = load_dataset(a.manifest);
  const auto bank = load_bank(a.bank);
  const auto results = parallel_map(d.entries.size(), [&](std::size_t i) {
    return capture<IrisCode>([&] { return encode(load_normalized(a.norm / image_id(d.entries[i])), bank); });
  });
  for (std::size_t i = 0; i < d.entries.size(); ++i) {
    const auto id = image_id(d.entries[i]);
    if (!results[i].value)
      log.warn(id + ": encoding skipped: " + results[i].error);
    else
      save_code(a.out / (id + ".code"), *results[i].value);
  }
  log.write(a.out);
}

struct MatchArgs {
  fs::path manifest, probes, gallery, out;
  int max_shift = 16;
  std::size_t min_valid_bits = 512;
};

std::vector<CodeEntry> load_codes(const fs::path& dir, RunLog& log) {
  if (!fs::is_directory(dir)) throw UsageError("code directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(dir))
    if (f.is_regular_file() && f.path().extension() == ".code") files.push_back(f.path());
  std::sort(files.begin(), files.end());
  std::vector<CodeEntry> out;
  for (const auto& f : files) {
    CodeEntry e;
    e.id = f.stem().string();
    try {
      e.code = load_code(f);
    } catch (const std::exception& ex) {
      e.failure = "unreadable_code";
      log.warn("unreadable code file " + f.filename().string() + ": " + ex.what());
    }
    out.push_back(std::move(e));
  }
  return out;
}

void cmd_match(const MatchArgs& a) {
  if (a.max_shift < 0) throw UsageError("--max-shift: must be non-negative");
  if (a.probes.empty()) throw UsageError("--probes: probe code directory is required");
  prepare_out(a.out);
  RunLog log("match");
  const auto d = load_dataset(a.manifest);
  const fs::path gallery_dir = a.gallery.empty() ? a.probes : a.gallery;
  auto probes = load_codes(a.probes, log);
  const bool same_dir = fs::equivalent(a.probes, gallery_dir);
  auto gallery = same_dir ? probes : load_codes(gallery_dir, log);
  if (same_dir) {
    // Manifest images without a code still appear, so their pairs are reported.
    for (const auto& e : d.entries) {
      const auto id = image_id(e);
      if (std::none_of(probes.begin(), probes.end(), [&](const CodeEntry& c) { return c.id == id; })) {
        log.warn(id + ": no code file");
        probes.push_back({id, std::nullopt, "missing_code"});
        gallery.push_back({id, std::nullopt, "missing_code"});
      }
    }
  }
  for (const auto& p : probes)
    if (p.code && p.code->cols() < 4 * a.max_shift)
      throw UsageError("--max-shift: must not exceed cols/4 = " + std::to_string(p.code->cols() / 4));
  const auto run = score_all(probes, gallery, d.index, {a.max_shift, a.min_valid_bits});
  io::write_file_atomic(a.out / "scores.csv", format_scores_csv(run.scores));
  io::write_file_atomic(a.out / "exclusions.csv", format_exclusions_csv(run.exclusions));
  if (!run.exclusions.empty())
    log.warn(std::to_string(run.exclusions.size()) + " pairs excluded, see exclusions.csv");
  log.info("genuine: " + std::to_string(run.scores.count(ScoreLabel::genuine)));
  log.info("impostor: " + std::to_string(run.scores.count(ScoreLabel::impostor)));
  log.write(a.out);
}

struct AnalyzeArgs {
  fs::path scores, manifest, out;
  int bins = 50;
};

nlohmann::ordered_json separation_json(const std::vector<double>& g, const std::vector<double>& i) {
  nlohmann::ordered_json j;
  j["n_genuine"] = g.size();
  j["n_impostor"] = i.size();
  j["genuine_mean"] = g.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(summarize(g).mean);
  j["impostor_mean"] = i.empty() ? nlohmann::ordered_json() : nlohmann::ordered_json(summarize(i).mean);
  if (g.size() >= 2 && i.size() >= 2) {
    const auto dp = d_prime(g, i);
    j["d_prime"] = dp.infinite ? nlohmann::ordered_json("inf") : nlohmann::ordered_json(dp.value);
  } else {
    j["d_prime"] = nullptr;
  }
  return j;
}

void cmd_analyze(const AnalyzeArgs& a) {
  if (a.bins <= 0) throw UsageError("--bins: must be positive");
  if (a.scores.empty()) throw UsageError("--scores: score CSV is required");
  prepare_out(a.out);
  RunLog log("analyze");
  const auto set = parse_scores_csv(io::read_file(a.scores));
  const auto g = set.scores(ScoreLabel::genuine), i = set.scores(ScoreLabel::impostor);
  ReportOptions ro;
  ro.bins = a.bins;
  ro.title = "genuine vs impostor";
  auto rep = distribution_report({{"genuine", g}, {"impostor", i}}, ro);
  for (const auto& w : rep.warnings) log.warn(w);
  write_report(a.out, rep);

  nlohmann::ordered_json j;
  j["all"] = separation_json(g, i);
  if (!a.manifest.empty()) {
    const auto d = load_dataset(a.manifest);
    const auto parts = partition_by_class(set, d.index);
    if (!parts.unjoined.empty())
      log.warn(std::to_string(parts.unjoined.size()) + " scores have probe ids missing from the manifest");
    auto classes = nlohmann::ordered_json::object();
    for (const auto& [cls, rows] : parts.groups) {
      ScoreSet sub{rows};
      const auto cg = sub.scores(ScoreLabel::genuine), ci = sub.scores(ScoreLabel::impostor);
      char name[16];
      std::snprintf(name, sizeof name, "class_%02d", cls);
      ReportOptions co = ro;
      co.title = std::string("PMI ") + name;
      auto crep = distribution_report({{"genuine", cg}, {"impostor", ci}}, co);
      for (const auto& w : crep.warnings) log.warn(std::string(name) + ": " + w);
      write_report(a.out / name, crep);
      classes[std::to_string(cls)] = separation_json(cg, ci);
    }
    j["per_class"] = std::move(classes);
  }
  io::write_file_atomic(a.out / "analysis.json", j.dump(2) + "\n");
  log.write(a.out);
}

struct CalibrateArgs {
  fs::path authentic, manifest, out;
  std::vector<std::string> synthetic;
  std::string statistic = "ks";
  bool per_class = false;
  std::size_t min_global = 30, min_class = 10;
  int bins = 50;
};

void cmd_calibrate(const CalibrateArgs& a) {
  if (a.synthetic.empty())
    throw UsageError("--synthetic: candidate grid is empty; pass at least one EPS=SCORES.csv");
  if (a.authentic.empty()) throw UsageError("--authentic: authentic score CSV is required");
  if (a.per_class && a.manifest.empty()) throw UsageError("--per-class: requires --manifest");
  DistanceStatistic stat;
  try {
    stat = parse_distance_statistic(a.statistic);
  } catch (const InvalidInput&) {
    throw UsageError("--statistic: expected ks or wasserstein1");
  }
  std::map<double, fs::path> paths;
  for (const auto& s : a.synthetic) {
    const auto [eps_text, path] = split_assignment(s, "--synthetic");
    double eps = 0.0;
    try {
      eps = io::parse_double(eps_text);
    } catch (const InvalidInput&) {
      throw UsageError("--synthetic: bad epsilon '" + eps_text + "'");
    }
    if (!(eps > 0.0) || !std::isfinite(eps)) throw UsageError("--synthetic: epsilon must be positive");
    if (!paths.emplace(eps, path).second) throw UsageError("--synthetic: duplicate epsilon " + eps_text);
  }
  prepare_out(a.out);
  RunLog log("calibrate");
  const auto authentic = parse_scores_csv(io::read_file(a.authentic));
  std::map<double, ScoreSet> synthetic;
  for (const auto& [eps, p] : paths) synthetic[eps] = parse_scores_csv(io::read_file(p));
  std::optional<Dataset> d;
  if (!a.manifest.empty()) d = load_dataset(a.manifest);
  CalibrationOptions opt;
  opt.statistic = stat;
  opt.per_class = a.per_class;
  opt.min_global_genuine = a.min_global;
  opt.min_class_genuine = a.min_class;
  const auto result = calibrate_epsilon(authentic, synthetic, opt, d ? &d->index : nullptr);
  for (const auto& w : result.warnings) log.warn(w);
  io::write_file_atomic(a.out / "calibration.json", format_calibration_json(result));

  std::vector<NamedSample> samples{{"authentic", authentic.scores(ScoreLabel::genuine)}};
  for (const auto& [eps, set] : synthetic)
    samples.push_back({"synthetic_eps_" + io::format_double(eps), set.scores(ScoreLabel::genuine)});
  ReportOptions ro;
  ro.bins = a.bins;
  ro.title = "genuine scores: authentic vs synthetic";
  write_report(a.out / "report", distribution_report(samples, ro));
  log.info("global epsilon_max: " + io::format_double(result.global_epsilon_hat));
  log.write(a.out);
}

struct ReportArgs {
  std::vector<std::string> samples;
  std::string label = "genuine", title = "distribution report";
  fs::path out;
  int bins = 50;
};

/// NAME=PATH[@COLUMN]; score CSVs use the score column filtered by label, quality CSVs a
/// metric column with sentinels dropped.
NamedSample load_sample(const std::string& spec, const std::string& label, RunLog& log) {
  auto [name, rest] = split_assignment(spec, "--sample");
  std::string column;
  if (const auto at = rest.rfind('@'); at != std::string::npos) {
    column = rest.substr(at + 1);
    rest = rest.substr(0, at);
  }
  const auto text = io::read_file(rest);
  NamedSample s{name, {}};
  if (text.rfind("probe_id,", 0) == 0) {
    if (!column.empty() && column != "score") throw UsageError("--sample: score CSVs only have a 'score' column");
    for (const auto& r : parse_scores_csv(text).records)
      if (label == "all" || to_string(r.label) == label) s.values.push_back(r.score);
    return s;
  }
  if (text.rfind("image_id,", 0) == 0) {
    const auto metric = parse_metric_name(column);
    if (!metric) throw UsageError("--sample: quality CSVs need @METRIC, got '" + column + "'");
    std::size_t dropped = 0;
    for (const auto& r : parse_quality_csv(text)) {
      if (r.record.is_computed(*metric))
        s.values.push_back(r.record.value(*metric));
      else
        ++dropped;
    }
    if (dropped) log.warn(name + ": " + std::to_string(dropped) + " rows with sentinel 255 dropped");
    return s;
  }
  throw UsageError("--sample: unrecognized CSV header in " + rest);
}

void cmd_report(const ReportArgs& a) {
  if (a.samples.empty()) throw UsageError("--sample: at least one sample is required");
  if (a.label != "genuine" && a.label != "impostor" && a.label != "all")
    throw UsageError("--label: expected genuine, impostor or all");
  if (a.bins <= 0) throw UsageError("--bins: must be positive");
  prepare_out(a.out);
  RunLog log("report");
  std::vector<NamedSample> samples;
  for (const auto& s : a.samples) samples.push_back(load_sample(s, a.label, log));
  const auto rep = distribution_report(samples, {a.bins, a.title});
  for (const auto& w : rep.warnings) log.warn(w);
  write_report(a.out, rep);
  log.write(a.out);
}

struct PerturbArgs {
  fs::path out;
  int dim = 512, identities = 1, count = 10;
  std::string mode = "additive_hypersphere";
  double epsilon_max = 0.05;
  std::uint64_t seed = 0;
};

void cmd_perturb(const PerturbArgs& a) {
  if (a.dim <= 0) throw UsageError("--dim: must be positive");
  if (a.identities <= 0 || a.count < 0) throw UsageError("--identities/--count: out of range");
  if (!(a.epsilon_max > 0.0)) throw UsageError("--epsilon-max: must be positive");
  PerturbMode mode;
  try {
    mode = parse_perturb_mode(a.mode);
  } catch (const InvalidInput&) {
    throw UsageError("--mode: expected multiplicative or additive_hypersphere");
  }
  prepare_out(a.out);
  RunLog log("perturb");
  std::mt19937_64 base_rng(a.seed);
  std::normal_distribution<double> normal;
  Perturber draw({mode, a.epsilon_max, a.seed + 1});
  std::string csv = "identity_id,sample,epsilon";
  for (int k = 0; k < a.dim; ++k) csv += ",w" + std::to_string(k);
  csv += '\n';
  auto row = [&](const LatentVector& v, int sample, double eps) {
    csv += v.identity_id + ',' + std::to_string(sample) + ',' + io::format_double(eps);
    for (double c : v.components) csv += ',' + io::format_double(c);
    csv += '\n';
  };
  for (int id = 0; id < a.identities; ++id) {
    LatentVector w{std::vector<double>(a.dim), "identity_" + std::to_string(id)};
    for (double& c : w.components) c = normal(base_rng);
    row(w, 0, 0.0);
    for (int s = 1; s <= a.count; ++s) {
      const auto p = draw(w);
      row(p.vector, s, p.epsilon);
    }
  }
  io::write_file_atomic(a.out / "latents.csv", csv);
  log.write(a.out);
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"pmiris: post-mortem iris analysis toolkit"};
  app.set_config("--config", "", "TOML/INI file with option values (flags take precedence)");
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = OpenMP default)")
      ->envname("PMIRIS_THREADS")
      ->check(CLI::NonNegativeNumber);

  IngestArgs ingest;
  auto* s_ingest = app.add_subcommand("ingest", "Validate a manifest and write the PMI class inventory");
  s_ingest->add_option("--manifest", ingest.manifest, "Manifest CSV")->required();
  s_ingest->add_option("--out", ingest.out, "Output directory")->required();

  SegmentArgs seg;
  auto* s_seg = app.add_subcommand("segment", "Locate pupil and iris circles and the occlusion mask");
  s_seg->add_option("--manifest", seg.manifest, "Manifest CSV")->required();
  s_seg->add_option("--out", seg.out, "Output directory")->required();
  s_seg->add_option("--sidecars", seg.sidecars, "Directory of <id>.seg files to ingest instead of detecting");

  NormalizeArgs norm;
  auto* s_norm = app.add_subcommand("normalize", "Unwrap the iris annulus to a rectangle");
  s_norm->add_option("--manifest", norm.manifest, "Manifest CSV")->required();
  s_norm->add_option("--seg", norm.seg, "Segmentation directory")->required();
  s_norm->add_option("--out", norm.out, "Output directory")->required();
  s_norm->add_option("--rows", norm.rows, "Radial samples")->capture_default_str();
  s_norm->add_option("--cols", norm.cols, "Angular samples")->capture_default_str();

  QualityArgs qual;
  auto* s_qual = app.add_subcommand("quality", "Compute the quality metrics per image");
  s_qual->add_option("--manifest", qual.manifest, "Manifest CSV")->required();
  s_qual->add_option("--out", qual.out, "Output directory")->required();
  s_qual->add_option("--seg", qual.seg, "Segmentation directory (images without a sidecar are segmented)");

  LearnBankArgs learn;
  auto* s_learn = app.add_subcommand("learn-bank", "Learn an ICA filter bank from normalized irises");
  s_learn->add_option("--manifest", learn.manifest, "Manifest CSV")->required();
  s_learn->add_option("--norm", learn.norm, "Normalized-iris directory")->required();
  s_learn->add_option("--out", learn.out, "Output directory")->required();
  s_learn->add_option("--filters", learn.filters, "Number of filters")->capture_default_str();
  s_learn->add_option("--kernel", learn.kernel, "Kernel size (odd)")->capture_default_str();
  s_learn->add_option("--patches", learn.patches, "Number of training patches")->capture_default_str();
  s_learn->add_option("--max-iterations", learn.max_iterations, "ICA iteration cap")->capture_default_str();
  s_learn->add_option("--seed", learn.seed, "Random seed")->envname("PMIRIS_SEED")->capture_default_str();

  EncodeArgs enc;
  auto* s_enc = app.add_subcommand("encode", "Binarize filter responses into iris codes");
  s_enc->add_option("--manifest", enc.manifest, "Manifest CSV")->required();
  s_enc->add_option("--norm", enc.norm, "Normalized-iris directory")->required();
  s_enc->add_option("--bank", enc.bank, "Filter-bank file")->required();
  s_enc->add_option("--out", enc.out, "Output directory")->required();

  MatchArgs match;
  auto* s_match = app.add_subcommand("match", "Score all probe/gallery code pairs");
  s_match->add_option("--manifest", match.manifest, "Manifest CSV (labels)")->required();
  s_match->add_option("--probes", match.probes, "Directory of probe .code files")->required();
  s_match->add_option("--gallery", match.gallery, "Directory of gallery .code files (default: probes)");
  s_match->add_option("--out", match.out, "Output directory")->required();
  s_match->add_option("--max-shift", match.max_shift, "Rotation search range in columns")
      ->envname("PMIRIS_MAX_SHIFT")
      ->capture_default_str();
  s_match->add_option("--min-valid-bits", match.min_valid_bits, "Minimum jointly valid bits")
      ->envname("PMIRIS_MIN_VALID_BITS")
      ->capture_default_str();

  AnalyzeArgs an;
  auto* s_an = app.add_subcommand("analyze", "Genuine/impostor statistics, globally and per PMI class");
  s_an->add_option("--scores", an.scores, "Score CSV")->required();
  s_an->add_option("--manifest", an.manifest, "Manifest CSV (enables per-class output)");
  s_an->add_option("--out", an.out, "Output directory")->required();
  s_an->add_option("--bins", an.bins, "Histogram bins")->capture_default_str();

  CalibrateArgs cal;
  auto* s_cal = app.add_subcommand("calibrate", "Choose epsilon_max by genuine-score alignment");
  s_cal->add_option("--authentic", cal.authentic, "Authentic score CSV");
  s_cal->add_option("--synthetic", cal.synthetic, "Candidate EPS=SCORES.csv (repeatable)");
  s_cal->add_option("--statistic", cal.statistic, "ks or wasserstein1")->capture_default_str();
  s_cal->add_flag("--per-class", cal.per_class, "Also calibrate within each PMI class");
  s_cal->add_option("--manifest", cal.manifest, "Manifest CSV covering all probe ids");
  s_cal->add_option("--min-genuine", cal.min_global, "Minimum genuine scores per set")->capture_default_str();
  s_cal->add_option("--min-class-genuine", cal.min_class, "Minimum genuine scores per class")
      ->capture_default_str();
  s_cal->add_option("--bins", cal.bins, "Histogram bins")->capture_default_str();
  s_cal->add_option("--out", cal.out, "Output directory")->required();

  ReportArgs rep;
  auto* s_rep = app.add_subcommand("report", "Histograms, ECDFs and summaries for score or quality columns");
  s_rep->add_option("--sample", rep.samples, "NAME=PATH[@COLUMN] (repeatable)");
  s_rep->add_option("--label", rep.label, "Score label filter: genuine, impostor or all")->capture_default_str();
  s_rep->add_option("--title", rep.title, "Plot title")->capture_default_str();
  s_rep->add_option("--bins", rep.bins, "Histogram bins")->capture_default_str();
  s_rep->add_option("--out", rep.out, "Output directory")->required();

  PerturbArgs pert;
  auto* s_pert = app.add_subcommand("perturb", "Sample same-identity latent vectors");
  s_pert->add_option("--dim", pert.dim, "Latent dimension")->capture_default_str();
  s_pert->add_option("--identities", pert.identities, "Base latent vectors")->capture_default_str();
  s_pert->add_option("--count", pert.count, "Perturbed samples per identity")->capture_default_str();
  s_pert->add_option("--mode", pert.mode, "multiplicative or additive_hypersphere")->capture_default_str();
  s_pert->add_option("--epsilon-max", pert.epsilon_max, "Perturbation bound")->capture_default_str();
  s_pert->add_option("--seed", pert.seed, "Random seed")->envname("PMIRIS_SEED")->capture_default_str();
  s_pert->add_option("--out", pert.out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads > 0) omp_set_num_threads(threads);
  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (name == "ingest") cmd_ingest(ingest);
    else if (name == "segment") cmd_segment(seg);
    else if (name == "normalize") cmd_normalize(norm);
    else if (name == "quality") cmd_quality(qual);
    else if (name == "learn-bank") cmd_learn_bank(learn);
    else if (name == "encode") cmd_encode(enc);
    else if (name == "match") cmd_match(match);
    else if (name == "analyze") cmd_analyze(an);
    else if (name == "calibrate") cmd_calibrate(cal);
    else if (name == "report") cmd_report(rep);
    else if (name == "perturb") cmd_perturb(pert);
  } catch (const UsageError& e) {
    std::cerr << "pmiris " << name << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "pmiris " << name << ": error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace pmiris::cli
