#include "pmiris/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "json.hpp"

#include "pmiris/error.hpp"
#include "pmiris/io.hpp"
#include "pmiris/score_analysis.hpp"

namespace pmiris {
namespace {

void check_policy(const PerturbationPolicy& p) {
  if (!(p.epsilon_max > 0.0) || !std::isfinite(p.epsilon_max))
    throw InvalidInput("perturbation: epsilon_max must be positive and finite");
}

void check_vector(const LatentVector& w) {
  if (w.components.empty()) throw InvalidInput("perturbation: zero-dimension latent vector");
  for (double v : w.components)
    if (!std::isfinite(v)) throw InvalidInput("perturbation: non-finite latent component");
}

std::vector<double> sorted_copy(std::span<const double> v, const char* what) {
  if (v.empty()) throw InvalidInput(std::string(what) + ": empty sample");
  std::vector<double> s(v.begin(), v.end());
  for (double x : s)
    if (!std::isfinite(x)) throw InvalidInput(std::string(what) + ": non-finite value");
  std::sort(s.begin(), s.end());
  return s;
}

/// Walks the merged support calling f(value, F_a(value), F_b(value), next_value).
template <typename F>
void walk_ecdfs(const std::vector<double>& a, const std::vector<double>& b, F f) {
  std::size_t i = 0, j = 0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() || j < b.size()) {
    double v;
    if (j == b.size() || (i < a.size() && a[i] <= b[j]))
      v = a[i];
    else
      v = b[j];
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    double next = v;
    if (i < a.size() && j < b.size())
      next = std::min(a[i], b[j]);
    else if (i < a.size())
      next = a[i];
    else if (j < b.size())
      next = b[j];
    f(static_cast<double>(i) / na, static_cast<double>(j) / nb, next - v);
  }
}

std::vector<double> genuine_scores(const std::vector<ScoreRecord>& records) {
  std::vector<double> out;
  for (const auto& r : records)
    if (r.label == ScoreLabel::genuine) out.push_back(r.score);
  return out;
}

/// Distances for every candidate (parallel), then the serial argmin.
std::vector<CandidateDistance> distance_table(DistanceStatistic stat, const std::vector<double>& authentic,
                                              const std::vector<double>& eps,
                                              const std::vector<std::vector<double>>& synthetic) {
  std::vector<CandidateDistance> table(eps.size());
  const long n = static_cast<long>(eps.size());
#pragma omp parallel for schedule(static)
  for (long k = 0; k < n; ++k)
    table[k] = {eps[k], distance(stat, authentic, synthetic[k]).value, authentic.size(),
                synthetic[k].size()};
  return table;
}

double argmin_epsilon(const std::vector<CandidateDistance>& table) {
  // Table is ordered by ascending epsilon, so strict '<' keeps the smaller one on ties.
  std::size_t best = 0;
  for (std::size_t k = 1; k < table.size(); ++k)
    if (table[k].distance < table[best].distance) best = k;
  return table[best].epsilon_max;
}

nlohmann::ordered_json table_json(const std::vector<CandidateDistance>& table) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : table) {
    nlohmann::ordered_json row;
    row["epsilon_max"] = c.epsilon_max;
    row["distance"] = c.distance;
    row["n_authentic"] = c.n_authentic;
    row["n_synthetic"] = c.n_synthetic;
    arr.push_back(std::move(row));
  }
  return arr;
}

std::string fmt(double v) { return io::format_double(v); }

std::string svg_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

std::string_view to_string(PerturbMode mode) {
  return mode == PerturbMode::multiplicative ? "multiplicative" : "additive_hypersphere";
}

PerturbMode parse_perturb_mode(std::string_view text) {
  if (text == "multiplicative") return PerturbMode::multiplicative;
  if (text == "additive_hypersphere") return PerturbMode::additive_hypersphere;
  throw InvalidInput("unknown perturbation mode '" + std::string(text) + "'");
}

LatentVector apply_perturbation(const LatentVector& w, PerturbMode mode, double epsilon,
                                std::span<const double> direction) {
  check_vector(w);
  LatentVector out = w;
  if (mode == PerturbMode::multiplicative) {
    for (double& v : out.components) v *= epsilon;
    return out;
  }
  if (direction.size() != w.components.size())
    throw DimensionMismatch("perturbation: direction dimension differs from latent dimension");
  for (std::size_t i = 0; i < out.components.size(); ++i) out.components[i] += epsilon * direction[i];
  return out;
}

Perturber::Perturber(const PerturbationPolicy& policy) : policy_(policy), rng_(policy.rng_seed) {
  check_policy(policy_);
}

Perturbation Perturber::operator()(const LatentVector& w) {
  check_vector(w);
  std::uniform_real_distribution<double> uniform(0.0, policy_.epsilon_max);
  double eps = 0.0;
  while (eps == 0.0) eps = uniform(rng_);
  if (policy_.mode == PerturbMode::multiplicative)
    return {apply_perturbation(w, policy_.mode, eps), eps};
  std::normal_distribution<double> normal;
  std::vector<double> u(w.components.size());
  double norm = 0.0;
  while (norm == 0.0) {
    double ss = 0.0;
    for (double& x : u) {
      x = normal(rng_);
      ss += x * x;
    }
    norm = std::sqrt(ss);
  }
  for (double& x : u) x /= norm;
  return {apply_perturbation(w, policy_.mode, eps, u), eps};
}

std::string_view to_string(DistanceStatistic s) {
  return s == DistanceStatistic::ks ? "ks" : "wasserstein1";
}

DistanceStatistic parse_distance_statistic(std::string_view text) {
  if (text == "ks") return DistanceStatistic::ks;
  if (text == "wasserstein1") return DistanceStatistic::wasserstein1;
  throw InvalidInput("unknown distance statistic '" + std::string(text) + "'");
}

DistributionDistance ks_distance(std::span<const double> a, std::span<const double> b) {
  const auto sa = sorted_copy(a, "ks_distance"), sb = sorted_copy(b, "ks_distance");
  double sup = 0.0;
  walk_ecdfs(sa, sb, [&](double fa, double fb, double) { sup = std::max(sup, std::abs(fa - fb)); });
  return {DistanceStatistic::ks, sup};
}

DistributionDistance wasserstein1(std::span<const double> a, std::span<const double> b) {
  const auto sa = sorted_copy(a, "wasserstein1"), sb = sorted_copy(b, "wasserstein1");
  double area = 0.0;
  walk_ecdfs(sa, sb, [&](double fa, double fb, double width) { area += std::abs(fa - fb) * width; });
  return {DistanceStatistic::wasserstein1, area};
}

DistributionDistance distance(DistanceStatistic s, std::span<const double> a, std::span<const double> b) {
  return s == DistanceStatistic::ks ? ks_distance(a, b) : wasserstein1(a, b);
}

CalibrationResult calibrate_epsilon(const ScoreSet& authentic,
                                    const std::map<double, ScoreSet>& synthetic_by_epsilon,
                                    const CalibrationOptions& opt, const ManifestIndex* manifest) {
  if (synthetic_by_epsilon.empty()) throw InvalidInput("calibrate: empty candidate set");
  CalibrationResult result;
  result.statistic = opt.statistic;
  std::vector<std::vector<double>> synthetic;
  for (const auto& [eps, set] : synthetic_by_epsilon) {
    if (!(eps > 0.0) || !std::isfinite(eps))
      throw InvalidInput("calibrate: candidate epsilon_max must be positive");
    result.candidates.push_back(eps);
    synthetic.push_back(set.scores(ScoreLabel::genuine));
  }

  const auto auth = authentic.scores(ScoreLabel::genuine);
  if (auth.size() < opt.min_global_genuine)
    throw InsufficientData("calibrate: authentic set has " + std::to_string(auth.size()) +
                           " genuine scores, need " + std::to_string(opt.min_global_genuine));
  for (std::size_t k = 0; k < synthetic.size(); ++k)
    if (synthetic[k].size() < opt.min_global_genuine)
      throw InsufficientData("calibrate: synthetic set for epsilon_max " + fmt(result.candidates[k]) +
                             " has " + std::to_string(synthetic[k].size()) + " genuine scores, need " +
                             std::to_string(opt.min_global_genuine));
  result.global_table = distance_table(opt.statistic, auth, result.candidates, synthetic);
  result.global_epsilon_hat = argmin_epsilon(result.global_table);

  if (!opt.per_class) return result;
  if (!manifest) throw InvalidInput("calibrate: per-class mode needs a manifest");

  const auto auth_parts = partition_by_class(authentic, *manifest);
  std::vector<ClassPartition<ScoreRecord>> synth_parts;
  for (const auto& [eps, set] : synthetic_by_epsilon) synth_parts.push_back(partition_by_class(set, *manifest));
  if (!auth_parts.unjoined.empty())
    result.warnings.push_back("authentic: " + std::to_string(auth_parts.unjoined.size()) +
                              " scores have probe ids missing from the manifest");
  for (std::size_t k = 0; k < synth_parts.size(); ++k)
    if (!synth_parts[k].unjoined.empty())
      result.warnings.push_back("synthetic epsilon_max " + fmt(result.candidates[k]) + ": " +
                                std::to_string(synth_parts[k].unjoined.size()) +
                                " scores have probe ids missing from the manifest");

  for (int cls = 1; cls <= kPmiClassCount; ++cls) {
    auto genuine_in = [cls](const ClassPartition<ScoreRecord>& p) {
      auto it = p.groups.find(cls);
      return it == p.groups.end() ? std::vector<double>{} : genuine_scores(it->second);
    };
    const auto a = genuine_in(auth_parts);
    std::vector<std::vector<double>> s;
    for (const auto& p : synth_parts) s.push_back(genuine_in(p));
    const bool present = !a.empty() || std::any_of(s.begin(), s.end(), [](auto& v) { return !v.empty(); });
    if (!present) continue;
    const std::string prefix = "class " + std::to_string(cls) + ": ";
    if (a.size() < opt.min_class_genuine) {
      result.warnings.push_back(prefix + "skipped, authentic set has " + std::to_string(a.size()) +
                                " genuine scores (need " + std::to_string(opt.min_class_genuine) + ")");
      continue;
    }
    bool short_synthetic = false;
    for (std::size_t k = 0; k < s.size() && !short_synthetic; ++k)
      if (s[k].size() < opt.min_class_genuine) {
        result.warnings.push_back(prefix + "skipped, synthetic set for epsilon_max " +
                                  fmt(result.candidates[k]) + " has " + std::to_string(s[k].size()) +
                                  " genuine scores (need " + std::to_string(opt.min_class_genuine) + ")");
        short_synthetic = true;
      }
    if (short_synthetic) continue;
    ClassCalibration cc;
    cc.table = distance_table(opt.statistic, a, result.candidates, s);
    cc.epsilon_hat = argmin_epsilon(cc.table);
    result.per_class[cls] = std::move(cc);
  }
  return result;
}

std::string format_calibration_json(const CalibrationResult& r) {
  nlohmann::ordered_json j;
  j["statistic"] = std::string(to_string(r.statistic));
  j["candidates"] = r.candidates;
  j["global"] = {{"epsilon_hat", r.global_epsilon_hat}, {"table", table_json(r.global_table)}};
  auto classes = nlohmann::ordered_json::object();
  for (const auto& [cls, cc] : r.per_class) {
    const auto pc = pmi_class(cls);
    nlohmann::ordered_json c;
    c["lower_hours"] = pc.lower_hours;
    c["upper_hours"] = std::isinf(pc.upper_hours) ? nlohmann::ordered_json("inf")
                                                  : nlohmann::ordered_json(pc.upper_hours);
    c["epsilon_hat"] = cc.epsilon_hat;
    c["table"] = table_json(cc.table);
    classes[std::to_string(cls)] = std::move(c);
  }
  j["per_class"] = std::move(classes);
  j["warnings"] = r.warnings;
  auto seeds = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.seeds) seeds[k] = v;
  j["seeds"] = std::move(seeds);
  return j.dump(2) + "\n";
}

DistributionReport distribution_report(const std::vector<NamedSample>& samples, const ReportOptions& opt) {
  if (samples.empty()) throw InvalidInput("report: no samples");
  if (opt.bins <= 0) throw InvalidInput("report: bin count must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].name.empty() || samples[i].name.find_first_of(",\n\r") != std::string::npos)
      throw InvalidInput("report: sample names must be non-empty and free of commas and newlines");
    for (std::size_t k = 0; k < i; ++k)
      if (samples[k].name == samples[i].name)
        throw InvalidInput("report: duplicate sample name '" + samples[i].name + "'");
  }

  DistributionReport rep;
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& s : samples) {
    if (s.values.empty()) {
      rep.warnings.push_back("sample '" + s.name + "' is empty and was omitted");
      continue;
    }
    const auto [mn, mx] = std::minmax_element(s.values.begin(), s.values.end());
    lo = any ? std::min(lo, *mn) : *mn;
    hi = any ? std::max(hi, *mx) : *mx;
    any = true;
  }

  std::string hist = "sample,bin,lower,upper,count\n";
  std::string ecdf_csv = "sample,value,fraction\n";
  std::string summary = "sample,n,mean,sd,min,max,q01,q05,q25,q50,q75,q95,q99,note\n";
  std::string pairwise = "sample_a,sample_b,ks,wasserstein1,d_prime\n";
  std::vector<std::pair<const NamedSample*, Histogram>> hists;
  const double width = (hi - lo) / opt.bins;

  for (const auto& s : samples) {
    if (s.values.empty()) {
      summary += s.name + ",0,,,,,,,,,,,,empty sample omitted\n";
      continue;
    }
    const auto h = histogram(s.values, opt.bins, lo, hi);
    for (int b = 0; b < opt.bins; ++b)
      hist += s.name + ',' + std::to_string(b) + ',' + fmt(lo + b * width) + ',' +
              fmt(b + 1 == opt.bins ? hi : lo + (b + 1) * width) + ',' + std::to_string(h.counts[b]) + '\n';
    for (const auto& p : ecdf(s.values)) ecdf_csv += s.name + ',' + fmt(p.value) + ',' + fmt(p.fraction) + '\n';
    const auto st = summarize(s.values);
    summary += s.name + ',' + std::to_string(st.n) + ',' + fmt(st.mean) + ',' + fmt(st.sd) + ',' +
               fmt(st.min) + ',' + fmt(st.max);
    for (double q : st.quantiles) summary += ',' + fmt(q);
    summary += ",\n";
    hists.emplace_back(&s, h);
  }

  for (std::size_t i = 0; i < hists.size(); ++i)
    for (std::size_t k = i + 1; k < hists.size(); ++k) {
      const auto& a = hists[i].first->values;
      const auto& b = hists[k].first->values;
      std::string dp;
      if (a.size() >= 2 && b.size() >= 2) {
        const auto d = d_prime(a, b);
        dp = d.infinite ? "inf" : fmt(d.value);
      }
      pairwise += hists[i].first->name + ',' + hists[k].first->name + ',' + fmt(ks_distance(a, b).value) +
                  ',' + fmt(wasserstein1(a, b).value) + ',' + dp + '\n';
    }

  // Overlay of normalized histograms as step outlines.
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
                                   "#e377c2", "#7f7f7f"};
  const double W = 640, H = 400, left = 60, right = 20, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  double peak = 0.0;
  for (const auto& [s, h] : hists)
    for (auto c : h.counts) peak = std::max(peak, static_cast<double>(c) / s->values.size());
  if (peak == 0.0) peak = 1.0;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  svg += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  svg += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         svg_escape(opt.title) + "</text>\n";
  svg += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(top + ph) + "\" x2=\"" + svg_num(left + pw) +
         "\" y2=\"" + svg_num(top + ph) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(top) + "\" x2=\"" + svg_num(left) + "\" y2=\"" +
         svg_num(top + ph) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + svg_num(left) + "\" y=\"" + svg_num(top + ph + 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + short_num(lo) + "</text>\n";
  svg += "<text x=\"" + svg_num(left + pw) + "\" y=\"" + svg_num(top + ph + 18) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + short_num(hi) + "</text>\n";
  svg += "<text x=\"" + svg_num(left - 6) + "\" y=\"" + svg_num(top + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + short_num(peak) + "</text>\n";
  for (std::size_t i = 0; i < hists.size(); ++i) {
    const auto& [s, h] = hists[i];
    const char* color = kPalette[i % std::size(kPalette)];
    std::string pts;
    const double bw = pw / opt.bins;
    for (int b = 0; b < opt.bins; ++b) {
      const double y = top + ph - ph * (static_cast<double>(h.counts[b]) / s->values.size()) / peak;
      pts += svg_num(left + b * bw) + ',' + svg_num(y) + ' ' + svg_num(left + (b + 1) * bw) + ',' + svg_num(y) + ' ';
    }
    pts.pop_back();
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
           "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(i);
    svg += "<line x1=\"" + svg_num(left + pw - 150) + "\" y1=\"" + svg_num(ly - 4) + "\" x2=\"" +
           svg_num(left + pw - 130) + "\" y2=\"" + svg_num(ly - 4) + "\" stroke=\"" + color +
           "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + svg_num(left + pw - 125) + "\" y=\"" + svg_num(ly) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + svg_escape(s->name) + " (n=" +
           std::to_string(s->values.size()) + ")</text>\n";
  }
  svg += "</svg>\n";

  rep.files["histograms.csv"] = std::move(hist);
  rep.files["ecdf.csv"] = std::move(ecdf_csv);
  rep.files["summary.csv"] = std::move(summary);
  rep.files["pairwise.csv"] = std::move(pairwise);
  rep.files["overlay.svg"] = std::move(svg);
  return rep;
}

void write_report(const std::filesystem::path& dir, const DistributionReport& report) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create report directory " + dir.string() + ": " + ec.message());
  for (const auto& [name, content] : report.files) io::write_file_atomic(dir / name, content);
}

}  // namespace pmiris
