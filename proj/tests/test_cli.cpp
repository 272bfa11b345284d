#include "doctest.h"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "pmiris/cli.hpp"
#include "pmiris/io.hpp"
#include "pmiris/matcher.hpp"
#include "pmiris/phantom.hpp"

using namespace pmiris;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "pmiris_test_cli" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

/// Runs the CLI with stderr captured.
struct Result {
  int code;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "pmiris");
  std::ostringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  auto* old_out = std::cout.rdbuf(captured.rdbuf());
  const int code = pmiris::cli::run(args);
  std::cerr.rdbuf(old);
  std::cout.rdbuf(old_out);
  return {code, captured.str()};
}

/// Three rendered eyes with a manifest.
fs::path three_image_set(const fs::path& dir) {
  phantom::CorpusOptions o;
  o.subjects = 3;
  o.images_per_subject = 1;
  phantom::write_eye_corpus(dir, o);
  return dir / "manifest.csv";
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"match", "--max-shift", "x"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
  CHECK(invoke({"quality", "--help"}).code == 0);

  const auto out = fresh_dir("cal_empty");
  const auto r = invoke({"calibrate", "--authentic", "a.csv", "--out", out.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("--synthetic") != std::string::npos);

  const auto m = invoke({"quality", "--manifest", (out / "nope.csv").string(), "--out", out.string()});
  CHECK(m.code == 2);
  CHECK(m.err.find("--manifest") != std::string::npos);
}

TEST_CASE("quality on three images") {
  const auto dir = fresh_dir("quality");
  const auto manifest = three_image_set(dir / "img");
  const auto r = invoke({"quality", "--manifest", manifest.string(), "--out", (dir / "q").string()});
  CHECK(r.code == 0);
  const auto csv = io::read_file(dir / "q" / "quality.csv");
  CHECK(line_count(csv) == 4);  // header + 3 rows
  CHECK(fs::exists(dir / "q" / "run.log"));

  SUBCASE("rerun is byte-identical") {
    CHECK(invoke({"quality", "--manifest", manifest.string(), "--out", (dir / "q2").string(), "--threads", "1"}).code == 0);
    CHECK(io::read_file(dir / "q2" / "quality.csv") == csv);
  }
}

TEST_CASE("processing failures exit with 1") {
  const auto dir = fresh_dir("fail");
  io::write_file_atomic(dir / "m.csv", "wrong,header\n");
  CHECK(invoke({"ingest", "--manifest", (dir / "m.csv").string(), "--out", (dir / "o").string()}).code == 1);
}

TEST_CASE("ingest writes the inventory") {
  const auto dir = fresh_dir("ingest");
  const auto manifest = three_image_set(dir / "img");
  CHECK(invoke({"ingest", "--manifest", manifest.string(), "--out", (dir / "o").string()}).code == 0);
  const auto inv = io::read_file(dir / "o" / "inventory.csv");
  CHECK(inv.find("1,0,24,3\n") != std::string::npos);  // images at 10, 11 and 12 h
  CHECK(inv.find("18,408,inf,0\n") != std::string::npos);
}

TEST_CASE("match records unreadable codes as exclusions") {
  const auto dir = fresh_dir("match");
  std::vector<ManifestEntry> entries;
  for (const char* id : {"a", "b", "c"}) {
    ManifestEntry e;
    e.image_path = std::string(id) + ".pgm";
    e.subject_id = std::string(id) == "c" ? "y" : "x";
    e.pmi_hours = 5;
    entries.push_back(e);
  }
  io::write_file_atomic(dir / "m.csv", format_manifest(entries));
  fs::create_directories(dir / "codes");
  IrisCode code(1, 8, 128);
  for (auto& w : code.mask_words()) w = ~std::uint64_t{0};
  for (std::size_t i = 0; i < code.bit_words().size(); ++i) code.bit_words()[i] = 0x9E3779B97F4A7C15ull * (i + 1);
  save_code(dir / "codes" / "a.code", code);
  save_code(dir / "codes" / "b.code", code.shifted(3));
  io::write_file_atomic(dir / "codes" / "c.code", "IRISCODE 1 8 128\ntruncated");

  const auto r = invoke({"match", "--manifest", (dir / "m.csv").string(), "--probes", (dir / "codes").string(),
                      "--out", (dir / "out").string()});
  CHECK(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  const auto scores = parse_scores_csv(io::read_file(dir / "out" / "scores.csv"));
  REQUIRE(scores.records.size() == 1);
  CHECK(scores.records[0].score == 0.0);
  CHECK(scores.records[0].best_shift == -3);
  CHECK(scores.records[0].label == ScoreLabel::genuine);
  const auto ex = io::read_file(dir / "out" / "exclusions.csv");
  CHECK(ex == "probe_id,gallery_id,reason\na,c,unreadable_code\nb,c,unreadable_code\n");
  CHECK(io::read_file(dir / "out" / "run.log").find("unreadable code file c.code") != std::string::npos);
}

TEST_CASE("config file and environment") {
  const auto dir = fresh_dir("config");
  io::write_file_atomic(dir / "run.ini", "[perturb]\ndim=4\ncount=2\nepsilon-max=0.5\n");
  CHECK(invoke({"perturb", "--config", (dir / "run.ini").string(), "--out", (dir / "a").string()}).code == 0);
  const auto a = io::read_file(dir / "a" / "latents.csv");
  CHECK(a.rfind("identity_id,sample,epsilon,w0,w1,w2,w3\n", 0) == 0);
  CHECK(line_count(a) == 4);

  // Flags override the file.
  CHECK(invoke({"perturb", "--config", (dir / "run.ini").string(), "--dim", "2", "--out", (dir / "b").string()}).code == 0);
  CHECK(io::read_file(dir / "b" / "latents.csv").rfind("identity_id,sample,epsilon,w0,w1\n", 0) == 0);

  ::setenv("PMIRIS_SEED", "5", 1);
  CHECK(invoke({"perturb", "--dim", "3", "--out", (dir / "c").string()}).code == 0);
  ::unsetenv("PMIRIS_SEED");
  CHECK(invoke({"perturb", "--dim", "3", "--seed", "5", "--out", (dir / "d").string()}).code == 0);
  CHECK(io::read_file(dir / "c" / "latents.csv") == io::read_file(dir / "d" / "latents.csv"));
}

TEST_CASE("calibrate and report from score files") {
  const auto dir = fresh_dir("calibrate");
  auto write_set = [&](const std::string& name, double mean) {
    ScoreSet s;
    for (int i = 0; i < 40; ++i)
      s.records.push_back({"p" + std::to_string(i), "g", mean + 0.001 * (i % 9), 0, ScoreLabel::genuine});
    io::write_file_atomic(dir / name, format_scores_csv(s));
  };
  write_set("auth.csv", 0.25);
  write_set("e03.csv", 0.23);
  write_set("e05.csv", 0.25);
  const auto r = invoke({"calibrate", "--authentic", (dir / "auth.csv").string(), "--synthetic",
                      "0.03=" + (dir / "e03.csv").string(), "--synthetic", "0.05=" + (dir / "e05.csv").string(),
                      "--out", (dir / "cal").string()});
  CHECK(r.code == 0);
  const auto json = io::read_file(dir / "cal" / "calibration.json");
  CHECK(json.find("\"epsilon_hat\": 0.05") != std::string::npos);
  CHECK(fs::exists(dir / "cal" / "report" / "overlay.svg"));

  CHECK(invoke({"calibrate", "--authentic", (dir / "auth.csv").string(), "--synthetic", "zero=x", "--out",
             (dir / "cal2").string()}).code == 2);

  const auto rep = invoke({"report", "--sample", "auth=" + (dir / "auth.csv").string(), "--sample",
                        "syn=" + (dir / "e03.csv").string(), "--out", (dir / "rep").string()});
  CHECK(rep.code == 0);
  CHECK(line_count(io::read_file(dir / "rep" / "pairwise.csv")) == 2);
}
