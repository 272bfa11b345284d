#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>

#include "pmiris/error.hpp"
#include "pmiris/pmi_dataset.hpp"

using namespace pmiris;

TEST_CASE("assign_pmi_class examples") {
  CHECK(assign_pmi_class(10).index == 1);
  CHECK(assign_pmi_class(30).index == 2);
  CHECK(assign_pmi_class(500).index == 18);
  CHECK(assign_pmi_class(24).index == 1);
  CHECK(assign_pmi_class(24.5).index == 2);
  CHECK(assign_pmi_class(408).index == 17);
  CHECK(assign_pmi_class(408.001).index == 18);
  CHECK(assign_pmi_class(1674).index == 18);
  CHECK(std::isinf(assign_pmi_class(1e6).upper_hours));
}

TEST_CASE("assign_pmi_class rejects non-positive or non-finite input") {
  CHECK_THROWS_AS(assign_pmi_class(0.0), InvalidInput);
  CHECK_THROWS_AS(assign_pmi_class(-3.0), InvalidInput);
  CHECK_THROWS_AS(assign_pmi_class(std::numeric_limits<double>::quiet_NaN()), InvalidInput);
  CHECK_THROWS_AS(assign_pmi_class(std::numeric_limits<double>::infinity()), InvalidInput);
}

TEST_CASE("PMI classes partition the positive reals and are monotone") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(1e-6, 2000.0);
  for (int i = 0; i < 20000; ++i) {
    const double a = u(rng), b = u(rng);
    const auto ca = assign_pmi_class(a);
    CHECK(a > ca.lower_hours);
    CHECK(a <= ca.upper_hours);
    if (a <= b) CHECK(ca.index <= assign_pmi_class(b).index);
  }
  for (int k = 1; k < kPmiClassCount; ++k)
    CHECK(pmi_class(k).upper_hours == pmi_class(k + 1).lower_hours);
}

TEST_CASE("load_manifest parses rows in order") {
  const std::string text =
      "image_path,subject_id,pmi_hours,eye,session_id,source_dataset\n"
      "a/img1.pgm,s1,10,L,1,warsaw_v2\n"
      "a/img2.pgm,s1,30.5,R,2,nij_dcmeo\n"
      "/abs/img3.pgm,s2,500,U,,synthetic\n";
  const auto entries = parse_manifest(text, "/data");
  REQUIRE(entries.size() == 3);
  CHECK(entries[0].image_path == std::filesystem::path("/data/a/img1.pgm"));
  CHECK(entries[1].pmi_hours == 30.5);
  CHECK(entries[1].eye == Eye::right);
  CHECK(entries[2].image_path == std::filesystem::path("/abs/img3.pgm"));
  CHECK(entries[2].source_dataset == SourceDataset::synthetic);
  CHECK(image_id(entries[2]) == "img3");
}

TEST_CASE("load_manifest errors name row and field") {
  const std::string text =
      "image_path,subject_id,pmi_hours,eye,session_id,source_dataset\n"
      "img1.pgm,s1,10,L,1,other\n"
      "img2.pgm,s1,abc,L,1,other\n";
  try {
    parse_manifest(text);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.row() == 3);
    CHECK(std::string(e.what()).find("pmi_hours") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_manifest("image_path,subject\n"), ParseError);
  CHECK_THROWS_AS(parse_manifest(std::string("image_path,subject_id,pmi_hours,eye,session_id,"
                                             "source_dataset\nx.pgm,s,1,Q,1,other\n")),
                  ParseError);
  CHECK_THROWS_AS(parse_manifest(std::string("image_path,subject_id,pmi_hours,eye,session_id,"
                                             "source_dataset\n,s,1,L,1,other\n")),
                  ParseError);
}

TEST_CASE("header-only manifest is empty and inventories to zero") {
  const auto entries =
      parse_manifest("image_path,subject_id,pmi_hours,eye,session_id,source_dataset\n");
  CHECK(entries.empty());
  const auto inv = inventory(entries);
  CHECK(inv.total() == 0);
}

TEST_CASE("inventory counts classes") {
  std::vector<ManifestEntry> entries;
  auto add = [&](double pmi, int n) {
    for (int i = 0; i < n; ++i)
      entries.push_back({"img" + std::to_string(entries.size()) + ".pgm", "s", pmi, Eye::left, "1",
                         SourceDataset::other});
  };
  SUBCASE("Table-1 leading classes") {
    add(12.0, 2490);
    add(36.5, 1542);
    const auto inv = inventory(entries);
    CHECK(inv.count(1) == 2490);
    CHECK(inv.count(2) == 1542);
    CHECK(inv.total() == entries.size());
  }
  SUBCASE("one entry per class midpoint") {
    for (int k = 1; k <= 17; ++k) add(24.0 * k - 12.0, 1);
    add(500.0, 1);
    const auto inv = inventory(entries);
    for (int k = 1; k <= 18; ++k) CHECK(inv.count(k) == 1);
  }
}

TEST_CASE("inventory CSV uses inf for the open bound") {
  ClassInventory inv;
  inv.counts[0] = 3;
  const auto csv = format_inventory_csv(inv);
  CHECK(csv.rfind("class_index,lower_hours,upper_hours,count\n1,0,24,3\n", 0) == 0);
  CHECK(csv.find("18,408,inf,0\n") != std::string::npos);
}

TEST_CASE("manifest round-trips through format_manifest") {
  std::vector<ManifestEntry> entries{{"/x/a.pgm", "s1", 12.25, Eye::left, "3", SourceDataset::warsaw_v3},
                                     {"/x/b.pgm", "s2", 0.0, Eye::unknown, "", SourceDataset::other}};
  const auto back = parse_manifest(format_manifest(entries));
  REQUIRE(back.size() == 2);
  CHECK(back[0].pmi_hours == 12.25);
  CHECK(back[0].source_dataset == SourceDataset::warsaw_v3);
  CHECK(back[1].eye == Eye::unknown);
}

TEST_CASE("ManifestIndex rejects duplicate ids") {
  std::vector<ManifestEntry> entries{{"/x/a.pgm", "s1", 1, Eye::left, "", SourceDataset::other},
                                     {"/y/a.pgm", "s2", 1, Eye::left, "", SourceDataset::other}};
  CHECK_THROWS_AS(ManifestIndex{entries}, InvalidInput);
}
