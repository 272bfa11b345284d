#include "pmiris/pmi_dataset.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "pmiris/error.hpp"
#include "pmiris/io.hpp"

namespace pmiris {
namespace {

constexpr std::string_view kManifestHeader =
    "image_path,subject_id,pmi_hours,eye,session_id,source_dataset";

}  // namespace

std::string_view to_string(Eye eye) {
  switch (eye) {
    case Eye::left: return "L";
    case Eye::right: return "R";
    case Eye::unknown: return "U";
  }
  return "U";
}

std::string_view to_string(SourceDataset source) {
  switch (source) {
    case SourceDataset::warsaw_v2: return "warsaw_v2";
    case SourceDataset::warsaw_v3: return "warsaw_v3";
    case SourceDataset::nij_dcmeo: return "nij_dcmeo";
    case SourceDataset::synthetic: return "synthetic";
    case SourceDataset::other: return "other";
  }
  return "other";
}

Eye parse_eye(std::string_view text) {
  if (text == "L") return Eye::left;
  if (text == "R") return Eye::right;
  if (text == "U") return Eye::unknown;
  throw InvalidInput("eye must be one of L, R, U; got '" + std::string(text) + "'");
}

SourceDataset parse_source_dataset(std::string_view text) {
  for (auto s : {SourceDataset::warsaw_v2, SourceDataset::warsaw_v3, SourceDataset::nij_dcmeo,
                 SourceDataset::synthetic, SourceDataset::other}) {
    if (text == to_string(s)) return s;
  }
  throw InvalidInput("unknown source_dataset '" + std::string(text) + "'");
}

std::string image_id(const ManifestEntry& entry) { return entry.image_path.stem().string(); }

PmiClass pmi_class(int index) {
  if (index < 1 || index > kPmiClassCount)
    throw InvalidInput("PMI class index out of range: " + std::to_string(index));
  const double lower = (index - 1) * kPmiBinHours;
  const double upper = index == kPmiClassCount ? std::numeric_limits<double>::infinity()
                                               : index * kPmiBinHours;
  return {index, lower, upper};
}

PmiClass assign_pmi_class(double pmi_hours) {
  if (!std::isfinite(pmi_hours) || pmi_hours <= 0.0)
    throw InvalidInput("pmi_hours must be finite and positive");
  // Half-open bins ((k-1)*24, k*24].
  const double k = std::ceil(pmi_hours / kPmiBinHours);
  const int index = k >= kPmiClassCount ? kPmiClassCount : static_cast<int>(k);
  return pmi_class(index);
}

std::size_t ClassInventory::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  return parse_manifest(io::read_file(path), path.parent_path());
}

std::vector<ManifestEntry> parse_manifest(std::string_view text,
                                          const std::filesystem::path& base_dir) {
  auto lines = io::split_lines(text);
  while (!lines.empty() && io::trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw ParseError("manifest: missing header", 1);
  std::string header = lines.front();
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  if (header != kManifestHeader)
    throw ParseError("manifest: header must be exactly '" + std::string(kManifestHeader) + "'", 1);

  std::vector<ManifestEntry> entries;
  entries.reserve(lines.size() - 1);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const long row = static_cast<long>(i) + 1;  // 1-based line number in file
    const auto fields = io::split_csv_line(lines[i]);
    auto fail = [&](std::string_view field, const std::string& why) -> ParseError {
      return ParseError("manifest row " + std::to_string(row) + ", field " + std::string(field) +
                            ": " + why,
                        row);
    };
    if (fields.size() != 6)
      throw fail("*", "expected 6 fields, got " + std::to_string(fields.size()));
    ManifestEntry e;
    if (fields[0].empty()) throw fail("image_path", "empty");
    e.image_path = fields[0];
    if (e.image_path.is_relative() && !base_dir.empty()) e.image_path = base_dir / e.image_path;
    e.subject_id = fields[1];
    try {
      e.pmi_hours = io::parse_double(fields[2]);
    } catch (const InvalidInput& ex) {
      throw fail("pmi_hours", ex.what());
    }
    if (!std::isfinite(e.pmi_hours) || e.pmi_hours < 0.0)
      throw fail("pmi_hours", "must be finite and non-negative");
    try {
      e.eye = parse_eye(fields[3]);
    } catch (const InvalidInput& ex) {
      throw fail("eye", ex.what());
    }
    e.session_id = fields[4];
    try {
      e.source_dataset = parse_source_dataset(fields[5]);
    } catch (const InvalidInput& ex) {
      throw fail("source_dataset", ex.what());
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string format_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out(kManifestHeader);
  out += '\n';
  for (const auto& e : entries) {
    out += e.image_path.string() + ',' + e.subject_id + ',' + io::format_double(e.pmi_hours) +
           ',' + std::string(to_string(e.eye)) + ',' + e.session_id + ',' +
           std::string(to_string(e.source_dataset)) + '\n';
  }
  return out;
}

ClassInventory inventory(const std::vector<ManifestEntry>& entries) {
  ClassInventory inv;
  for (const auto& e : entries) ++inv.counts[assign_pmi_class(e.pmi_hours).index - 1];
  return inv;
}

std::string format_inventory_csv(const ClassInventory& inv) {
  std::string out = "class_index,lower_hours,upper_hours,count\n";
  for (int k = 1; k <= kPmiClassCount; ++k) {
    const auto c = pmi_class(k);
    out += std::to_string(k) + ',' + io::format_double(c.lower_hours) + ',' +
           (std::isinf(c.upper_hours) ? std::string("inf") : io::format_double(c.upper_hours)) +
           ',' + std::to_string(inv.count(k)) + '\n';
  }
  return out;
}

ManifestIndex::ManifestIndex(const std::vector<ManifestEntry>& entries) : entries_(entries) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto [it, inserted] = by_id_.emplace(image_id(entries_[i]), i);
    if (!inserted) throw InvalidInput("duplicate image id in manifest: " + it->first);
  }
}

const ManifestEntry* ManifestIndex::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

}  // namespace pmiris
