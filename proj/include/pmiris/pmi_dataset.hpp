#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pmiris {

enum class Eye { left, right, unknown };
enum class SourceDataset { warsaw_v2, warsaw_v3, nij_dcmeo, synthetic, other };

std::string_view to_string(Eye eye);
std::string_view to_string(SourceDataset source);
Eye parse_eye(std::string_view text);
SourceDataset parse_source_dataset(std::string_view text);

struct ManifestEntry {
  std::filesystem::path image_path;
  std::string subject_id;
  double pmi_hours = 0.0;
  Eye eye = Eye::unknown;
  std::string session_id;
  SourceDataset source_dataset = SourceDataset::other;
};

/// Stable identifier of an entry: the file stem of its image path.
std::string image_id(const ManifestEntry& entry);

inline constexpr int kPmiClassCount = 18;
inline constexpr double kPmiBinHours = 24.0;

/// One PMI bin. Classes 1..17 cover ((k-1)*24, k*24]; class 18 is (408, inf).
struct PmiClass {
  int index = 0;
  double lower_hours = 0.0;
  double upper_hours = 0.0;  ///< +infinity for the open-ended class
  friend bool operator==(const PmiClass&, const PmiClass&) = default;
};

PmiClass pmi_class(int index);
PmiClass assign_pmi_class(double pmi_hours);

struct ClassInventory {
  std::array<std::size_t, kPmiClassCount> counts{};

  std::size_t count(int class_index) const { return counts.at(class_index - 1); }
  std::size_t total() const;
};

/// Parses the manifest CSV. Relative image paths are resolved against the
/// manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
std::vector<ManifestEntry> parse_manifest(std::string_view text,
                                          const std::filesystem::path& base_dir = {});
std::string format_manifest(const std::vector<ManifestEntry>& entries);

ClassInventory inventory(const std::vector<ManifestEntry>& entries);

/// `class_index,lower_hours,upper_hours,count`, `inf` for the open bound.
std::string format_inventory_csv(const ClassInventory& inv);

/// Lookup from image id to manifest row. Throws InvalidInput on duplicate ids.
class ManifestIndex {
 public:
  ManifestIndex() = default;
  explicit ManifestIndex(const std::vector<ManifestEntry>& entries);

  const ManifestEntry* find(std::string_view id) const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<ManifestEntry>& entries() const { return entries_; }

 private:
  std::vector<ManifestEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace pmiris
