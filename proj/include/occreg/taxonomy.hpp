#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "occreg/point_cloud.hpp"

namespace occreg {

struct LabelEntry {
  Label id = 0;
  std::string name;
  bool movable = false;
};

/// Semantic class set with a movable flag per class.
class LabelTaxonomy {
 public:
  LabelTaxonomy() = default;
  /// Throws Error on duplicate ids or when no class is static.
  LabelTaxonomy(std::string id, std::vector<LabelEntry> entries);

  const std::string& id() const { return id_; }
  const std::vector<LabelEntry>& entries() const { return entries_; }

  bool contains(Label label) const { return index_[label] >= 0; }
  bool is_movable(Label label) const { return contains(label) && entries_[index_[label]].movable; }
  std::optional<Label> find(std::string_view name) const;
  /// Throws Error when the name is unknown.
  Label require(std::string_view name) const;
  std::vector<Label> labels() const;

  /// Parses `label_id name movable_flag` lines; `#` starts a comment and an
  /// optional `taxonomy <id>` line names the set.
  static LabelTaxonomy parse(std::string_view text, std::string default_id = "custom");
  static LabelTaxonomy load(const std::filesystem::path& path);
  /// The 17-class set shipped in config/taxonomy.txt.
  static const LabelTaxonomy& occ3d_default();
  static std::string_view occ3d_default_text();

 private:
  std::string id_;
  std::vector<LabelEntry> entries_;
  std::array<int, 256> index_{};
};

}  // namespace occreg
