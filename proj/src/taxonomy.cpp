#include "occreg/taxonomy.hpp"

#include <fstream>
#include <sstream>

#include "occreg/error.hpp"

namespace occreg {

namespace {

constexpr std::string_view kDefaultTaxonomy = R"(# Semantic label taxonomy: label_id name movable_flag
# Class ids follow the Occ3D-nuScenes occupancy benchmark (free space omitted).
taxonomy occ3d-nuscenes
0 others 0
1 barrier 0
2 bicycle 1
3 bus 1
4 car 1
5 construction_vehicle 1
6 motorcycle 1
7 pedestrian 1
8 traffic_cone 0
9 trailer 1
10 truck 1
11 driveable_surface 0
12 other_flat 0
13 sidewalk 0
14 terrain 0
15 manmade 0
16 vegetation 0
)";

}  // namespace

LabelTaxonomy::LabelTaxonomy(std::string id, std::vector<LabelEntry> entries)
    : id_(std::move(id)), entries_(std::move(entries)) {
  index_.fill(-1);
  bool any_static = false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const Label l = entries_[i].id;
    if (index_[l] >= 0) throw Error("taxonomy: duplicate label id " + std::to_string(l));
    index_[l] = static_cast<int>(i);
    any_static = any_static || !entries_[i].movable;
  }
  if (!any_static) throw Error("taxonomy: at least one non-movable label is required");
}

std::optional<Label> LabelTaxonomy::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return e.id;
  }
  return std::nullopt;
}

Label LabelTaxonomy::require(std::string_view name) const {
  if (auto l = find(name)) return *l;
  throw Error("taxonomy '" + id_ + "' has no label named '" + std::string(name) + "'");
}

std::vector<Label> LabelTaxonomy::labels() const {
  std::vector<Label> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.id);
  return out;
}

LabelTaxonomy LabelTaxonomy::parse(std::string_view text, std::string default_id) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::string id = std::move(default_id);
  std::vector<LabelEntry> entries;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    if (first == "taxonomy") {
      if (!(fields >> id)) throw Error("taxonomy line " + std::to_string(line_no) + ": missing id");
      continue;
    }
    LabelEntry e;
    int label_id = -1;
    int movable = -1;
    try {
      label_id = std::stoi(first);
    } catch (const std::exception&) {
      label_id = -1;
    }
    std::string extra;
    if (label_id < 0 || label_id > 255 || !(fields >> e.name >> movable) || (movable != 0 && movable != 1) ||
        (fields >> extra)) {
      throw Error("taxonomy line " + std::to_string(line_no) + ": expected 'label_id name movable_flag'");
    }
    e.id = static_cast<Label>(label_id);
    e.movable = movable == 1;
    entries.push_back(std::move(e));
  }
  return LabelTaxonomy(std::move(id), std::move(entries));
}

LabelTaxonomy LabelTaxonomy::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open taxonomy file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.stem().string());
}

const LabelTaxonomy& LabelTaxonomy::occ3d_default() {
  static const LabelTaxonomy taxonomy = parse(kDefaultTaxonomy);
  return taxonomy;
}

std::string_view LabelTaxonomy::occ3d_default_text() { return kDefaultTaxonomy; }

}  // namespace occreg
