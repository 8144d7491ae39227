#include <doctest.h>

#include <map>

#include "occreg/dynamic_filter.hpp"
#include "support.hpp"

using namespace occreg;

namespace {

const LabelTaxonomy& tax() { return LabelTaxonomy::occ3d_default(); }
Label L(const char* name) { return tax().require(name); }

// A 3x3x2 voxel block (18 points) around `center`.
void add_block(std::vector<Eigen::Vector3d>& pts, std::vector<Label>& labels, const Eigen::Vector3d& center, Label l) {
  for (int i = -1; i <= 1; ++i) {
    for (int j = -1; j <= 1; ++j) {
      for (int k = 0; k < 2; ++k) {
        pts.push_back(center + 0.4 * Eigen::Vector3d(i, j, k));
        labels.push_back(l);
      }
    }
  }
}

std::vector<std::size_t> all_ids(std::size_t n) {
  std::vector<std::size_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  return ids;
}

struct Blocks {
  std::vector<Eigen::Vector3d> pts;
  std::vector<Label> labels;
  std::vector<ObjectCluster> clusters(ClusterSource source) const {
    const auto ids = all_ids(pts.size());
    return cluster_points(pts, labels, ids, 0.9, 5, source);
  }
};

// Straight from the operation's definition, with brute-force matching.
DynamicVerdict oracle_classify(const std::vector<ObjectCluster>& fc, const std::vector<ObjectCluster>& mc,
                               const Pose& pose, double threshold, double match_radius) {
  std::set<std::size_t> da, db;
  for (const auto& f : fc) {
    const Eigen::Vector3d c = pose_apply(pose, f.centroid);
    const ObjectCluster* best = nullptr;
    double best_d = 0.0;
    for (const auto& m : mc) {
      if (m.label != f.label) continue;
      const double d = (m.centroid - c).norm();
      if (d > match_radius) continue;
      if (!best || d < best_d || (d == best_d && m.point_ids.front() < best->point_ids.front())) {
        best = &m;
        best_d = d;
      }
    }
    if (best && best_d <= threshold) continue;
    da.insert(f.point_ids.begin(), f.point_ids.end());
    if (best) db.insert(best->point_ids.begin(), best->point_ids.end());
  }
  DynamicVerdict v;
  v.frame_dynamic.assign(da.begin(), da.end());
  v.map_dynamic.assign(db.begin(), db.end());
  return v;
}

}  // namespace

TEST_CASE("extract_movable") {
  SemanticPointCloud road;
  for (int i = 0; i < 10; ++i) road.points.push_back({{0.4 * i, 0, 0}, L("driveable_surface")});
  CHECK(extract_movable(road, tax()).empty());

  SemanticPointCloud mixed = road;
  for (std::size_t i : {1u, 3u, 5u, 7u, 9u}) mixed.points[i].label = L("car");
  CHECK(extract_movable(mixed, tax()) == std::vector<std::size_t>{1, 3, 5, 7, 9});

  SemanticPointCloud random;
  for (int i = 0; i < 1000; ++i) random.points.push_back({{0, 0, 0}, static_cast<Label>(testing::uniform(0, 17))});
  std::vector<std::size_t> want;
  for (std::size_t i = 0; i < random.size(); ++i) {
    const auto& name = tax().entries()[random.points[i].label].name;
    if (name == "bicycle" || name == "bus" || name == "car" || name == "construction_vehicle" ||
        name == "motorcycle" || name == "pedestrian" || name == "trailer" || name == "truck") {
      want.push_back(i);
    }
  }
  CHECK(extract_movable(random, tax()) == want);
}

TEST_CASE("cluster examples") {
  std::vector<Eigen::Vector3d> pts;
  std::vector<Label> labels;
  for (int i = 0; i < 10; ++i) {
    pts.push_back(testing::random_vector(0.3));
    labels.push_back(L("car"));
  }
  for (int i = 0; i < 10; ++i) {
    pts.push_back(Eigen::Vector3d(10, 0, 0) + testing::random_vector(0.3));
    labels.push_back(L("car"));
  }
  CHECK(cluster_points(pts, labels, all_ids(pts.size()), 0.9, 5).size() == 2);

  pts.clear();
  labels.clear();
  for (int i = 0; i < 20; ++i) {
    pts.push_back({0.4 * i, 0, 0});
    labels.push_back(L("bus"));
  }
  const auto line = cluster_points(pts, labels, all_ids(pts.size()), 0.6, 5);
  REQUIRE(line.size() == 1);
  CHECK(line[0].point_ids.size() == 20);
  CHECK((line[0].centroid - Eigen::Vector3d(0.4 * 9.5, 0, 0)).norm() < 1e-12);
  CHECK(line[0].label == L("bus"));

  // Below min size
  CHECK(cluster_points(pts, labels, std::vector<std::size_t>{0, 1, 2, 3}, 0.6, 5).empty());
}

TEST_CASE("dominant label prefers the lower id on ties") {
  std::vector<Eigen::Vector3d> pts;
  std::vector<Label> labels;
  for (int i = 0; i < 6; ++i) {
    pts.push_back({0.4 * i, 0, 0});
    labels.push_back(i % 2 ? L("truck") : L("car"));
  }
  const auto c = cluster_points(pts, labels, all_ids(6), 0.6, 5);
  REQUIRE(c.size() == 1);
  CHECK(c[0].label == std::min(L("truck"), L("car")));
}

TEST_CASE("clusters match a union-find oracle") {
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<Eigen::Vector3d> pts;
    std::vector<Label> labels;
    const int n = 50 + static_cast<int>(testing::uniform(0, 400));
    const double spread = testing::uniform(3, 12);
    for (int i = 0; i < n; ++i) {
      // Lattice points make exact-radius contacts common.
      Eigen::Vector3d p = testing::random_vector(spread);
      if (i % 2) p = (p / 0.4).array().round() * 0.4;
      pts.push_back(p);
      labels.push_back(L("car"));
    }
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (testing::uniform(0, 1) < 0.8) ids.push_back(i);
    }
    const double radius = trial % 3 == 0 ? 0.8 : testing::uniform(0.3, 1.5);
    const std::size_t min_size = 1 + static_cast<std::size_t>(testing::uniform(0, 6));
    const auto got = cluster_points(pts, labels, ids, radius, min_size);
    std::vector<std::vector<std::size_t>> want;
    for (auto& g : testing::union_find_components(pts, ids, radius)) {
      if (g.size() >= min_size) want.push_back(g);
    }
    REQUIRE(got.size() == want.size());
    for (std::size_t c = 0; c < got.size(); ++c) {
      CHECK(got[c].point_ids == want[c]);
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (auto id : want[c]) mean += pts[id];
      mean /= static_cast<double>(want[c].size());
      CHECK((got[c].centroid - mean).norm() < 1e-12);
    }
  }
}

TEST_CASE("classify_dynamic examples") {
  const Label car = L("car");
  for (double moved : {0.0, 1.0, 3.0}) {
    Blocks frame, map;
    add_block(frame.pts, frame.labels, {5, 0, 0.2}, car);
    add_block(map.pts, map.labels, {5 + moved, 0, 0.2}, car);
    const auto fc = frame.clusters(ClusterSource::frame), mc = map.clusters(ClusterSource::map);
    REQUIRE(fc.size() == 1);
    REQUIRE(mc.size() == 1);
    const auto v = classify_dynamic(fc, mc, Pose::identity(), 2.0, 4.0);
    REQUIRE(v.objects.size() == 1);
    CHECK(std::abs(v.objects[0].displacement - moved) < 1e-12);
    if (moved > 2.0) {
      CHECK(v.frame_dynamic.size() == 18);
      CHECK(v.map_dynamic.size() == 18);
      CHECK(v.dynamic_objects() == 1);
    } else {
      CHECK(v.frame_dynamic.empty());
      CHECK(v.map_dynamic.empty());
    }
  }
}

TEST_CASE("classify_dynamic uses the coarse pose and the label") {
  Blocks frame, map;
  add_block(frame.pts, frame.labels, {0, 0, 0.2}, L("car"));
  add_block(map.pts, map.labels, {10, 5, 0.2}, L("car"));
  add_block(map.pts, map.labels, {10, 5.5, 2.0}, L("truck"));
  const auto fc = frame.clusters(ClusterSource::frame), mc = map.clusters(ClusterSource::map);
  REQUIRE(mc.size() == 2);
  const auto v = classify_dynamic(fc, mc, Pose::from_translation({10, 5, 0}), 2.0, 4.0);
  CHECK(v.frame_dynamic.empty());
  REQUIRE(v.objects.size() == 1);
  CHECK(v.objects[0].map_cluster == std::optional<std::size_t>(0));

  // Unmatched: new object, no same-label cluster within reach.
  const auto far = classify_dynamic(fc, mc, Pose::identity(), 2.0, 4.0);
  CHECK(far.frame_dynamic.size() == 18);
  CHECK(far.map_dynamic.empty());
  CHECK(std::isinf(far.objects[0].displacement));
  const auto inf = classify_dynamic(fc, mc, Pose::identity(), std::numeric_limits<double>::infinity(), 4.0);
  CHECK(inf.frame_dynamic.empty());
}

TEST_CASE("classify_dynamic matches an oracle, ignores cluster order and is monotone in the threshold") {
  const std::vector<Label> movable{L("car"), L("bus"), L("pedestrian")};
  for (int trial = 0; trial < 40; ++trial) {
    Blocks frame, map;
    const int objects = 2 + static_cast<int>(testing::uniform(0, 8));
    for (int o = 0; o < objects; ++o) {
      const Eigen::Vector3d c(testing::uniform(-30, 30), testing::uniform(-30, 30), 0.2);
      const Label l = movable[static_cast<std::size_t>(testing::uniform(0, 3))];
      if (testing::uniform(0, 1) < 0.9) add_block(frame.pts, frame.labels, c, l);
      if (testing::uniform(0, 1) < 0.9) {
        const Eigen::Vector3d shift(testing::uniform(-4, 4), testing::uniform(-4, 4), 0);
        add_block(map.pts, map.labels, c + shift, l);
      }
    }
    auto fc = frame.clusters(ClusterSource::frame), mc = map.clusters(ClusterSource::map);
    const Pose pose = testing::random_pose(0.02, 0.3);
    const auto v = classify_dynamic(fc, mc, pose, 2.0, 4.0);
    const auto o = oracle_classify(fc, mc, pose, 2.0, 4.0);
    CHECK(v.frame_dynamic == o.frame_dynamic);
    CHECK(v.map_dynamic == o.map_dynamic);

    std::reverse(fc.begin(), fc.end());
    std::reverse(mc.begin(), mc.end());
    const auto r = classify_dynamic(fc, mc, pose, 2.0, 4.0);
    CHECK(r.frame_dynamic == v.frame_dynamic);
    CHECK(r.map_dynamic == v.map_dynamic);

    std::size_t previous = std::numeric_limits<std::size_t>::max();
    bool monotone = true;
    for (double th : {0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 10.0, std::numeric_limits<double>::infinity()}) {
      const auto t = classify_dynamic(fc, mc, pose, th, 4.0);
      monotone = monotone && t.frame_dynamic.size() <= previous;
      previous = t.frame_dynamic.size();
      if (std::isinf(th)) {
        CHECK(t.frame_dynamic.empty());
        CHECK(t.map_dynamic.empty());
      }
    }
    CHECK(monotone);

    // DA only holds movable frame points, each in exactly one dynamic cluster.
    std::map<std::size_t, int> owners;
    for (const auto& obj : v.objects) {
      if (!obj.dynamic) continue;
      for (auto id : fc[fc.size() - 1 - obj.frame_cluster].point_ids) ++owners[id];
    }
    std::size_t bad = 0;
    for (auto id : v.frame_dynamic) {
      if (!tax().is_movable(frame.labels[id]) || owners[id] != 1) ++bad;
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("dynamic predicate") {
  DynamicVerdict empty;
  const auto always = dynamic_predicate(empty);
  for (std::size_t i = 0; i < 20; ++i) CHECK(always({i, 19 - i, 0.0}));

  DynamicVerdict v;
  v.frame_dynamic = {2, 5, 9};
  v.map_dynamic = {0, 7};
  const auto pred = dynamic_predicate(v);
  CHECK_FALSE(pred({5, 3, 0.0}));
  CHECK_FALSE(pred({5, 0, 0.0}));
  CHECK_FALSE(pred({4, 7, 0.0}));
  CHECK(pred({4, 3, 0.0}));

  for (int trial = 0; trial < 20; ++trial) {
    std::set<std::size_t> da, db;
    for (int i = 0; i < 30; ++i) da.insert(static_cast<std::size_t>(testing::uniform(0, 100)));
    for (int i = 0; i < 30; ++i) db.insert(static_cast<std::size_t>(testing::uniform(0, 100)));
    DynamicVerdict r;
    r.frame_dynamic.assign(da.begin(), da.end());
    r.map_dynamic.assign(db.begin(), db.end());
    const auto p = dynamic_predicate(r);
    std::size_t bad = 0;
    for (std::size_t a = 0; a < 120; ++a) {
      for (std::size_t b = 0; b < 120; b += 3) {
        if (p({a, b, 0.0}) != (!da.count(a) && !db.count(b))) ++bad;
      }
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("label-based filter") {
  SemanticPointCloud road;
  road.frame_index = 4;
  for (int i = 0; i < 10; ++i) road.points.push_back({{0.4 * i, 0, 0}, L("sidewalk")});
  CHECK(label_based_filter(road, tax()) == road);

  SemanticPointCloud cars = road;
  for (auto& p : cars.points) p.label = L("car");
  CHECK(label_based_filter(cars, tax()).empty());

  SemanticPointCloud mixed;
  for (int i = 0; i < 500; ++i) mixed.points.push_back({testing::random_vector(5), static_cast<Label>(testing::uniform(0, 17))});
  const auto kept = label_based_filter(mixed, tax());
  const auto movable = extract_movable(mixed, tax());
  std::vector<SemanticPoint> want;
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    if (!std::binary_search(movable.begin(), movable.end(), i)) want.push_back(mixed.points[i]);
  }
  CHECK(kept.points == want);
  CHECK(kept.size() + movable.size() == mixed.size());
}
