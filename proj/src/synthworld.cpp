#include "occreg/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include "occreg/voxel_map.hpp"

namespace occreg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

Primitive advanced(const Primitive& p, std::uint32_t t) {
  Primitive out = p;
  out.center += p.velocity * static_cast<double>(t);
  return out;
}

/// Signed distance from the center to the nearest surface, >= 0 when inside.
double inside_depth(const Primitive& p, const Eigen::Vector3d& local) {
  switch (p.kind) {
    case PrimitiveKind::column: {
      const double radial = p.extent.x() - std::hypot(local.x(), local.y());
      return std::min(radial, p.extent.z() - std::abs(local.z()));
    }
    case PrimitiveKind::box:
    case PrimitiveKind::strip:
      break;
  }
  return (p.extent - local.cwiseAbs()).minCoeff();
}

Eigen::Vector3d half_extent(const Primitive& p) {
  if (p.kind == PrimitiveKind::column) return {p.extent.x(), p.extent.x(), p.extent.z()};
  return p.extent;
}

Primitive normalized(Primitive p) {
  if (p.kind == PrimitiveKind::strip) p.extent.z() = 0.2;
  return p;
}

}  // namespace

bool NoiseModel::enabled() const {
  return label_flip_rate > 0.0 || dropout_rate > 0.0 || spurious_rate > 0.0 || frustum_range > 0.0;
}

void NoiseModel::validate() const {
  const auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (!rate(label_flip_rate) || !rate(dropout_rate) || !(spurious_rate >= 0.0) || !(frustum_range >= 0.0) ||
      !std::isfinite(spurious_rate)) {
    throw Error("NoiseModel: rates must lie in [0, 1] and spurious_rate must be finite and >= 0");
  }
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(splitmix64(seed ^ splitmix64(stream + 0x5851F42Dull))) {}

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  // Lemire's multiply-shift with rejection.
  std::uint64_t x = engine_();
  __uint128_t m = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = -n % n;
    while (low < threshold) {
      x = engine_();
      m = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t Rng::poisson(double mean) {
  std::uint64_t total = 0;
  while (mean > 0.0) {
    const double chunk = std::min(mean, 500.0);
    mean -= chunk;
    const double limit = std::exp(-chunk);
    double p = 1.0;
    std::uint64_t k = 0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    total += k - 1;
  }
  return total;
}

constexpr double kSnap = 1073741824.0;  // 2^30

SemanticPointCloud render_frame(const WorldModel& world, const Pose& ego_pose, const VoxelGridSpec& spec,
                                std::uint32_t actor_time) {
  spec.validate();
  const auto cells = static_cast<std::size_t>(spec.cell_count());
  std::vector<float> best_depth(cells, std::numeric_limits<float>::infinity());
  std::vector<int> best_label(cells, -1);

  const Pose world_to_ego = ego_pose.inverse();
  const Eigen::Matrix3d ego_r = ego_pose.rotation_matrix();

  auto paint = [&](const Primitive& raw) {
    const Primitive p = normalized(raw);
    const Eigen::Matrix3d pr = Eigen::AngleAxisd(p.yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d he = half_extent(p);

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (int c = 0; c < 8; ++c) {
      const Eigen::Vector3d corner(c & 1 ? he.x() : -he.x(), c & 2 ? he.y() : -he.y(), c & 4 ? he.z() : -he.z());
      const Eigen::Vector3d e = world_to_ego * (p.center + pr * corner);
      lo = lo.cwiseMin(e);
      hi = hi.cwiseMax(e);
    }
    Eigen::Vector3i first, last;
    for (int a = 0; a < 3; ++a) {
      const double f = std::floor((lo[a] - spec.min_bound[a]) / spec.voxel_size - 0.5);
      const double l = std::ceil((hi[a] - spec.min_bound[a]) / spec.voxel_size - 0.5);
      first[a] = static_cast<int>(std::clamp(f, 0.0, static_cast<double>(spec.dims[a])));
      last[a] = static_cast<int>(std::clamp(l, -1.0, static_cast<double>(spec.dims[a] - 1)));
      if (last[a] < first[a]) return;
    }
    const Eigen::Matrix3d to_local = pr.transpose();
    for (int i = first.x(); i <= last.x(); ++i) {
      for (int j = first.y(); j <= last.y(); ++j) {
        for (int k = first.z(); k <= last.z(); ++k) {
          const Eigen::Vector3d c = spec.min_bound + (Eigen::Vector3d(i, j, k).array() + 0.5).matrix() * spec.voxel_size;
          // Snap the world position to 2^-30 m so a center lying on a primitive
          // face gets the same verdict from every ego pose.
          const Eigen::Vector3d w = ((ego_r * c + ego_pose.translation) * kSnap).array().round() / kSnap;
          const double depth = inside_depth(p, to_local * (w - p.center));
          if (depth < 0.0) continue;
          const auto lin = static_cast<std::size_t>(linear_index(spec, {i, j, k}));
          const auto d = static_cast<float>(depth);
          if (d <= best_depth[lin]) {
            best_depth[lin] = d;
            best_label[lin] = p.label;
          }
        }
      }
    }
  };

  for (const auto& p : world.statics) paint(p);
  for (const auto& p : world.actors) paint(advanced(p, actor_time));

  SemanticPointCloud cloud;
  cloud.frame_index = actor_time;
  for (int i = 0; i < spec.dims.x(); ++i) {
    for (int j = 0; j < spec.dims.y(); ++j) {
      for (int k = 0; k < spec.dims.z(); ++k) {
        const auto lin = static_cast<std::size_t>(linear_index(spec, {i, j, k}));
        if (best_label[lin] < 0) continue;
        cloud.points.push_back({voxel_center(spec, {i, j, k}), static_cast<Label>(best_label[lin])});
      }
    }
  }
  return cloud;
}

SemanticPointCloud apply_noise(const SemanticPointCloud& cloud, const NoiseModel& noise, const VoxelGridSpec& spec,
                               const std::vector<Label>& labels) {
  noise.validate();
  if (!noise.enabled()) return cloud;
  if (labels.empty()) throw Error("apply_noise: empty label pool");
  Rng rng(noise.seed, cloud.frame_index);

  SemanticPointCloud out;
  out.frame_index = cloud.frame_index;
  out.taxonomy_id = cloud.taxonomy_id;
  out.points.reserve(cloud.size());
  for (const auto& p : cloud.points) {
    if (noise.frustum_range > 0.0) {
      const double excess = (p.position.norm() - noise.frustum_range) / noise.frustum_range;
      if (rng.uniform() < std::clamp(excess, 0.0, 1.0)) continue;
    }
    if (rng.uniform() < noise.dropout_rate) continue;
    SemanticPoint q = p;
    if (rng.uniform() < noise.label_flip_rate) {
      const auto pos = std::find(labels.begin(), labels.end(), p.label);
      if (pos == labels.end()) {
        q.label = labels[rng.below(labels.size())];
      } else if (labels.size() > 1) {
        auto k = rng.below(labels.size() - 1);
        if (k >= static_cast<std::uint64_t>(pos - labels.begin())) ++k;
        q.label = labels[k];
      }
    }
    out.points.push_back(q);
  }

  const std::uint64_t spurious = rng.poisson(noise.spurious_rate);
  std::unordered_set<std::int64_t> occupied;
  occupied.reserve(out.size() + spurious);
  for (const auto& p : out.points) {
    if (auto idx = voxel_of(spec, p.position)) occupied.insert(linear_index(spec, *idx));
  }
  const auto cells = static_cast<std::uint64_t>(spec.cell_count());
  for (std::uint64_t s = 0; s < spurious && occupied.size() < cells; ++s) {
    std::int64_t lin = 0;
    do {
      lin = static_cast<std::int64_t>(rng.below(cells));
    } while (occupied.count(lin) != 0);
    occupied.insert(lin);
    const int k = static_cast<int>(lin % spec.dims.z());
    const int j = static_cast<int>((lin / spec.dims.z()) % spec.dims.y());
    const int i = static_cast<int>(lin / (static_cast<std::int64_t>(spec.dims.z()) * spec.dims.y()));
    out.points.push_back({voxel_center(spec, {i, j, k}), labels[rng.below(labels.size())]});
  }
  return out;
}

GeneratedSequence generate_sequence(const WorldModel& world, const std::vector<Pose>& trajectory,
                                    const VoxelGridSpec& spec, const NoiseModel& noise,
                                    const LabelTaxonomy& taxonomy) {
  if (trajectory.size() < 2) throw Error("generate_sequence: at least two poses are required");
  noise.validate();
  GeneratedSequence out;
  const auto labels = taxonomy.labels();
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    const auto t = static_cast<std::uint32_t>(i);
    SemanticPointCloud frame = render_frame(world, trajectory[i], spec, t);
    frame.taxonomy_id = taxonomy.id();
    out.frames.push_back(apply_noise(frame, noise, spec, labels));
    out.ground_truth.push_back({t, trajectory[i]});
  }
  return out;
}

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct WorldBuilder {
  const LabelTaxonomy& taxonomy;
  WorldModel world;

  Label label(std::string_view name) const { return taxonomy.require(name); }

  void strip(std::string_view name, double x0, double x1, double y0, double y1) {
    world.statics.push_back({PrimitiveKind::strip, label(name), {(x0 + x1) / 2, (y0 + y1) / 2, 0.0}, 0.0,
                             {(x1 - x0) / 2, (y1 - y0) / 2, 0.2}, Eigen::Vector3d::Zero()});
  }

  void box(std::string_view name, const Eigen::Vector3d& center, double yaw, const Eigen::Vector3d& half) {
    world.statics.push_back({PrimitiveKind::box, label(name), center, yaw, half, Eigen::Vector3d::Zero()});
  }

  // Axis-aligned slab standing on the ground, top at `height`.
  void wall(double x0, double x1, double y0, double y1, double height) {
    box("manmade", {(x0 + x1) / 2, (y0 + y1) / 2, height / 2}, 0.0, {(x1 - x0) / 2, (y1 - y0) / 2, height / 2});
  }

  void building(double x0, double x1, double y0, double y1, double height) {
    constexpr double t = 0.6;
    wall(x0, x1, y0, y0 + t, height);
    wall(x0, x1, y1 - t, y1, height);
    wall(x0, x0 + t, y0 + t, y1 - t, height);
    wall(x1 - t, x1, y0 + t, y1 - t, height);
  }

  void column(std::string_view name, double x, double y, double radius, double height) {
    world.statics.push_back({PrimitiveKind::column, label(name), {x, y, height / 2}, 0.0, {radius, radius, height / 2},
                             Eigen::Vector3d::Zero()});
  }

  void actor(std::string_view name, const Eigen::Vector3d& center, double yaw, const Eigen::Vector3d& half,
             const Eigen::Vector3d& velocity) {
    if (!taxonomy.is_movable(label(name))) throw Error("actor label '" + std::string(name) + "' is not movable");
    world.actors.push_back({PrimitiveKind::box, label(name), center, yaw, half, velocity});
  }
};

/// Poses from per-step (forward distance, yaw change) pairs, starting at identity.
std::vector<Pose> integrate_path(std::uint32_t frames, const std::function<std::pair<double, double>(std::uint32_t)>& step) {
  std::vector<Pose> out;
  double x = 0.0, y = 0.0, heading = 0.0;
  for (std::uint32_t i = 0; i < frames; ++i) {
    out.push_back(Pose::from_yaw(heading, {x, y, 0.0}));
    const auto [forward, turn] = step(i);
    const double mid = heading + turn / 2;
    x += forward * std::cos(mid);
    y += forward * std::sin(mid);
    heading += turn;
  }
  return out;
}

// Vehicles start from rest and change speed by at most 0.5 m per frame.
double ramp(std::uint32_t i, double cruise) { return std::min(cruise, 0.5 * i); }

void path_bounds(const std::vector<Pose>& path, double margin, double& x0, double& x1, double& y0, double& y1) {
  x0 = y0 = std::numeric_limits<double>::infinity();
  x1 = y1 = -x0;
  for (const auto& p : path) {
    x0 = std::min(x0, p.translation.x());
    x1 = std::max(x1, p.translation.x());
    y0 = std::min(y0, p.translation.y());
    y1 = std::max(y1, p.translation.y());
  }
  x0 -= margin;
  x1 += margin;
  y0 -= margin;
  y1 += margin;
}

// City grid with 40 m pitch: 12 m roads, 3 m sidewalks, one hollow building
// per block plus street trees and a few cones and barriers.
Scenario urban_block(const PresetOptions& opt, const LabelTaxonomy& taxonomy) {
  Scenario sc;
  sc.name = "urban-block";
  // Straight along +x, a 90 degree left turn at the x = 80 m crossing with the
  // yaw rate ramped 3, 6, .. 15, 15, .. 3 degrees, then straight along +y.
  sc.trajectory = integrate_path(opt.frames, [](std::uint32_t i) {
    static constexpr double turn[] = {3, 6, 9, 12, 15, 15, 12, 9, 6, 3};
    const double yaw = i >= 18 && i < 28 ? turn[i - 18] * kDeg : 0.0;
    return std::pair{ramp(i, 4.0), yaw};
  });
  double x0, x1, y0, y1;
  path_bounds(sc.trajectory, 80.0, x0, x1, y0, y1);

  WorldBuilder b{taxonomy, {}};
  Rng rng(opt.seed, 0xB10C);
  constexpr double pitch = 40.0;
  b.strip("driveable_surface", x0, x1, y0, y1);
  const auto bx0 = static_cast<int>(std::floor(x0 / pitch)), bx1 = static_cast<int>(std::ceil(x1 / pitch));
  const auto by0 = static_cast<int>(std::floor(y0 / pitch)), by1 = static_cast<int>(std::ceil(y1 / pitch));
  for (int i = bx0; i < bx1; ++i) {
    for (int j = by0; j < by1; ++j) {
      const double cx = i * pitch, cy = j * pitch;  // block spans (cx + 6, cx + 34)
      b.strip("sidewalk", cx + 6, cx + 34, cy + 6, cy + 34);
      b.strip(rng.uniform() < 0.5 ? "terrain" : "other_flat", cx + 9, cx + 31, cy + 9, cy + 31);
      const double inset = rng.uniform(0.0, 3.0);
      b.building(cx + 10 + inset, cx + 30 - rng.uniform(0.0, 3.0), cy + 10 + rng.uniform(0.0, 3.0),
                 cy + 30 - inset, rng.uniform(6.0, 12.0));
      // Street trees along two sidewalk edges with jittered spacing.
      for (double s = 8.0 + rng.uniform(0.0, 4.0); s < 32.0; s += rng.uniform(7.0, 13.0)) {
        b.column("vegetation", cx + s, cy + 7.5, rng.uniform(0.8, 1.4), rng.uniform(4.0, 6.0));
        b.column("vegetation", cx + 32.5, cy + 40 - s, rng.uniform(0.8, 1.4), rng.uniform(4.0, 6.0));
      }
      if (rng.uniform() < 0.5) b.column("traffic_cone", cx + 4.5 + rng.uniform(0.0, 1.0), cy + rng.uniform(12.0, 28.0), 0.3, 0.8);
      if (rng.uniform() < 0.5) {
        b.box("barrier", {cx + rng.uniform(12.0, 28.0), cy + 35.5, 0.5}, rng.uniform(-0.2, 0.2), {1.5, 0.3, 0.5});
      }
    }
  }
  sc.world = std::move(b.world);
  return sc;
}

// Straight four-lane street lined by buildings of irregular length and
// setback, with trees, a parked bus and up to three moving vehicles.
Scenario dynamic_traffic(const PresetOptions& opt, const LabelTaxonomy& taxonomy) {
  Scenario sc;
  sc.name = "dynamic-traffic";
  sc.trajectory = integrate_path(opt.frames, [](std::uint32_t i) { return std::pair{ramp(i, 3.5), 0.0}; });
  double x0, x1, y0, y1;
  path_bounds(sc.trajectory, 80.0, x0, x1, y0, y1);

  WorldBuilder b{taxonomy, {}};
  Rng rng(opt.seed, 0xD7A);
  b.strip("terrain", x0, x1, -40.0, 40.0);
  b.strip("driveable_surface", x0, x1, -9.0, 9.0);
  b.strip("sidewalk", x0, x1, 9.0, 13.0);
  b.strip("sidewalk", x0, x1, -13.0, -9.0);
  for (double side : {-1.0, 1.0}) {
    for (double x = x0 + rng.uniform(0.0, 10.0); x < x1;) {
      const double len = rng.uniform(15.0, 40.0);
      const double near = rng.uniform(13.5, 16.0), far = near + rng.uniform(8.0, 14.0);
      const double height = rng.uniform(6.0, 14.0);
      if (side > 0) {
        b.building(x, x + len, near, far, height);
      } else {
        b.building(x, x + len, -far, -near, height);
      }
      x += len + rng.uniform(4.0, 12.0);
    }
    for (double s = x0 + rng.uniform(0.0, 10.0); s < x1; s += rng.uniform(10.0, 20.0)) {
      b.column("vegetation", s, side * 11.0, rng.uniform(0.8, 1.2), rng.uniform(4.0, 6.0));
    }
  }
  if (opt.stationary_bus) {
    b.actor("bus", {rng.uniform(20.0, 40.0), -7.0, 1.6}, 0.0, {6.0, 1.25, 1.6}, Eigen::Vector3d::Zero());
  }
  const double jitter = rng.uniform(0.85, 1.15);
  struct Mover {
    const char* label;
    Eigen::Vector3d start;
    Eigen::Vector3d half;
    double speed;
  };
  const Mover movers[] = {
      {"bus", {rng.uniform(10.0, 20.0), 3.0, 1.6}, {6.0, 1.25, 1.6}, 3.0 * jitter},
      {"car", {rng.uniform(80.0, 110.0), -3.0, 0.8}, {2.2, 0.9, 0.8}, -4.0 * jitter},
      {"car", {rng.uniform(-10.0, 0.0), 6.5, 0.8}, {2.2, 0.9, 0.8}, 2.5 * jitter},
  };
  for (std::size_t i = 0; i < std::min<std::size_t>(opt.moving_actors, 3); ++i) {
    b.actor(movers[i].label, movers[i].start, 0.0, movers[i].half, {movers[i].speed, 0.0, 0.0});
  }
  sc.world = std::move(b.world);
  return sc;
}

// Long straight flat road with nothing standing on it. The surface is cut
// into cross stripes one to two voxels long, so only the labels fix the
// along-road position.
Scenario slip_road(const PresetOptions& opt, const LabelTaxonomy& taxonomy) {
  Scenario sc;
  sc.name = "slip-road";
  sc.trajectory = integrate_path(opt.frames, [](std::uint32_t i) { return std::pair{ramp(i, 2.0), 0.0}; });
  double x0, x1, y0, y1;
  path_bounds(sc.trajectory, 80.0, x0, x1, y0, y1);

  WorldBuilder b{taxonomy, {}};
  Rng rng(opt.seed, 0x511B);
  // Four flat classes and no class repeats within three stripes: with two
  // classes, stripes this narrow alias at a 1 m offset.
  static constexpr std::string_view kFlat[] = {"driveable_surface", "sidewalk", "other_flat", "terrain"};
  std::size_t last = 0, before = 1;
  for (double x = x0; x < x1;) {
    std::vector<std::size_t> free;
    for (std::size_t k = 0; k < 4; ++k) {
      if (k != last && k != before) free.push_back(k);
    }
    const std::size_t pick = free[rng.below(free.size())];
    const double len = rng.uniform(0.4, 1.0);
    b.strip(kFlat[pick], x, x + len, y0 - 40.0, y1 + 40.0);
    before = last;
    last = pick;
    x += len;
  }
  sc.world = std::move(b.world);
  return sc;
}

}  // namespace

std::vector<std::string> preset_names() { return {"urban-block", "dynamic-traffic", "slip-road"}; }

Scenario make_preset(std::string_view name, const PresetOptions& options, const LabelTaxonomy& taxonomy) {
  if (options.frames == 0) throw Error("make_preset: frame count must be positive");
  if (name == "urban-block") return urban_block(options, taxonomy);
  if (name == "dynamic-traffic") return dynamic_traffic(options, taxonomy);
  if (name == "slip-road") return slip_road(options, taxonomy);
  throw Error("unknown preset '" + std::string(name) + "'");
}

WorldModel parse_scene(std::string_view text, const LabelTaxonomy& taxonomy) {
  WorldModel world;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::string kind, label_text;
    if (!(fields >> kind)) continue;
    const auto fail = [&](const std::string& why) {
      return Error("scene line " + std::to_string(line_no) + ": " + why);
    };
    Primitive p;
    if (!(fields >> label_text >> p.center.x() >> p.center.y() >> p.center.z() >> p.yaw >> p.extent.x() >>
          p.extent.y() >> p.extent.z())) {
      throw fail("expected kind label x y z yaw ex ey ez [vx vy vz]");
    }
    if (fields >> p.velocity.x()) {
      if (!(fields >> p.velocity.y() >> p.velocity.z())) throw fail("velocity needs three components");
    }
    std::string extra;
    if (fields >> extra) throw fail("unexpected trailing field '" + extra + "'");

    if (auto named = taxonomy.find(label_text)) {
      p.label = *named;
    } else {
      try {
        const int id = std::stoi(label_text);
        if (id < 0 || id > 255 || !taxonomy.contains(static_cast<Label>(id))) throw fail("unknown label " + label_text);
        p.label = static_cast<Label>(id);
      } catch (const std::logic_error&) {
        throw fail("unknown label '" + label_text + "'");
      }
    }
    if (!p.center.allFinite() || !std::isfinite(p.yaw) || !(p.extent.array() > 0.0).all() ||
        !p.velocity.allFinite()) {
      throw fail("non-finite value or non-positive extent");
    }

    if (kind == "actor") {
      if (!taxonomy.is_movable(p.label)) throw fail("actor label must be movable");
      world.actors.push_back(p);
      continue;
    }
    if (!p.velocity.isZero()) throw fail("static primitives cannot move");
    if (kind == "static-box") {
      p.kind = PrimitiveKind::box;
    } else if (kind == "static-column") {
      p.kind = PrimitiveKind::column;
    } else if (kind == "static-strip") {
      p.kind = PrimitiveKind::strip;
    } else {
      throw fail("unknown kind '" + kind + "'");
    }
    world.statics.push_back(normalized(p));
  }
  return world;
}

WorldModel load_scene(const std::filesystem::path& path, const LabelTaxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scene file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str(), taxonomy);
}

GroundTruthMap assemble_ground_truth_map(const std::vector<SemanticPointCloud>& frames, const Trajectory& poses,
                                         const VoxelGridSpec& frame_spec, const LabelTaxonomy& taxonomy) {
  if (frames.size() != poses.size()) throw Error("assemble_ground_truth_map: frame and pose counts differ");
  GlobalMap map(frame_spec.voxel_size, frame_spec.min_bound);
  std::unordered_map<VoxelKey, Label, VoxelKeyHash, VoxelKeyEqual> first_label;
  GroundTruthMap out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Pose& pose = poses[i].pose;
    for (const auto& p : frames[i].points) {
      if (taxonomy.is_movable(p.label)) continue;
      const auto [it, inserted] = first_label.try_emplace(map.key_of(pose * p.position), p.label);
      if (!inserted && it->second != p.label) ++out.label_conflicts;
    }
    SemanticPointCloud statics;
    statics.frame_index = frames[i].frame_index;
    for (const auto& p : frames[i].points) {
      if (!taxonomy.is_movable(p.label)) statics.points.push_back(p);
    }
    map.merge_frame(statics, pose, poses[i].frame_index);
  }
  auto [cloud, spec] = export_map(map);
  out.cloud = std::move(cloud);
  out.cloud.taxonomy_id = taxonomy.id();
  out.spec = spec;
  return out;
}

}  // namespace occreg
