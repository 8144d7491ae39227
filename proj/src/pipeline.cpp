#include "occreg/pipeline.hpp"

#include <chrono>
#include <cstring>

#include "occreg/dynamic_filter.hpp"
#include "occreg/spatial_index.hpp"

namespace occreg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

class ByteWriter {
 public:
  template <class T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_vec(const Eigen::Vector3d& v) {
    for (int i = 0; i < 3; ++i) put(v[i]);
  }
  void put_pose(const Pose& p) {
    put(p.rotation.w());
    put(p.rotation.x());
    put(p.rotation.y());
    put(p.rotation.z());
    put_vec(p.translation);
  }
  std::vector<std::uint8_t> bytes;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw Error("odometry state: truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  Eigen::Vector3d get_vec() {
    Eigen::Vector3d v;
    for (int i = 0; i < 3; ++i) v[i] = get<double>();
    return v;
  }
  Pose get_pose() {
    const double w = get<double>(), x = get<double>(), y = get<double>(), z = get<double>();
    Pose p;
    p.rotation = Eigen::Quaterniond(w, x, y, z);  // stored normalized; keep the bits
    p.translation = get_vec();
    return p;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

constexpr std::uint32_t kStateMagic = 0x4F445354;  // "ODST"

struct Source {
  std::vector<Eigen::Vector3d> points;
  std::vector<Label> labels;
  std::vector<PointCovariance> covariances;
};

}  // namespace

Odometry::Odometry(OdometryConfig config, LabelTaxonomy taxonomy)
    : config_(std::move(config)), taxonomy_(std::move(taxonomy)) {
  config_.validate();
}

Pose Odometry::predict() const {
  if (trajectory_.empty()) return Pose::identity();
  const Pose& last = trajectory_.back().pose;
  if (config_.motion_model == MotionModel::identity || trajectory_.size() < 2) return last;
  const Pose& before = trajectory_[trajectory_.size() - 2].pose;
  return last * (before.inverse() * last);
}

FrameResult Odometry::initialize(const SemanticPointCloud& first, const VoxelGridSpec& spec) {
  if (first.empty()) throw Error("initialize: first frame is empty");
  spec.validate();
  const auto start = Clock::now();
  map_ = GlobalMap(spec.voxel_size, spec.min_bound);
  trajectory_.clear();
  merged_frames_ = 0;

  FrameResult result;
  result.frame_index = first.frame_index;
  const auto positions = first.positions();
  const auto covs = estimate_covariances(positions, config_.refined.k_neighbors, config_.refined.epsilon_reg);
  result.timings.covariance = ms_since(start);
  const auto merge_start = Clock::now();
  map_.merge_frame(first, Pose::identity(), first.frame_index, covs);
  ++merged_frames_;
  result.timings.merge = ms_since(merge_start);
  trajectory_.push_back({first.frame_index, Pose::identity()});
  initialized_ = true;
  result.map_voxels = map_.size();
  result.timings.total = ms_since(start);
  return result;
}

FrameResult Odometry::process_frame(const SemanticPointCloud& cloud) {
  if (!initialized_) throw Error("process_frame: odometry not initialized");
  if (!trajectory_.empty() && cloud.frame_index <= trajectory_.back().frame_index) {
    throw Error("process_frame: frame indices must increase");
  }
  const auto start = Clock::now();
  FrameResult result;
  result.frame_index = cloud.frame_index;
  result.predicted = predict();
  result.pose = result.predicted;
  result.coarse_pose = result.predicted;

  auto stage = Clock::now();
  std::vector<PointCovariance> frame_covs;
  if (!cloud.empty()) {
    const auto positions = cloud.positions();
    frame_covs = estimate_covariances(positions, config_.refined.k_neighbors, config_.refined.epsilon_reg);
  }
  Source src;
  src.points.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (config_.label_based_filter && taxonomy_.is_movable(cloud.points[i].label)) continue;
    src.points.push_back(cloud.points[i].position);
    src.labels.push_back(cloud.points[i].label);
    src.covariances.push_back(frame_covs[i]);
  }
  result.timings.covariance = ms_since(stage);

  stage = Clock::now();
  MapSnapshot snapshot = config_.pfilter ? extract_persistent(map_, map_.t(), config_.pindex_threshold)
                                         : all_voxels(map_);
  snapshot = local_crop(snapshot, result.predicted.translation, config_.crop_radius);
  if (config_.label_based_filter) {
    MapSnapshot kept;
    for (std::size_t i = 0; i < snapshot.size(); ++i) {
      if (taxonomy_.is_movable(snapshot.labels[i])) continue;
      kept.points.push_back(snapshot.points[i]);
      kept.labels.push_back(snapshot.labels[i]);
      kept.covariances.push_back(snapshot.covariances[i]);
      kept.slots.push_back(snapshot.slots[i]);
    }
    snapshot = std::move(kept);
  }
  result.snapshot_points = snapshot.size();
  // Cells of half the correspondence radius: most searches finish in the 3x3x3 block.
  const double cell = 0.5 * std::min(config_.coarse.max_corr_dist, config_.refined.max_corr_dist);
  const GridIndex index(snapshot.points, 1, cell);
  result.timings.snapshot = ms_since(stage);

  const GicpSource gsrc{src.points, src.covariances};
  const GicpTarget gtgt{index, snapshot.covariances};
  const auto semantic = make_semantic_predicate(src.labels, snapshot.labels);

  try {
    stage = Clock::now();
    std::vector<CorrespondencePredicate> coarse_preds;
    if (config_.coarse_semantic_filter) coarse_preds.push_back(semantic);
    const GicpResult coarse = gicp_align(gsrc, gtgt, result.predicted, config_.coarse, coarse_preds);
    result.coarse_pose = coarse.pose;
    result.coarse_iterations = coarse.iterations;
    result.coarse_correspondences = coarse.correspondence_counts.back();
    result.timings.coarse = ms_since(stage);

    stage = Clock::now();
    std::vector<CorrespondencePredicate> refined_preds;
    if (config_.semantic_filter) refined_preds.push_back(semantic);
    if (config_.dynamic_filter && !config_.label_based_filter) {
      const auto frame_movable = extract_movable(src.labels, taxonomy_);
      const auto map_movable = extract_movable(snapshot.labels, taxonomy_);
      const auto frame_clusters = cluster_points(src.points, src.labels, frame_movable, config_.dynamic.cluster_radius,
                                                 config_.dynamic.min_cluster_size, ClusterSource::frame);
      const auto map_clusters = cluster_points(snapshot.points, snapshot.labels, map_movable,
                                               config_.dynamic.cluster_radius, config_.dynamic.min_cluster_size,
                                               ClusterSource::map);
      const DynamicVerdict verdict = classify_dynamic(frame_clusters, map_clusters, coarse.pose,
                                                      config_.dynamic.displacement_threshold,
                                                      config_.dynamic.match_radius);
      result.dynamic_clusters = verdict.dynamic_objects();
      result.frame_dynamic_points = verdict.frame_dynamic.size();
      result.map_dynamic_points = verdict.map_dynamic.size();
      refined_preds.push_back(dynamic_predicate(verdict));
    }
    result.timings.dynamic = ms_since(stage);

    stage = Clock::now();
    const GicpResult refined = gicp_align(gsrc, gtgt, coarse.pose, config_.refined, refined_preds);
    result.pose = refined.pose;
    result.refined_iterations = refined.iterations;
    result.refined_correspondences = refined.correspondence_counts.back();
    result.timings.refined = ms_since(stage);
  } catch (const RegistrationError& e) {
    result.failed = true;
    result.failure = e.what();
    result.pose = result.predicted;
  }

  if (!result.failed) {
    stage = Clock::now();
    map_.merge_frame(cloud, result.pose, cloud.frame_index, frame_covs);
    ++merged_frames_;
    if (config_.pfilter && config_.downsample_period > 0 &&
        merged_frames_ % static_cast<std::uint32_t>(config_.downsample_period) == 0) {
      map_.downsample_persistent(map_.t(), config_.pindex_threshold);
    }
    result.timings.merge = ms_since(stage);
  }
  trajectory_.push_back({cloud.frame_index, result.pose});
  result.map_voxels = map_.size();
  result.timings.total = ms_since(start);
  return result;
}

std::vector<std::uint8_t> Odometry::save_state() const {
  ByteWriter w;
  w.put(kStateMagic);
  w.put(static_cast<std::uint8_t>(initialized_));
  w.put(merged_frames_);
  w.put(map_.voxel_size());
  w.put_vec(map_.anchor());
  w.put(map_.t());
  w.put(static_cast<std::uint8_t>(map_.has_frames()));
  w.put(static_cast<std::uint64_t>(trajectory_.size()));
  for (const auto& e : trajectory_) {
    w.put(e.frame_index);
    w.put_pose(e.pose);
  }
  w.put(static_cast<std::uint64_t>(map_.size()));
  for (const auto& v : map_.voxels()) {
    for (int i = 0; i < 3; ++i) w.put(v.key[i]);
    w.put_vec(v.position);
    w.put(v.label);
    w.put(v.t0);
    w.put(v.f);
    for (int i = 0; i < 9; ++i) w.put(v.covariance.data()[i]);
    w.put(static_cast<std::uint32_t>(v.label_counts.size()));
    for (const auto& [l, c] : v.label_counts) {
      w.put(l);
      w.put(c);
    }
  }
  return std::move(w.bytes);
}

void Odometry::load_state(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  if (r.get<std::uint32_t>() != kStateMagic) throw Error("odometry state: bad magic");
  const bool initialized = r.get<std::uint8_t>() != 0;
  const auto merged = r.get<std::uint32_t>();
  const auto voxel_size = r.get<double>();
  const Eigen::Vector3d anchor = r.get_vec();
  const auto t = r.get<std::uint32_t>();
  const bool has_frames = r.get<std::uint8_t>() != 0;
  Trajectory trajectory(r.get<std::uint64_t>());
  for (auto& e : trajectory) {
    e.frame_index = r.get<std::uint32_t>();
    e.pose = r.get_pose();
  }
  std::vector<MapVoxel> voxels(r.get<std::uint64_t>());
  for (auto& v : voxels) {
    for (int i = 0; i < 3; ++i) v.key[i] = r.get<int>();
    v.position = r.get_vec();
    v.label = r.get<Label>();
    v.t0 = r.get<std::uint32_t>();
    v.f = r.get<std::uint32_t>();
    for (int i = 0; i < 9; ++i) v.covariance.data()[i] = r.get<double>();
    v.label_counts.resize(r.get<std::uint32_t>());
    for (auto& [l, c] : v.label_counts) {
      l = r.get<Label>();
      c = r.get<std::uint32_t>();
    }
  }
  if (!r.done()) throw Error("odometry state: trailing bytes");
  map_ = GlobalMap::from_voxels(voxel_size, anchor, t, has_frames, std::move(voxels));
  trajectory_ = std::move(trajectory);
  merged_frames_ = merged;
  initialized_ = initialized;
}

SequenceResult run_sequence(const std::vector<SemanticPointCloud>& frames, const VoxelGridSpec& spec,
                            const OdometryConfig& config, const LabelTaxonomy& taxonomy) {
  if (frames.size() < 2) throw Error("run_sequence: at least two frames are required");
  Odometry odo(config, taxonomy);
  SequenceResult out;
  out.frames.push_back(odo.initialize(frames.front(), spec));
  for (std::size_t i = 1; i < frames.size(); ++i) {
    out.frames.push_back(odo.process_frame(frames[i]));
    if (out.frames.back().failed) ++out.failed_frames;
  }
  out.trajectory = odo.trajectory();
  out.map = odo.map();
  return out;
}

LabelTaxonomy resolve_taxonomy(const OdometryConfig& config) {
  if (config.taxonomy.empty()) return LabelTaxonomy::occ3d_default();
  return LabelTaxonomy::load(config.taxonomy);
}

}  // namespace occreg
