#include "occreg/occ_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <regex>
#include <sstream>

namespace occreg {

namespace {

static_assert(std::endian::native == std::endian::little, "the .socc codec assumes a little-endian host");

template <class T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw IoError(IoErrorKind::truncated, "socc: unexpected end of data");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const char* to_string(IoErrorKind kind) {
  switch (kind) {
    case IoErrorKind::open_failed: return "open_failed";
    case IoErrorKind::bad_magic: return "bad_magic";
    case IoErrorKind::version_mismatch: return "version_mismatch";
    case IoErrorKind::truncated: return "truncated";
    case IoErrorKind::invalid_header: return "invalid_header";
    case IoErrorKind::index_out_of_range: return "index_out_of_range";
    case IoErrorKind::duplicate_voxel: return "duplicate_voxel";
    case IoErrorKind::trailing_data: return "trailing_data";
    case IoErrorKind::invalid_cloud: return "invalid_cloud";
    case IoErrorKind::malformed_line: return "malformed_line";
    case IoErrorKind::non_monotone_index: return "non_monotone_index";
    case IoErrorKind::non_unit_quaternion: return "non_unit_quaternion";
    case IoErrorKind::empty_directory: return "empty_directory";
    case IoErrorKind::inconsistent_spec: return "inconsistent_spec";
  }
  return "unknown";
}

IoError::IoError(IoErrorKind kind, const std::string& what)
    : Error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

std::vector<std::uint8_t> encode_frame(const SemanticPointCloud& cloud, const VoxelGridSpec& spec) {
  if (!spec.valid()) throw IoError(IoErrorKind::invalid_header, "invalid voxel grid spec");
  if ((spec.dims.array() > 65535).any()) {
    throw IoError(IoErrorKind::invalid_header, "grid dims exceed the u16 index range");
  }
  if (auto problem = check_voxel_uniqueness(cloud, spec); !problem.empty()) {
    throw IoError(IoErrorKind::invalid_cloud, problem);
  }

  std::vector<std::uint8_t> out;
  out.reserve(kSoccHeaderBytes + kSoccRecordBytes * cloud.size());
  for (char c : {'S', 'O', 'C', 'C'}) put<std::uint8_t>(out, static_cast<std::uint8_t>(c));
  put<std::uint32_t>(out, kSoccVersion);
  put<double>(out, spec.voxel_size);
  for (int a = 0; a < 3; ++a) put<double>(out, spec.min_bound[a]);
  for (int a = 0; a < 3; ++a) put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.dims[a]));
  put<std::uint32_t>(out, cloud.frame_index);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.size()));
  for (const auto& p : cloud.points) {
    const VoxelIndex idx = *voxel_of(spec, p.position);
    for (int a = 0; a < 3; ++a) put<std::uint16_t>(out, static_cast<std::uint16_t>(idx[a]));
    put<std::uint8_t>(out, p.label);
  }
  return out;
}

OccupancyFrame decode_frame(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw IoError(IoErrorKind::truncated, "socc: file shorter than magic");
  if (std::memcmp(bytes.data(), "SOCC", 4) != 0) throw IoError(IoErrorKind::bad_magic, "socc: magic is not SOCC");
  Reader in(bytes);
  in.get<std::uint32_t>();  // magic, already checked
  const auto version = in.get<std::uint32_t>();
  if (version != kSoccVersion) {
    throw IoError(IoErrorKind::version_mismatch, "socc: unsupported version " + std::to_string(version));
  }

  OccupancyFrame frame;
  frame.spec.voxel_size = in.get<double>();
  for (int a = 0; a < 3; ++a) frame.spec.min_bound[a] = in.get<double>();
  for (int a = 0; a < 3; ++a) {
    const auto d = in.get<std::uint32_t>();
    if (d == 0 || d > 65535) throw IoError(IoErrorKind::invalid_header, "socc: dims out of range");
    frame.spec.dims[a] = static_cast<int>(d);
  }
  frame.cloud.frame_index = in.get<std::uint32_t>();
  const auto count = in.get<std::uint32_t>();
  if (!frame.spec.valid()) throw IoError(IoErrorKind::invalid_header, "socc: invalid voxel grid spec");
  if (static_cast<std::int64_t>(count) > frame.spec.cell_count()) {
    throw IoError(IoErrorKind::invalid_header, "socc: count exceeds number of cells");
  }
  if (in.remaining() < static_cast<std::size_t>(count) * kSoccRecordBytes) {
    throw IoError(IoErrorKind::truncated, "socc: fewer records than declared");
  }
  if (in.remaining() > static_cast<std::size_t>(count) * kSoccRecordBytes) {
    throw IoError(IoErrorKind::trailing_data, "socc: bytes after the last record");
  }

  std::vector<bool> seen(static_cast<std::size_t>(frame.spec.cell_count()), false);
  frame.cloud.points.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    VoxelIndex idx;
    for (int a = 0; a < 3; ++a) idx[a] = in.get<std::uint16_t>();
    const auto label = in.get<std::uint8_t>();
    if (!frame.spec.contains(idx)) {
      throw IoError(IoErrorKind::index_out_of_range, "socc: record " + std::to_string(r) + " outside dims");
    }
    const auto lin = static_cast<std::size_t>(linear_index(frame.spec, idx));
    if (seen[lin]) throw IoError(IoErrorKind::duplicate_voxel, "socc: record " + std::to_string(r) + " repeats a voxel");
    seen[lin] = true;
    frame.cloud.points.push_back({voxel_center(frame.spec, idx), label});
  }
  return frame;
}

void write_frame(const std::filesystem::path& path, const SemanticPointCloud& cloud, const VoxelGridSpec& spec) {
  const auto bytes = encode_frame(cloud, spec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(IoErrorKind::open_failed, "write failed for " + path.string());
}

OccupancyFrame read_frame(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::open_failed, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_frame(bytes);
}

std::string format_trajectory_line(const TrajectoryEntry& entry) {
  const Pose& p = entry.pose;
  const double values[7] = {p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.x(),
                            p.rotation.y(),    p.rotation.z(),    p.rotation.w()};
  std::string line = std::to_string(entry.frame_index);
  char buf[32];
  for (double v : values) {
    if (v == 0.0) v = 0.0;  // drop the sign of negative zero
    std::snprintf(buf, sizeof(buf), " %.9g", v);
    line += buf;
  }
  return line;
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  for (std::size_t i = 1; i < trajectory.size(); ++i) {
    if (trajectory[i].frame_index <= trajectory[i - 1].frame_index) {
      throw IoError(IoErrorKind::non_monotone_index, "trajectory frame indices must increase strictly");
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, "cannot write " + path.string());
  for (const auto& e : trajectory) out << format_trajectory_line(e) << '\n';
  if (!out) throw IoError(IoErrorKind::open_failed, "write failed for " + path.string());
}

Trajectory parse_trajectory(const std::string& text) {
  Trajectory out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    long long index = -1;
    double v[7];
    std::string extra;
    bool ok = static_cast<bool>(fields >> index);
    for (double& x : v) ok = ok && static_cast<bool>(fields >> x);
    if (!ok || index < 0 || index > 0xFFFFFFFFLL || (fields >> extra)) {
      throw IoError(IoErrorKind::malformed_line, "trajectory line " + std::to_string(line_no));
    }
    for (double x : v) {
      if (!std::isfinite(x)) throw IoError(IoErrorKind::malformed_line, "trajectory line " + std::to_string(line_no));
    }
    const Eigen::Quaterniond q(v[6], v[3], v[4], v[5]);
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      throw IoError(IoErrorKind::non_unit_quaternion, "trajectory line " + std::to_string(line_no));
    }
    TrajectoryEntry e;
    e.frame_index = static_cast<std::uint32_t>(index);
    e.pose = Pose(q, Eigen::Vector3d(v[0], v[1], v[2]));
    if (!out.empty() && e.frame_index <= out.back().frame_index) {
      throw IoError(IoErrorKind::non_monotone_index, "trajectory line " + std::to_string(line_no));
    }
    out.push_back(e);
  }
  return out;
}

Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(IoErrorKind::open_failed, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_trajectory(buf.str());
}

std::string frame_filename(std::uint32_t frame_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06u.socc", frame_index);
  return buf;
}

Sequence load_sequence(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(IoErrorKind::open_failed, "not a directory: " + dir.string());

  static const std::regex pattern(R"(frame_(\d{6,})\.socc)");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (std::regex_match(entry.path().filename().string(), pattern)) files.push_back(entry.path());
  }
  if (files.empty()) throw IoError(IoErrorKind::empty_directory, "no frame_*.socc files in " + dir.string());
  std::sort(files.begin(), files.end());

  Sequence seq;
  for (std::size_t i = 0; i < files.size(); ++i) {
    OccupancyFrame f = read_frame(files[i]);
    if (i == 0) {
      seq.spec = f.spec;
    } else if (!(f.spec == seq.spec)) {
      throw IoError(IoErrorKind::inconsistent_spec, files[i].filename().string() + " uses a different voxel grid");
    }
    seq.frames.push_back(std::move(f.cloud));
  }
  std::stable_sort(seq.frames.begin(), seq.frames.end(),
                   [](const auto& a, const auto& b) { return a.frame_index < b.frame_index; });
  for (std::size_t i = 1; i < seq.frames.size(); ++i) {
    if (seq.frames[i].frame_index == seq.frames[i - 1].frame_index) {
      throw IoError(IoErrorKind::non_monotone_index, "duplicate frame index " + std::to_string(seq.frames[i].frame_index));
    }
    for (auto missing = seq.frames[i - 1].frame_index + 1; missing < seq.frames[i].frame_index; ++missing) {
      seq.gaps.push_back(missing);
    }
  }
  return seq;
}

}  // namespace occreg
