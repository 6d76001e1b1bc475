#include "lidar_forge/kitti_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lidar_forge/error.hpp"

namespace lidar_forge {

// The scan and label formats are little-endian and are read by memcpy.
static_assert(std::endian::native == std::endian::little,
              "big-endian hosts are not supported");

namespace {

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  std::vector<char> bytes(size);
  in.seekg(0);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size))) {
    throw Error("failed reading " + path.string());
  }
  return bytes;
}

void write_bytes(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw Error("failed writing " + path.string());
}

void write_atomic(const fs::path& path, const void* data, std::size_t size) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_bytes(tmp, data, size);
  fs::rename(tmp, path);
}

}  // namespace

std::vector<Point> read_points(const fs::path& path, ScanReadStats* stats) {
  const auto bytes = slurp(path);
  if (bytes.size() % sizeof(Point) != 0) {
    const auto offset = bytes.size() - bytes.size() % sizeof(Point);
    throw FormatError(path.string() + ": truncated point record at byte offset " +
                          std::to_string(offset),
                      offset);
  }
  std::vector<Point> points(bytes.size() / sizeof(Point));
  if (!bytes.empty()) std::memcpy(points.data(), bytes.data(), bytes.size());
  if (stats != nullptr) {
    stats->non_finite = static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const Point& p) {
          return !std::isfinite(p.x) || !std::isfinite(p.y) ||
                 !std::isfinite(p.z) || !std::isfinite(p.intensity);
        }));
  }
  return points;
}

void write_points(std::span<const Point> points, const fs::path& path) {
  write_bytes(path, points.data(), points.size_bytes());
}

std::vector<LabelRecord> read_labels(const fs::path& path) {
  const auto bytes = slurp(path);
  if (bytes.size() % 4 != 0) {
    const auto offset = bytes.size() - bytes.size() % 4;
    throw FormatError(path.string() + ": truncated label word at byte offset " +
                          std::to_string(offset),
                      offset);
  }
  std::vector<LabelRecord> labels(bytes.size() / 4);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::uint32_t word;
    std::memcpy(&word, bytes.data() + 4 * i, 4);
    labels[i] = LabelRecord::unpack(word);
  }
  return labels;
}

namespace {

std::vector<std::uint32_t> pack_labels(std::span<const LabelRecord> labels) {
  std::vector<std::uint32_t> words(labels.size());
  std::transform(labels.begin(), labels.end(), words.begin(),
                 [](LabelRecord l) { return l.pack(); });
  return words;
}

}  // namespace

void write_labels(std::span<const LabelRecord> labels, const fs::path& path) {
  const auto words = pack_labels(labels);
  write_bytes(path, words.data(), words.size() * 4);
}

PointCloud read_scan(const fs::path& scan_path,
                     const std::optional<fs::path>& label_path,
                     ScanReadStats* stats) {
  PointCloud cloud;
  cloud.points = read_points(scan_path, stats);
  if (label_path) {
    cloud.labels = read_labels(*label_path);
    if (cloud.labels->size() != cloud.points.size()) {
      throw FormatError(scan_path.string() + " holds " +
                            std::to_string(cloud.points.size()) + " points but " +
                            label_path->string() + " holds " +
                            std::to_string(cloud.labels->size()) + " labels",
                        0);
    }
  }
  return cloud;
}

void write_scan_atomic(const PointCloud& cloud, const fs::path& scan_path,
                       const fs::path& label_path) {
  cloud.validate();
  write_atomic(scan_path, cloud.points.data(),
               cloud.points.size() * sizeof(Point));
  if (cloud.labels) {
    const auto words = pack_labels(*cloud.labels);
    write_atomic(label_path, words.data(), words.size() * 4);
  }
}

namespace {

// Parses exactly twelve decimals into a 3x4 row-major pose.
std::optional<Pose> parse_pose(std::string_view text) {
  std::istringstream in{std::string(text)};
  double v[12];
  for (double& x : v) {
    if (!(in >> x) || !std::isfinite(x)) return std::nullopt;
  }
  std::string extra;
  if (in >> extra) return std::nullopt;
  Pose pose;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) pose.rotation(r, c) = v[4 * r + c];
    pose.translation(r) = v[4 * r + 3];
  }
  return pose;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char ch) { return std::isspace(ch); });
}

}  // namespace

std::vector<Pose> read_poses(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Pose> poses;
  std::string line;
  std::uint64_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    auto pose = parse_pose(line);
    if (!pose) {
      throw FormatError(path.string() + ":" + std::to_string(number) +
                            ": expected 12 decimals",
                        number);
    }
    poses.push_back(*pose);
  }
  return poses;
}

std::optional<Pose> read_calibration(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::string line;
  std::uint64_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.rfind("Tr:", 0) != 0) continue;
    auto pose = parse_pose(std::string_view(line).substr(3));
    if (!pose) {
      throw FormatError(path.string() + ":" + std::to_string(number) +
                            ": malformed Tr line",
                        number);
    }
    return pose;
  }
  return std::nullopt;
}

std::vector<Pose> poses_in_velodyne_frame(const std::vector<Pose>& camera_poses,
                                          const Pose& velo_to_cam) {
  const Pose cam_to_velo = velo_to_cam.inverse();
  std::vector<Pose> out;
  out.reserve(camera_poses.size());
  for (const auto& p : camera_poses) out.push_back(cam_to_velo * p * velo_to_cam);
  return out;
}

Pose interpolate_motion(const Pose& delta, double s) {
  if (s == 0.0) return Pose::identity();
  Pose out;
  out.translation = s * delta.translation;
  if (delta.rotation != Eigen::Matrix3d::Identity()) {
    const Eigen::Quaterniond q(delta.rotation);
    out.rotation =
        Eigen::Quaterniond::Identity().slerp(s, q.normalized()).toRotationMatrix();
  }
  return out;
}

PointCloud undo_ego_motion(const PointCloud& cloud, const Pose& pose_prev,
                           const Pose& pose_curr, const SensorModel& sensor) {
  const Pose delta = pose_prev.inverse() * pose_curr;
  PointCloud out = cloud;
  if (delta.is_identity()) return out;

  // One correction per azimuth column.
  std::vector<std::optional<Pose>> corrections(
      static_cast<std::size_t>(sensor.num_columns));
  for (Point& p : out.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      continue;
    }
    const int col = azimuth_column(std::atan2(static_cast<double>(p.y),
                                              static_cast<double>(p.x)),
                                   sensor);
    auto& correction = corrections[static_cast<std::size_t>(col)];
    if (!correction) {
      const double s = static_cast<double>(col) / sensor.num_columns;
      correction = interpolate_motion(delta, s).inverse();
    }
    if (correction->is_identity()) continue;
    const Eigen::Vector3d q = correction->apply({p.x, p.y, p.z});
    p.x = static_cast<float>(q.x());
    p.y = static_cast<float>(q.y());
    p.z = static_cast<float>(q.z());
  }
  return out;
}

std::string FrameRef::stem() const { return scan.stem().string(); }

std::uint32_t FrameRef::sequence_number() const {
  std::uint32_t value = 0;
  auto [ptr, ec] = std::from_chars(sequence.data(),
                                   sequence.data() + sequence.size(), value);
  if (ec != std::errc() || ptr != sequence.data() + sequence.size()) {
    throw Error("sequence id '" + sequence + "' is not numeric");
  }
  return value;
}

std::vector<std::string> list_sequences(const fs::path& root) {
  std::vector<std::string> out;
  const fs::path dir = root / "sequences";
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory()) out.push_back(entry.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<FrameRef> list_frames(const fs::path& root,
                                  const std::string& sequence) {
  const fs::path seq_dir = root / "sequences" / sequence;
  const fs::path velodyne = seq_dir / "velodyne";
  if (!fs::is_directory(velodyne)) {
    throw Error("missing directory " + velodyne.string());
  }
  std::vector<FrameRef> frames;
  for (const auto& entry : fs::directory_iterator(velodyne)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".bin") continue;
    const std::string stem = entry.path().stem().string();
    std::uint32_t number = 0;
    auto [ptr, ec] =
        std::from_chars(stem.data(), stem.data() + stem.size(), number);
    if (ec != std::errc() || ptr != stem.data() + stem.size()) continue;
    frames.push_back({sequence, number, entry.path(),
                      seq_dir / "labels" / (stem + ".label")});
  }
  std::sort(frames.begin(), frames.end(),
            [](const FrameRef& a, const FrameRef& b) { return a.frame < b.frame; });
  return frames;
}

}  // namespace lidar_forge
