#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "lidar_forge/point_cloud.hpp"
#include "lidar_forge/sensor.hpp"

namespace lidar_forge {

namespace fs = std::filesystem;

struct ScanReadStats {
  std::size_t non_finite = 0;
};

/// Reads a `.bin` scan: little-endian float32 x, y, z, intensity per point.
/// Non-finite values are kept and counted in `stats`.
std::vector<Point> read_points(const fs::path& path,
                               ScanReadStats* stats = nullptr);
void write_points(std::span<const Point> points, const fs::path& path);

/// Reads a `.label` file: one little-endian uint32 per point.
std::vector<LabelRecord> read_labels(const fs::path& path);
void write_labels(std::span<const LabelRecord> labels, const fs::path& path);

/// Scan plus optional labels; throws FormatError when the counts differ.
PointCloud read_scan(const fs::path& scan_path,
                     const std::optional<fs::path>& label_path,
                     ScanReadStats* stats = nullptr);

/// Writes `<stem>.bin` and, if labelled, `<stem>.label` via a temporary file
/// and rename so readers never observe a partial file.
void write_scan_atomic(const PointCloud& cloud, const fs::path& scan_path,
                       const fs::path& label_path);

/// Rigid transform p' = rotation * p + translation.
struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return {}; }
  Pose operator*(const Pose& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Pose inverse() const {
    Eigen::Matrix3d rt = rotation.transpose();
    return {rt, -(rt * translation)};
  }
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
  bool is_identity() const {
    return rotation == Eigen::Matrix3d::Identity() &&
           translation == Eigen::Vector3d::Zero();
  }
};

/// One pose per line: 12 decimals, row-major 3x4. Throws FormatError with
/// the 1-based line number of a malformed line.
std::vector<Pose> read_poses(const fs::path& path);

/// The "Tr:" velodyne-to-camera transform from a `calib.txt`, if present.
std::optional<Pose> read_calibration(const fs::path& path);

/// Converts camera-frame odometry poses to the velodyne frame:
/// Tr^-1 * P * Tr.
std::vector<Pose> poses_in_velodyne_frame(const std::vector<Pose>& camera_poses,
                                          const Pose& velo_to_cam);

/// Fraction `s` of a relative motion: translation scaled linearly, rotation
/// by quaternion slerp from identity.
Pose interpolate_motion(const Pose& delta, double s);

/// Reverses in-sweep ego-motion compensation. Each point is moved by the
/// inverse of the motion fraction s = col / W, where col is its azimuth
/// column and the relative motion is pose_prev^-1 * pose_curr. Point count,
/// order, intensity and labels are preserved; non-finite points untouched.
PointCloud undo_ego_motion(const PointCloud& cloud, const Pose& pose_prev,
                           const Pose& pose_curr, const SensorModel& sensor);

/// A frame of a SemanticKITTI-style dataset tree.
struct FrameRef {
  std::string sequence;  // directory name, e.g. "08"
  std::uint32_t frame = 0;
  fs::path scan;
  fs::path label;

  std::string stem() const;
  std::uint32_t sequence_number() const;
};

/// `<root>/sequences/<seq>` directory names, sorted.
std::vector<std::string> list_sequences(const fs::path& root);

/// Frames under `<root>/sequences/<seq>/velodyne`, sorted by frame number.
/// Throws Error if the velodyne directory is missing.
std::vector<FrameRef> list_frames(const fs::path& root,
                                  const std::string& sequence);

}  // namespace lidar_forge
