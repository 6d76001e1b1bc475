#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lidar_forge/kitti_io.hpp"
#include "lidar_forge/point_cloud.hpp"
#include "lidar_forge/rng.hpp"
#include "lidar_forge/sensor.hpp"

namespace lidar_forge {

struct InstancePoint {
  Point point;
  std::uint16_t row = 0;
  std::uint16_t col = 0;
};

struct InstanceSource {
  std::uint32_t sequence = 0;
  std::uint32_t frame = 0;
  std::uint16_t instance_id = 0;

  friend bool operator==(const InstanceSource&, const InstanceSource&) = default;
};

/// Object cut out of a labelled scan, kept in its original sensor frame.
/// Each point's (row, col) is its projection under the owning sensor model.
struct ObjectInstance {
  std::uint16_t semantic_class = 0;
  InstanceSource source;
  std::vector<InstancePoint> points;

  std::size_t point_count() const noexcept { return points.size(); }
};

struct ExtractionOptions {
  std::vector<std::uint16_t> classes;
  std::size_t min_points = 20;
  /// Linkage distance for grouping points that carry instance id 0.
  double linkage = 0.5;
};

/// Groups labelled points by (class, instance id); id-0 points fall back to
/// Euclidean connected components. Only in-view points are kept. Result is
/// sorted by (instance id, class, first point ordinal).
std::vector<ObjectInstance> extract_instances(const PointCloud& cloud,
                                              const SensorModel& sensor,
                                              const ExtractionOptions& options,
                                              std::uint32_t sequence = 0,
                                              std::uint32_t frame = 0);

struct FrameError {
  std::string sequence;
  std::uint32_t frame = 0;
  std::string message;
};

struct DatabaseManifest {
  std::uint32_t version = 0;
  std::uint64_t fingerprint = 0;
  std::uint32_t min_points = 0;
  std::map<std::uint16_t, std::size_t> counts;
  std::size_t frames_scanned = 0;
  /// Frames skipped during the build. Not persisted in the database file.
  std::vector<FrameError> errors;

  std::size_t total() const;
};

/// Class-indexed, immutable-after-build store of object instances.
class InstanceDatabase {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  InstanceDatabase(SensorModel sensor, std::vector<std::uint16_t> classes,
                   std::uint32_t min_points = 20);

  const SensorModel& sensor() const noexcept { return sensor_; }
  /// Sorted class ids, including classes with no instances.
  std::vector<std::uint16_t> classes() const;
  bool has_class(std::uint16_t semantic) const noexcept;

  /// Throws Error naming the id when the class is unknown.
  std::span<const ObjectInstance> instances(std::uint16_t semantic) const;
  const ObjectInstance& at(std::uint16_t semantic, std::size_t ordinal) const;

  std::size_t size() const noexcept;
  bool empty() const noexcept { return size() == 0; }

  /// Counts mirror the stored instances.
  DatabaseManifest manifest() const;

  void add(ObjectInstance instance);
  void set_fingerprint(std::uint64_t fingerprint) noexcept { fingerprint_ = fingerprint; }
  void set_frames_scanned(std::size_t n) noexcept { frames_scanned_ = n; }
  void add_error(FrameError error) { errors_.push_back(std::move(error)); }

 private:
  SensorModel sensor_;
  std::map<std::uint16_t, std::vector<ObjectInstance>> by_class_;
  std::uint32_t min_points_ = 0;
  std::uint64_t fingerprint_ = 0;
  std::size_t frames_scanned_ = 0;
  std::vector<FrameError> errors_;
};

/// Extracts instances from every frame into a new database, ordered by the
/// frame list regardless of `workers`. Unreadable frames are skipped and
/// listed in the manifest.
InstanceDatabase build_database(std::span<const FrameRef> frames,
                                const SensorModel& sensor,
                                const ExtractionOptions& options,
                                unsigned workers = 1);

/// Uniform draw within a class. Returns nullptr when the class is empty;
/// throws for an unknown class.
const ObjectInstance* sample_instance(const InstanceDatabase& db,
                                      std::uint16_t semantic, Rng& rng);

// On-disk layout (all little-endian):
//   header       56 bytes   magic "LFDB", version, H, W, fov_up, fov_down,
//                           class count, instance count, fingerprint,
//                           min_points, frames scanned
//   class table  8 bytes    per class: id u16, pad u16, instance count u32
//   instances    16 bytes   class u16, instance id u16, sequence u32,
//                           frame u32, point count u32
//                + 20 bytes per point: x, y, z, intensity f32, row, col u16
inline constexpr std::size_t kDatabaseHeaderBytes = 56;
inline constexpr std::size_t kDatabaseClassEntryBytes = 8;
inline constexpr std::size_t kDatabaseInstanceHeaderBytes = 16;
inline constexpr std::size_t kDatabasePointBytes = 20;

std::vector<std::uint8_t> serialize_database(const InstanceDatabase& db);
InstanceDatabase deserialize_database(std::span<const std::uint8_t> bytes);

void save_database(const InstanceDatabase& db, const fs::path& path);
/// Throws FormatError on corruption (message names the failing instance
/// ordinal) or a version mismatch (message names both versions).
InstanceDatabase load_database(const fs::path& path);

}  // namespace lidar_forge
