#pragma once

// Test fixtures: a small ray-casting lidar simulator producing
// SemanticKITTI-like labelled scans, random clouds for oracle comparisons,
// and an on-disk dataset writer.

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "lidar_forge/instance_db.hpp"
#include "lidar_forge/point_cloud.hpp"
#include "lidar_forge/sensor.hpp"

namespace lidar_forge::testing {

struct SceneSpec {
  std::uint64_t seed = 1;
  int cars = 8;
  int persons = 2;
  int bicycles = 1;
  int bicyclists = 1;
  int trucks = 0;
  int other_vehicles = 1;
  int motorcyclists = 0;
  int poles = 6;
  int trees = 6;
  double dropout = 0.02;
  /// Objects with instance id 0 (unassigned), to exercise fallback grouping.
  bool anonymous_persons = false;
};

/// Casts one ray per raster cell (with in-cell jitter) against a street
/// scene: ground, sidewalks, building walls, poles, trees and labelled
/// vehicles / pedestrians as oriented boxes.
PointCloud simulate_scene(const SceneSpec& spec, const SensorModel& sensor = {});

struct RandomCloudOptions {
  std::size_t points = 1000;
  /// Restrict columns / rows to a window to force cell collisions.
  int col_window = 0;  // 0 = full width
  int row_window = 0;  // 0 = full height
  int col_offset = 0;
  int row_offset = 0;
  double min_range = 1.0;
  double max_range = 60.0;
  /// Quantize ranges to this step (0 = continuous); creates near ties.
  double range_step = 0.0;
  std::uint16_t semantic = 50;
  std::uint16_t instance = 0;
  bool cell_centers = false;
};

PointCloud random_cloud(std::mt19937_64& gen, const SensorModel& sensor,
                        const RandomCloudOptions& options);

/// Instance built from a random cloud, (row, col) filled by projection.
ObjectInstance random_instance(std::mt19937_64& gen, const SensorModel& sensor,
                               const RandomCloudOptions& options,
                               std::uint16_t semantic);

/// Point at the center of a cell at the given range.
Point cell_center_point(const SensorModel& sensor, int row, int col, double range);

/// Writes sequences/<seq>/{velodyne,labels}/NNNNNN.{bin,label} plus an
/// identity-ish poses.txt per sequence.
void write_dataset(const std::filesystem::path& root,
                   const std::vector<std::string>& sequences, int frames_per_sequence,
                   std::uint64_t seed, const SensorModel& sensor = {});

/// Removes a temp directory on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// SHA-free content hash (FNV-1a 64) of every file under `root`, keyed by
/// relative path.
std::uint64_t hash_tree(const std::filesystem::path& root);
std::uint64_t hash_file(const std::filesystem::path& path);

}  // namespace lidar_forge::testing
