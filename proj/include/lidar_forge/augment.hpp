#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lidar_forge/instance_db.hpp"
#include "lidar_forge/point_cloud.hpp"
#include "lidar_forge/rng.hpp"
#include "lidar_forge/sensor.hpp"

namespace lidar_forge {

struct AugmentConfig {
  double p_global = 0.5;
  double p_fusion = 0.3;
  double p_inject = 0.5;
  int max_injections = 3;
  double desired_share = 0.02;
  std::vector<std::uint16_t> injection_classes;
  double fusion_rotation_limit = 10.0 * std::numbers::pi / 180.0;
  double global_rotation_limit = std::numbers::pi;
  double point_drop_rate = 0.05;
  double range_epsilon = 0.05;
  int max_attempts_factor = 10;
  std::uint64_t seed = 0;
  /// Allow an instance to be injected into the frame it was cut from.
  bool allow_self_injection = true;

  AugmentConfig();

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  /// Keys must match the field names; unknown keys are an error.
  static AugmentConfig from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

AugmentConfig load_config(const std::filesystem::path& path);

struct ClassDistribution {
  std::map<std::uint16_t, std::size_t> counts;
  std::size_t total = 0;

  double share(std::uint16_t semantic) const noexcept;
};

/// Throws Error for an empty label list.
ClassDistribution compute_distribution(std::span<const LabelRecord> labels);

/// Largest |k| with |k| * 2pi/W <= limit.
int max_rotation_steps(double limit, const SensorModel& sensor) noexcept;

/// Rotates about the sensor z-axis by k * 2pi/W. Throws Error when the angle
/// exceeds `limit`.
PointCloud quantized_rotation(const PointCloud& cloud, int k,
                              const SensorModel& sensor, double limit);

enum class Axis { kX, kY };

/// Negates the named coordinate.
PointCloud flip(const PointCloud& cloud, Axis axis);

PointCloud point_drop(const PointCloud& cloud, double rate, Rng& rng);

/// Ordinals surviving an independent per-point drop at `rate`.
std::vector<std::uint32_t> point_drop_survivors(std::size_t count, double rate,
                                                Rng& rng);

/// A structure-preserving rigid placement plus point drop.
struct Placement {
  int rotation_steps = 0;
  bool flip_x = false;
  bool flip_y = false;
  double drop_rate = 0.0;
};

struct GlobalRecord {
  bool applied = false;
  Placement placement;
  std::size_t dropped = 0;
};

/// With probability p_global: quantized rotation (uniform admissible k under
/// global_rotation_limit), independent x / y flips at 0.5, point drop.
PointCloud global_augment(const PointCloud& cloud, const AugmentConfig& config,
                          const SensorModel& sensor, Rng& rng,
                          GlobalRecord* record = nullptr);

struct InjectionResult {
  PointCloud cloud;
  bool rejected = false;
  /// Ordinals into the target / instance that survived, ascending. The
  /// output is the surviving target points followed by the instance points.
  std::vector<std::uint32_t> kept_target;
  std::vector<std::uint32_t> kept_instance;
  std::uint16_t assigned_instance_id = 0;
};

/// Per-cell occlusion competition between a placed instance and a labelled
/// target. In a cell holding instance point range r:
///   (a) the instance point is dropped if any target range < r - eps,
///   (b) otherwise it is kept and target ranges > r + eps are removed.
/// Ties within eps go to the target. A rejected result returns the target
/// unchanged.
InjectionResult inject_instance(const PointCloud& target,
                                const ObjectInstance& instance,
                                const SensorModel& sensor, double eps);

/// Applies a placement to an instance, refreshing each point's (row, col)
/// by projection. Points leaving the raster are dropped.
ObjectInstance place_instance(const ObjectInstance& instance,
                              const Placement& placement,
                              const SensorModel& sensor, Rng& rng);

struct CompetitionResult {
  PointCloud cloud;
  std::vector<std::uint32_t> kept_first;
  std::vector<std::uint32_t> kept_second;
  std::size_t contested_cells = 0;
};

/// Cell-wise competition of two scenes: in a cell both occupy, the cloud
/// holding the smaller range keeps all of its points and the other loses all
/// of its points (ties within eps go to `first`). Out-of-view points and
/// uncontested cells are kept. Output is first's survivors then second's.
CompetitionResult compete_scenes(const PointCloud& first,
                                 const PointCloud& second,
                                 const SensorModel& sensor, double eps);

struct FusionRecord {
  Placement placement;
  std::size_t partner_dropped = 0;
  std::size_t removed_first = 0;
  std::size_t removed_second = 0;
  std::size_t contested_cells = 0;
};

/// Places `b` (rotation within fusion_rotation_limit, random flips, point
/// drop) and runs the competition against `a`.
CompetitionResult fuse_scenes(const PointCloud& a, const PointCloud& b,
                              const SensorModel& sensor,
                              const AugmentConfig& config, Rng& rng,
                              FusionRecord* record = nullptr);

/// Placement used for scene fusion, drawn from `rng`.
Placement draw_fusion_placement(const AugmentConfig& config,
                                const SensorModel& sensor, Rng& rng);

struct InjectionEntry {
  std::uint16_t semantic_class = 0;
  InstanceSource source;
  Placement placement;
  std::uint16_t assigned_instance_id = 0;
  std::size_t points_added = 0;
  std::size_t target_removed = 0;
};

struct FrameKey {
  std::uint32_t sequence = 0;
  std::uint32_t frame = 0;
};

struct AugmentReport {
  std::string frame;
  std::uint64_t seed = 0;
  std::size_t input_points = 0;
  std::size_t output_points = 0;

  GlobalRecord global;

  bool fusion_applied = false;
  std::string fusion_partner;
  std::string fusion_error;
  FusionRecord fusion;

  bool injection_applied = false;
  std::string injection_skipped;
  std::vector<InjectionEntry> injections;
  std::size_t injection_attempts = 0;
  std::size_t rejected_injections = 0;
  std::string stop_reason;

  std::uint64_t random_draws = 0;

  nlohmann::json to_json() const;
};

/// Output cloud plus, for every output point, the parent it came from:
/// 0 = the input frame, 1 = the fusion partner, 2 + i = the i-th injection.
struct AugmentResult {
  PointCloud cloud;
  AugmentReport report;
  std::vector<std::uint16_t> parents;
};

/// Class-balancing injection loop. `parents` (if non-empty) labels the input
/// points and is carried through; `self` excludes same-frame instances when
/// the config forbids self injection.
AugmentResult balance_inject(const PointCloud& cloud, const InstanceDatabase& db,
                             const AugmentConfig& config, Rng& rng,
                             std::vector<std::uint16_t> parents = {},
                             std::optional<FrameKey> self = std::nullopt);

/// Source of fusion partners.
class ScenePool {
 public:
  virtual ~ScenePool() = default;
  virtual std::size_t size() const = 0;
  /// May throw; a failure skips fusion for the frame.
  virtual PointCloud load(std::size_t index) const = 0;
  virtual std::string name(std::size_t index) const = 0;
};

class MemoryScenePool final : public ScenePool {
 public:
  explicit MemoryScenePool(std::vector<PointCloud> scenes)
      : scenes_(std::move(scenes)) {}
  std::size_t size() const override { return scenes_.size(); }
  PointCloud load(std::size_t index) const override { return scenes_.at(index); }
  std::string name(std::size_t index) const override {
    return "scene-" + std::to_string(index);
  }

 private:
  std::vector<PointCloud> scenes_;
};

/// Full frame pipeline: global augmentation, then fusion, then injection,
/// each gated by its probability. `db` and `pool` may be null, in which case
/// the corresponding step is skipped and the reason reported.
AugmentResult augment_frame(const PointCloud& cloud, const InstanceDatabase* db,
                            const ScenePool* pool, const AugmentConfig& config,
                            const SensorModel& sensor, Rng& rng,
                            std::optional<FrameKey> self = std::nullopt);

}  // namespace lidar_forge
