#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lidar_forge {

/// One lidar return, laid out exactly as in a `.bin` scan file.
struct Point {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float intensity = 0.0f;
};
static_assert(sizeof(Point) == 16, "Point must match the on-disk record");

/// Semantic class in the low 16 bits, instance id in the high 16 bits.
struct LabelRecord {
  std::uint16_t semantic = 0;
  std::uint16_t instance = 0;

  static constexpr LabelRecord unpack(std::uint32_t word) noexcept {
    return {static_cast<std::uint16_t>(word & 0xFFFFu),
            static_cast<std::uint16_t>(word >> 16)};
  }
  constexpr std::uint32_t pack() const noexcept {
    return static_cast<std::uint32_t>(semantic) |
           (static_cast<std::uint32_t>(instance) << 16);
  }
  friend constexpr bool operator==(LabelRecord, LabelRecord) = default;
};

struct PointCloud {
  std::vector<Point> points;
  std::optional<std::vector<LabelRecord>> labels;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_labels() const noexcept { return labels.has_value(); }

  /// Throws if labels are present but not parallel to the points.
  void validate() const;
};

/// Keeps the points whose ordinals are listed (ascending), labels in lockstep.
PointCloud select_points(const PointCloud& cloud,
                         std::span<const std::uint32_t> ordinals);

/// Appends `tail` to `head`. Both must agree on label presence.
void append_cloud(PointCloud& head, const PointCloud& tail);

}  // namespace lidar_forge
