#pragma once

#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "lidar_forge/point_cloud.hpp"

namespace lidar_forge {

/// Beam-grid geometry of a rotating lidar. Rows are beams (top beam is row 0),
/// columns are azimuth bins starting at azimuth +pi and sweeping clockwise.
struct SensorModel {
  int num_beams = 64;
  int num_columns = 2048;
  double fov_up = 3.0 * std::numbers::pi / 180.0;
  double fov_down = -25.0 * std::numbers::pi / 180.0;

  /// Horizontal resolution, 2*pi / num_columns.
  double azimuth_step() const noexcept {
    return 2.0 * std::numbers::pi / num_columns;
  }
  std::size_t cell_count() const noexcept {
    return static_cast<std::size_t>(num_beams) *
           static_cast<std::size_t>(num_columns);
  }
  /// Throws ConfigError on an invalid grid.
  void validate() const;

  friend bool operator==(const SensorModel&, const SensorModel&) = default;
};

struct SphericalPoint {
  double range = 0.0;
  double azimuth = 0.0;  // (-pi, pi]
  double elevation = 0.0;
};

struct CellIndex {
  int row = 0;
  int col = 0;

  std::size_t flat(const SensorModel& sensor) const noexcept {
    return static_cast<std::size_t>(row) *
               static_cast<std::size_t>(sensor.num_columns) +
           static_cast<std::size_t>(col);
  }
  friend constexpr bool operator==(CellIndex, CellIndex) = default;
};

/// Throws DegeneratePointError for the origin or non-finite input.
SphericalPoint to_spherical(double x, double y, double z);

/// Empty when the elevation lies outside [fov_down, fov_up].
std::optional<CellIndex> project(const SphericalPoint& p,
                                 const SensorModel& sensor) noexcept;

/// Column only, ignoring elevation. Used as a sweep-time proxy.
int azimuth_column(double azimuth, const SensorModel& sensor) noexcept;

/// Convenience for a stored point; empty for degenerate or out-of-view points.
std::optional<CellIndex> project_point(const Point& p,
                                       const SensorModel& sensor) noexcept;

inline constexpr std::int32_t kNoCell = -1;

/// Per-point flat cell (kNoCell when out of view or degenerate) and range.
/// Ranges are single precision and come from the dispatched range kernel so
/// every competition in the pipeline compares the same numbers.
struct Projection {
  std::vector<std::int32_t> cells;
  std::vector<float> ranges;
};

Projection project_points(std::span<const Point> points,
                          const SensorModel& sensor);

/// Which parent a range-image entry came from.
enum class Provenance : std::uint8_t { kPrimary = 0, kSecondary = 1, kInstance = 2 };

struct RangeEntry {
  std::uint32_t ordinal = 0;
  float range = 0.0f;
  Provenance tag = Provenance::kPrimary;
};

/// Per-cell lists of (point ordinal, range), each sorted by ascending range
/// (ties by ordinal). Stored compressed: one offsets array over all cells.
class RangeImage {
 public:
  RangeImage() = default;

  const SensorModel& sensor() const noexcept { return sensor_; }

  std::span<const RangeEntry> cell(std::size_t flat) const noexcept {
    return {entries_.data() + offsets_[flat],
            entries_.data() + offsets_[flat + 1]};
  }
  std::span<const RangeEntry> cell(CellIndex c) const noexcept {
    return cell(c.flat(sensor_));
  }
  /// +inf for an empty cell.
  float min_range(std::size_t flat) const noexcept {
    auto entries = cell(flat);
    return entries.empty() ? std::numeric_limits<float>::infinity()
                           : entries.front().range;
  }

  std::size_t entry_count() const noexcept { return entries_.size(); }
  std::size_t occupied_cells() const noexcept { return occupied_; }
  std::span<const RangeEntry> entries() const noexcept { return entries_; }

  /// Ordinals of points that did not land on the raster.
  std::span<const std::uint32_t> out_of_view() const noexcept {
    return out_of_view_;
  }
  /// Flat cell for each source point, kNoCell when not indexed.
  std::span<const std::int32_t> point_cells() const noexcept {
    return projection_.cells;
  }
  std::span<const float> point_ranges() const noexcept {
    return projection_.ranges;
  }

  /// Dense per-cell minimum range in double precision (+inf when empty).
  std::vector<double> nearest_ranges() const;

 private:
  friend RangeImage build_range_index(const PointCloud&, const SensorModel&,
                                      Provenance);
  SensorModel sensor_;
  std::vector<std::uint32_t> offsets_;
  std::vector<RangeEntry> entries_;
  std::vector<std::uint32_t> out_of_view_;
  Projection projection_;
  std::size_t occupied_ = 0;
};

RangeImage build_range_index(const PointCloud& cloud, const SensorModel& sensor,
                             Provenance tag = Provenance::kPrimary);

}  // namespace lidar_forge
