#include "lidar_forge/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lidar_forge/error.hpp"
#include "lidar_forge/kernels.hpp"

namespace lidar_forge {

void SensorModel::validate() const {
  if (num_beams < 1) throw ConfigError("sensor needs at least one beam");
  if (num_columns < 2 || num_columns % 2 != 0) {
    throw ConfigError("sensor column count must be even and >= 2, got " +
                      std::to_string(num_columns));
  }
  if (num_beams > 65535 || num_columns > 65535) {
    throw ConfigError("sensor grid exceeds 16-bit row/col indices");
  }
  if (!(fov_up > fov_down)) throw ConfigError("fov_up must exceed fov_down");
}

SphericalPoint to_spherical(double x, double y, double z) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    throw DegeneratePointError("non-finite point");
  }
  const double range = std::sqrt(x * x + y * y + z * z);
  if (range == 0.0) throw DegeneratePointError("point at the sensor origin");
  return {range, std::atan2(y, x), std::asin(z / range)};
}

int azimuth_column(double azimuth, const SensorModel& sensor) noexcept {
  const double u = 0.5 * (1.0 - azimuth / std::numbers::pi);
  const int col = static_cast<int>(std::floor(u * sensor.num_columns));
  return std::clamp(col, 0, sensor.num_columns - 1);
}

std::optional<CellIndex> project(const SphericalPoint& p,
                                 const SensorModel& sensor) noexcept {
  if (!(p.elevation >= sensor.fov_down && p.elevation <= sensor.fov_up)) {
    return std::nullopt;
  }
  const double v = 1.0 - (p.elevation - sensor.fov_down) /
                             (sensor.fov_up - sensor.fov_down);
  const int row = std::clamp(static_cast<int>(std::floor(v * sensor.num_beams)),
                             0, sensor.num_beams - 1);
  return CellIndex{row, azimuth_column(p.azimuth, sensor)};
}

namespace {

std::optional<CellIndex> project_xyz(double x, double y, double z,
                                     const SensorModel& sensor) noexcept {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    return std::nullopt;
  }
  const double range = std::sqrt(x * x + y * y + z * z);
  if (range == 0.0) return std::nullopt;
  return project({range, std::atan2(y, x), std::asin(z / range)}, sensor);
}

}  // namespace

std::optional<CellIndex> project_point(const Point& p,
                                       const SensorModel& sensor) noexcept {
  return project_xyz(p.x, p.y, p.z, sensor);
}

Projection project_points(std::span<const Point> points,
                          const SensorModel& sensor) {
  Projection out;
  out.ranges.resize(points.size());
  out.cells.resize(points.size());
  kernels::active().ranges(points, out.ranges);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto cell = project_point(points[i], sensor);
    // A float range can underflow to zero for a tiny non-zero point.
    out.cells[i] = cell && out.ranges[i] > 0.0f
                       ? static_cast<std::int32_t>(cell->flat(sensor))
                       : kNoCell;
  }
  return out;
}

std::vector<double> RangeImage::nearest_ranges() const {
  std::vector<double> out(sensor_.cell_count(),
                          std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c + 1 < offsets_.size(); ++c) {
    if (offsets_[c] != offsets_[c + 1]) out[c] = entries_[offsets_[c]].range;
  }
  return out;
}

RangeImage build_range_index(const PointCloud& cloud, const SensorModel& sensor,
                             Provenance tag) {
  RangeImage image;
  image.sensor_ = sensor;
  image.projection_ = project_points(cloud.points, sensor);
  const auto& cells = image.projection_.cells;
  const auto& ranges = image.projection_.ranges;

  // Counting sort by cell, then a per-cell sort by (range, ordinal).
  image.offsets_.assign(sensor.cell_count() + 1, 0);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] == kNoCell) {
      image.out_of_view_.push_back(static_cast<std::uint32_t>(i));
    } else {
      ++image.offsets_[static_cast<std::size_t>(cells[i]) + 1];
    }
  }
  for (std::size_t c = 0; c < sensor.cell_count(); ++c) {
    if (image.offsets_[c + 1] != 0) ++image.occupied_;
    image.offsets_[c + 1] += image.offsets_[c];
  }
  image.entries_.resize(image.offsets_.back());
  std::vector<std::uint32_t> cursor(image.offsets_.begin(),
                                    image.offsets_.end() - 1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] == kNoCell) continue;
    image.entries_[cursor[static_cast<std::size_t>(cells[i])]++] = {
        static_cast<std::uint32_t>(i), ranges[i], tag};
  }
  for (std::size_t c = 0; c < sensor.cell_count(); ++c) {
    const auto first = image.offsets_[c];
    const auto last = image.offsets_[c + 1];
    if (last - first > 1) {
      std::sort(image.entries_.begin() + first, image.entries_.begin() + last,
                [](const RangeEntry& a, const RangeEntry& b) {
                  return a.range != b.range ? a.range < b.range
                                            : a.ordinal < b.ordinal;
                });
    }
  }
  return image;
}

}  // namespace lidar_forge
