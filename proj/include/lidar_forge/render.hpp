#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "lidar_forge/point_cloud.hpp"
#include "lidar_forge/sensor.hpp"

namespace lidar_forge {

/// 8-bit raster, row-major, 1 (gray) or 3 (RGB) channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> pixels;

  Image(int w, int h, int c)
      : width(w), height(h), channels(c),
        pixels(static_cast<std::size_t>(w) * h * c, 0) {}
  std::uint8_t* at(int row, int col) {
    return pixels.data() + (static_cast<std::size_t>(row) * width + col) * channels;
  }
  const std::uint8_t* at(int row, int col) const {
    return pixels.data() + (static_cast<std::size_t>(row) * width + col) * channels;
  }
};

/// Gray H x W image of the per-cell minimum range, scaled to 1..255 by the
/// largest such range. Empty cells are black.
Image render_range(const PointCloud& cloud, const SensorModel& sensor);

/// RGB image colored by the semantic class of the nearest point per cell.
Image render_classes(const PointCloud& cloud, const SensorModel& sensor);

/// RGB image colored by the parent of the nearest point per cell
/// (0 green, 1 magenta, injections orange).
Image render_provenance(const PointCloud& cloud,
                        std::span<const std::uint16_t> parents,
                        const SensorModel& sensor);

void write_png(const Image& image, const std::filesystem::path& path);

}  // namespace lidar_forge
