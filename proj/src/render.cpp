#include "lidar_forge/render.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "lidar_forge/classes.hpp"
#include "lidar_forge/error.hpp"

namespace lidar_forge {

namespace {

// Ordinal of the nearest point per cell, or -1.
std::vector<std::int64_t> nearest_ordinals(const Projection& proj,
                                           std::size_t cell_count) {
  std::vector<std::int64_t> best(cell_count, -1);
  for (std::size_t i = 0; i < proj.cells.size(); ++i) {
    const auto c = proj.cells[i];
    if (c == kNoCell) continue;
    auto& slot = best[static_cast<std::size_t>(c)];
    if (slot < 0 || proj.ranges[i] < proj.ranges[static_cast<std::size_t>(slot)]) {
      slot = static_cast<std::int64_t>(i);
    }
  }
  return best;
}

template <typename Color>
Image paint(const PointCloud& cloud, const SensorModel& sensor, Color color) {
  Image image(sensor.num_columns, sensor.num_beams, 3);
  const auto proj = project_points(cloud.points, sensor);
  const auto best = nearest_ordinals(proj, sensor.cell_count());
  for (std::size_t c = 0; c < best.size(); ++c) {
    if (best[c] < 0) continue;
    const classes::Rgb rgb = color(static_cast<std::size_t>(best[c]));
    std::uint8_t* px = image.pixels.data() + 3 * c;
    px[0] = rgb.r;
    px[1] = rgb.g;
    px[2] = rgb.b;
  }
  return image;
}

}  // namespace

Image render_range(const PointCloud& cloud, const SensorModel& sensor) {
  Image image(sensor.num_columns, sensor.num_beams, 1);
  const auto proj = project_points(cloud.points, sensor);
  const auto best = nearest_ordinals(proj, sensor.cell_count());
  float max_range = 0.0f;
  for (auto i : best) {
    if (i >= 0) max_range = std::max(max_range, proj.ranges[static_cast<std::size_t>(i)]);
  }
  for (std::size_t c = 0; c < best.size(); ++c) {
    if (best[c] < 0) continue;
    const double r = proj.ranges[static_cast<std::size_t>(best[c])];
    const double v = 1.0 + std::floor(254.0 * r / max_range);
    image.pixels[c] = static_cast<std::uint8_t>(std::clamp(v, 1.0, 255.0));
  }
  return image;
}

Image render_classes(const PointCloud& cloud, const SensorModel& sensor) {
  return paint(cloud, sensor, [&](std::size_t i) {
    if (!cloud.labels) return classes::Rgb{255, 255, 255};
    const auto rgb = classes::color((*cloud.labels)[i].semantic);
    // Unlabelled points still need to be visible.
    return rgb.r == 0 && rgb.g == 0 && rgb.b == 0 ? classes::Rgb{64, 64, 64} : rgb;
  });
}

Image render_provenance(const PointCloud& cloud,
                        std::span<const std::uint16_t> parents,
                        const SensorModel& sensor) {
  if (parents.size() != cloud.size()) throw Error("parent list does not match cloud");
  return paint(cloud, sensor, [&](std::size_t i) {
    switch (parents[i]) {
      case 0: return classes::Rgb{40, 200, 60};
      case 1: return classes::Rgb{220, 40, 220};
      default: return classes::Rgb{255, 150, 0};
    }
  });
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const auto start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png(const Image& image, const std::filesystem::path& path) {
  std::vector<std::uint8_t> raw;
  const std::size_t stride = static_cast<std::size_t>(image.width) * image.channels;
  raw.reserve((stride + 1) * image.height);
  for (int r = 0; r < image.height; ++r) {
    raw.push_back(0);  // filter: none
    const auto* row = image.pixels.data() + stride * r;
    raw.insert(raw.end(), row, row + stride);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()),
                Z_BEST_COMPRESSION) != Z_OK) {
    throw Error("png compression failed");
  }
  packed.resize(packed_size);

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  std::vector<std::uint8_t> header;
  put_u32(header, static_cast<std::uint32_t>(image.width));
  put_u32(header, static_cast<std::uint32_t>(image.height));
  header.push_back(8);                             // bit depth
  header.push_back(image.channels == 3 ? 2 : 0);   // color type
  header.push_back(0);
  header.push_back(0);
  header.push_back(0);
  put_chunk(out, "IHDR", header);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("cannot create " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
}

}  // namespace lidar_forge
