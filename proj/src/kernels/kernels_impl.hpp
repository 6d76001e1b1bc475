#pragma once

#include "lidar_forge/kernels.hpp"

namespace lidar_forge::kernels {

namespace scalar {
void ranges(std::span<const Point> points, std::span<float> out);
void rotate_z(std::span<Point> points, float c, float s);
void negate_axis(std::span<Point> points, int axis);
void occluded(std::span<const float> ranges, std::span<const std::int32_t> cells,
              std::span<const double> nearest, double eps,
              std::span<std::uint8_t> out);
void shadowed(std::span<const float> ranges, std::span<const std::int32_t> cells,
              std::span<const double> nearest, double eps,
              std::span<std::uint8_t> out);
void contest(std::span<const double> first, std::span<const double> second,
             double eps, std::span<std::uint8_t> out);
}  // namespace scalar

#if defined(LIDAR_FORGE_HAVE_AVX2)
namespace avx2 {
void ranges(std::span<const Point> points, std::span<float> out);
void rotate_z(std::span<Point> points, float c, float s);
void negate_axis(std::span<Point> points, int axis);
void occluded(std::span<const float> ranges, std::span<const std::int32_t> cells,
              std::span<const double> nearest, double eps,
              std::span<std::uint8_t> out);
void shadowed(std::span<const float> ranges, std::span<const std::int32_t> cells,
              std::span<const double> nearest, double eps,
              std::span<std::uint8_t> out);
void contest(std::span<const double> first, std::span<const double> second,
             double eps, std::span<std::uint8_t> out);
}  // namespace avx2
#endif

}  // namespace lidar_forge::kernels
