#include <cmath>
#include <limits>

#include "kernels_impl.hpp"

namespace lidar_forge::kernels::scalar {

void ranges(std::span<const Point> points, std::span<float> out) {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point& p = points[i];
    out[i] = std::sqrt((p.x * p.x + p.y * p.y) + p.z * p.z);
  }
}

void rotate_z(std::span<Point> points, float c, float s) {
  for (Point& p : points) {
    const float x = p.x;
    const float y = p.y;
    p.x = x * c - y * s;
    p.y = x * s + y * c;
  }
}

void negate_axis(std::span<Point> points, int axis) {
  for (Point& p : points) {
    float& v = axis == 0 ? p.x : axis == 1 ? p.y : p.z;
    v = -v;
  }
}

void occluded(std::span<const float> ranges, std::span<const std::int32_t> cells,
              std::span<const double> nearest, double eps,
              std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto c = cells[i];
    out[i] = c >= 0 && nearest[static_cast<std::size_t>(c)] <
                           static_cast<double>(ranges[i]) - eps;
  }
}

void shadowed(std::span<const float> ranges, std::span<const std::int32_t> cells,
              std::span<const double> nearest, double eps,
              std::span<std::uint8_t> out) {
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    const auto c = cells[i];
    out[i] = c >= 0 && static_cast<double>(ranges[i]) >
                           nearest[static_cast<std::size_t>(c)] + eps;
  }
}

void contest(std::span<const double> first, std::span<const double> second,
             double eps, std::span<std::uint8_t> out) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < first.size(); ++c) {
    if (first[c] == inf || second[c] == inf) {
      out[c] = kUncontested;
    } else {
      out[c] = second[c] < first[c] - eps ? kSecondWins : kFirstWins;
    }
  }
}

}  // namespace lidar_forge::kernels::scalar
