#pragma once

// Data-parallel inner loops of the pipeline. Every kernel has a scalar
// reference implementation and, where the CPU supports it, an AVX2 variant.
// The variants are required to produce bitwise-identical output; the test
// suite checks this on randomized inputs including signed zeros and
// non-finite values.

#include <cstdint>
#include <span>
#include <string_view>

#include "lidar_forge/point_cloud.hpp"

namespace lidar_forge::kernels {

enum class Backend { kScalar, kAvx2 };

std::string_view backend_name(Backend backend) noexcept;

/// Winner of one raster cell in a two-cloud competition.
enum CellState : std::uint8_t { kUncontested = 0, kFirstWins = 1, kSecondWins = 2 };

struct KernelTable {
  Backend backend;

  /// out[i] = sqrt((x*x + y*y) + z*z) in single precision.
  void (*ranges)(std::span<const Point> points, std::span<float> out);

  /// x' = x*c - y*s, y' = x*s + y*c. z and intensity untouched.
  void (*rotate_z)(std::span<Point> points, float cos_a, float sin_a);

  /// Negates coordinate `axis` (0 = x, 1 = y, 2 = z) of every point.
  void (*negate_axis)(std::span<Point> points, int axis);

  /// out[i] = cells[i] >= 0 && nearest[cells[i]] < ranges[i] - eps
  void (*occluded)(std::span<const float> ranges,
                   std::span<const std::int32_t> cells,
                   std::span<const double> nearest, double eps,
                   std::span<std::uint8_t> out);

  /// out[i] = cells[i] >= 0 && ranges[i] > nearest[cells[i]] + eps
  void (*shadowed)(std::span<const float> ranges,
                   std::span<const std::int32_t> cells,
                   std::span<const double> nearest, double eps,
                   std::span<std::uint8_t> out);

  /// Per cell: kUncontested unless both minima are finite; then kSecondWins
  /// when second < first - eps, otherwise kFirstWins.
  void (*contest)(std::span<const double> first, std::span<const double> second,
                  double eps, std::span<std::uint8_t> out);
};

const KernelTable& scalar_table() noexcept;

/// Null when the build or the CPU lacks AVX2.
const KernelTable* avx2_table() noexcept;

bool cpu_supports(Backend backend) noexcept;

/// Table used by the library. Selected on first use: AVX2 when available,
/// unless LIDAR_FORGE_KERNELS=scalar is set in the environment.
const KernelTable& active() noexcept;

/// Overrides the runtime choice. Returns false (and changes nothing) when
/// the backend is unavailable on this machine.
bool select(Backend backend) noexcept;

}  // namespace lidar_forge::kernels
