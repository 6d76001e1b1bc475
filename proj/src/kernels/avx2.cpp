// Compiled with -mavx2 (and without -mfma). Only reached after a runtime
// CPU check in dispatch.cpp.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "kernels_impl.hpp"

namespace lidar_forge::kernels::avx2 {

void ranges(std::span<const Point> points, std::span<float> out) {
  const std::size_t n = points.size();
  const float* base = &points.data()->x;
  // After the 8x4 transpose below the lanes hold points 0 2 4 6 1 3 5 7.
  const __m256i restore = _mm256_setr_epi32(0, 4, 1, 5, 2, 6, 3, 7);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const float* p = base + 4 * i;
    const __m256 r0 = _mm256_loadu_ps(p);
    const __m256 r1 = _mm256_loadu_ps(p + 8);
    const __m256 r2 = _mm256_loadu_ps(p + 16);
    const __m256 r3 = _mm256_loadu_ps(p + 24);
    const __m256 t0 = _mm256_unpacklo_ps(r0, r1);
    const __m256 t1 = _mm256_unpackhi_ps(r0, r1);
    const __m256 t2 = _mm256_unpacklo_ps(r2, r3);
    const __m256 t3 = _mm256_unpackhi_ps(r2, r3);
    const __m256 x = _mm256_shuffle_ps(t0, t2, _MM_SHUFFLE(1, 0, 1, 0));
    const __m256 y = _mm256_shuffle_ps(t0, t2, _MM_SHUFFLE(3, 2, 3, 2));
    const __m256 z = _mm256_shuffle_ps(t1, t3, _MM_SHUFFLE(1, 0, 1, 0));
    const __m256 xy = _mm256_add_ps(_mm256_mul_ps(x, x), _mm256_mul_ps(y, y));
    const __m256 r = _mm256_sqrt_ps(_mm256_add_ps(xy, _mm256_mul_ps(z, z)));
    _mm256_storeu_ps(out.data() + i, _mm256_permutevar8x32_ps(r, restore));
  }
  scalar::ranges(points.subspan(i), out.subspan(i));
}

void rotate_z(std::span<Point> points, float c, float s) {
  const std::size_t n = points.size();
  float* base = &points.data()->x;
  const __m256 cos_v = _mm256_set1_ps(c);
  // Lane 0 pairs x*c with y*(-s), lane 1 pairs x*s with y*c, in the operand
  // order of the scalar reference so NaN propagation matches too.
  const __m256 sin_v = _mm256_setr_ps(-s, s, 0.0f, 0.0f, -s, s, 0.0f, 0.0f);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float* p = base + 4 * i;
    const __m256 v = _mm256_loadu_ps(p);
    const __m256 swapped = _mm256_permute_ps(v, _MM_SHUFFLE(3, 2, 0, 1));
    const __m256 direct = _mm256_mul_ps(v, cos_v);      // x*c, y*c
    const __m256 crossed = _mm256_mul_ps(swapped, sin_v);  // y*(-s), x*s
    const __m256 lhs = _mm256_blend_ps(direct, crossed, 0b00100010);
    const __m256 rhs = _mm256_blend_ps(crossed, direct, 0b00100010);
    const __m256 rotated = _mm256_add_ps(lhs, rhs);
    _mm256_storeu_ps(p, _mm256_blend_ps(v, rotated, 0b00110011));
  }
  scalar::rotate_z(points.subspan(i), c, s);
}

void negate_axis(std::span<Point> points, int axis) {
  const std::size_t n = points.size();
  float* base = &points.data()->x;
  alignas(32) float mask[8] = {};
  mask[axis] = -0.0f;
  mask[axis + 4] = -0.0f;
  const __m256 sign = _mm256_load_ps(mask);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float* p = base + 4 * i;
    _mm256_storeu_ps(p, _mm256_xor_ps(_mm256_loadu_ps(p), sign));
  }
  scalar::negate_axis(points.subspan(i), axis);
}

namespace {

inline __m256d gather_nearest(const double* nearest, __m128i cells) {
  const __m128i valid = _mm_cmpgt_epi32(cells, _mm_set1_epi32(-1));
  const __m256d mask = _mm256_castsi256_pd(_mm256_cvtepi32_epi64(valid));
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  return _mm256_mask_i32gather_pd(inf, nearest, cells, mask, 8);
}

inline void store_bits(int bits, std::uint8_t* out) {
  out[0] = static_cast<std::uint8_t>(bits & 1);
  out[1] = static_cast<std::uint8_t>((bits >> 1) & 1);
  out[2] = static_cast<std::uint8_t>((bits >> 2) & 1);
  out[3] = static_cast<std::uint8_t>((bits >> 3) & 1);
}

}  // namespace

void occluded(std::span<const float> ranges, std::span<const std::int32_t> cells,
              std::span<const double> nearest, double eps,
              std::span<std::uint8_t> out) {
  const std::size_t n = ranges.size();
  const __m256d eps_v = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_cvtps_pd(_mm_loadu_ps(ranges.data() + i));
    const __m128i c =
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(cells.data() + i));
    const __m256d near = gather_nearest(nearest.data(), c);
    const __m256d hit = _mm256_cmp_pd(near, _mm256_sub_pd(r, eps_v), _CMP_LT_OQ);
    store_bits(_mm256_movemask_pd(hit), out.data() + i);
  }
  scalar::occluded(ranges.subspan(i), cells.subspan(i), nearest, eps,
                   out.subspan(i));
}

void shadowed(std::span<const float> ranges, std::span<const std::int32_t> cells,
              std::span<const double> nearest, double eps,
              std::span<std::uint8_t> out) {
  const std::size_t n = ranges.size();
  const __m256d eps_v = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d r = _mm256_cvtps_pd(_mm_loadu_ps(ranges.data() + i));
    const __m128i c =
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(cells.data() + i));
    const __m256d near = gather_nearest(nearest.data(), c);
    const __m256d hit = _mm256_cmp_pd(r, _mm256_add_pd(near, eps_v), _CMP_GT_OQ);
    store_bits(_mm256_movemask_pd(hit), out.data() + i);
  }
  scalar::shadowed(ranges.subspan(i), cells.subspan(i), nearest, eps,
                   out.subspan(i));
}

void contest(std::span<const double> first, std::span<const double> second,
             double eps, std::span<std::uint8_t> out) {
  const std::size_t n = first.size();
  const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  const __m256d eps_v = _mm256_set1_pd(eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d a = _mm256_loadu_pd(first.data() + i);
    const __m256d b = _mm256_loadu_pd(second.data() + i);
    const int empty = _mm256_movemask_pd(_mm256_or_pd(
        _mm256_cmp_pd(a, inf, _CMP_EQ_OQ), _mm256_cmp_pd(b, inf, _CMP_EQ_OQ)));
    const int second_wins = _mm256_movemask_pd(
        _mm256_cmp_pd(b, _mm256_sub_pd(a, eps_v), _CMP_LT_OQ));
    for (int j = 0; j < 4; ++j) {
      out[i + j] = (empty >> j) & 1      ? kUncontested
                   : (second_wins >> j) & 1 ? kSecondWins
                                            : kFirstWins;
    }
  }
  scalar::contest(first.subspan(i), second.subspan(i), eps, out.subspan(i));
}

}  // namespace lidar_forge::kernels::avx2
