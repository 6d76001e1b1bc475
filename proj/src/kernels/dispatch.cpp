#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace lidar_forge::kernels {

namespace {

constexpr KernelTable kScalarTable{Backend::kScalar, scalar::ranges,
                                   scalar::rotate_z,  scalar::negate_axis,
                                   scalar::occluded,  scalar::shadowed,
                                   scalar::contest};

#if defined(LIDAR_FORGE_HAVE_AVX2)
constexpr KernelTable kAvx2Table{Backend::kAvx2,  avx2::ranges,
                                 avx2::rotate_z,  avx2::negate_axis,
                                 avx2::occluded,  avx2::shadowed,
                                 avx2::contest};
#endif

const KernelTable* initial_table() noexcept {
  const char* env = std::getenv("LIDAR_FORGE_KERNELS");
  if (env != nullptr && std::string_view(env) == "scalar") return &kScalarTable;
  if (const auto* t = avx2_table()) return t;
  return &kScalarTable;
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar: return "scalar";
    case Backend::kAvx2: return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Backend backend) noexcept {
  switch (backend) {
    case Backend::kScalar: return true;
    case Backend::kAvx2:
#if defined(LIDAR_FORGE_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& scalar_table() noexcept { return kScalarTable; }

const KernelTable* avx2_table() noexcept {
#if defined(LIDAR_FORGE_HAVE_AVX2)
  if (cpu_supports(Backend::kAvx2)) return &kAvx2Table;
#endif
  return nullptr;
}

const KernelTable& active() noexcept {
  return *current().load(std::memory_order_acquire);
}

bool select(Backend backend) noexcept {
  const KernelTable* table =
      backend == Backend::kScalar ? &kScalarTable : avx2_table();
  if (table == nullptr) return false;
  current().store(table, std::memory_order_release);
  return true;
}

}  // namespace lidar_forge::kernels
