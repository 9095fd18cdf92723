#include "sno/simd/kernels.hpp"

#include <cstdlib>
#include <string_view>

namespace sno::simd {

#if defined(SNO_HAVE_AVX2)
namespace detail {
extern const KernelTable kAvx2Table;
}
#endif

std::string_view to_string(Isa isa) noexcept {
    switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

const KernelTable* avx2_kernels() noexcept {
#if defined(SNO_HAVE_AVX2)
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    }();
    return supported ? &detail::kAvx2Table : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() noexcept {
    static const KernelTable* table = [] {
        if (const char* env = std::getenv("SNO_SIMD"); env && std::string_view(env) == "scalar")
            return &scalar_kernels();
        if (const KernelTable* t = avx2_kernels()) return t;
        return &scalar_kernels();
    }();
    return *table;
}

}  // namespace sno::simd
