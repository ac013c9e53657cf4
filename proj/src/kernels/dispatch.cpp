#include "viewpaint/kernels.hpp"

#include <cstdlib>

namespace viewpaint::kern {

#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
const Kernels& avx2_kernels();  // kernels_avx2.cpp

static bool avx2_supported() {
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

#if defined(__aarch64__)
const Kernels& neon_kernels();  // kernels_neon.cpp
#endif

namespace {

const Kernels* lookup(std::string_view name) {
    if (name == "scalar") return &scalar_kernels();
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
    if (name == "avx2" && avx2_supported()) return &avx2_kernels();
#endif
#if defined(__aarch64__)
    if (name == "neon") return &neon_kernels();
#endif
    return nullptr;
}

const Kernels* pick_default() {
    if (const char* env = std::getenv("VIEWPAINT_KERNELS")) {
        if (const Kernels* k = lookup(env)) return k;
    }
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
    if (avx2_supported()) return &avx2_kernels();
#endif
#if defined(__aarch64__)
    return &neon_kernels();
#endif
    return &scalar_kernels();
}

const Kernels*& selected() {
    static const Kernels* k = pick_default();
    return k;
}

}  // namespace

const Kernels& active() { return *selected(); }

bool select(std::string_view name) {
    if (const Kernels* k = lookup(name)) {
        selected() = k;
        return true;
    }
    return false;
}

std::vector<std::string> available() {
    std::vector<std::string> out = {"scalar"};
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
    if (avx2_supported()) out.push_back("avx2");
#endif
#if defined(__aarch64__)
    out.push_back("neon");
#endif
    return out;
}

}  // namespace viewpaint::kern
