// Micro-benchmark for the kernel backends. Not part of the test suite;
// handy when tuning the GEMM microkernel.
//
//   bench [backend] [size]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "viewpaint/kernels.hpp"
#include "viewpaint/rng.hpp"

using namespace viewpaint;

namespace {

double time_gemm(void (*gemm)(const float*, const float*, float*, std::size_t, std::size_t,
                              std::size_t, bool),
                 std::size_t m, std::size_t k, std::size_t n, int reps) {
    Rng rng(1234);
    std::vector<float> a(m * k), b(k * n), c(m * n);
    for (auto& v : a) v = static_cast<float>(rng.normal());
    for (auto& v : b) v = static_cast<float>(rng.normal());
    gemm(a.data(), b.data(), c.data(), m, k, n, false);  // warm up
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) gemm(a.data(), b.data(), c.data(), m, k, n, false);
    const auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();
    return 2.0 * static_cast<double>(m) * static_cast<double>(k) * static_cast<double>(n) *
           reps / sec;
}

}  // namespace

int main(int argc, char** argv) {
    std::string backend = argc > 1 ? argv[1] : "";
    std::size_t size = argc > 2 ? static_cast<std::size_t>(std::atoi(argv[2])) : 256;
    if (!backend.empty() && !kern::select(backend)) {
        std::fprintf(stderr, "backend '%s' not available\n", backend.c_str());
        return 1;
    }
    const auto& k = kern::active();
    std::printf("backend: %s\n", k.name);
    const int reps = size >= 512 ? 10 : 100;
    std::printf("gemm_nn %4zu^3: %7.2f GFLOP/s\n", size,
                time_gemm(k.gemm_nn, size, size, size, reps) / 1e9);
    std::printf("gemm_nt %4zu^3: %7.2f GFLOP/s\n", size,
                time_gemm(k.gemm_nt, size, size, size, reps) / 1e9);
    std::printf("gemm_tn %4zu^3: %7.2f GFLOP/s\n", size,
                time_gemm(k.gemm_tn, size, size, size, reps) / 1e9);
    // the shapes that dominate training at the toy config
    std::printf("gemm_nn 65x128x128: %7.2f GFLOP/s\n",
                time_gemm(k.gemm_nn, 65, 128, 128, 2000) / 1e9);
    std::printf("gemm_nn 65x128x512: %7.2f GFLOP/s\n",
                time_gemm(k.gemm_nn, 65, 128, 512, 1000) / 1e9);
    return 0;
}
