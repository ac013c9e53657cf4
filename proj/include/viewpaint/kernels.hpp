#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace viewpaint::kern {

// Function table for the float32 inner loops of the tensor engine.
//
// Every backend (scalar, avx2, neon) implements the same table. The scalar
// backend is the reference semantics; SIMD backends must agree with it up to
// floating-point reassociation (see tests/test_kernels.cpp). Reductions
// accumulate in double in every backend.
//
// All gemm variants operate on dense row-major matrices:
//   gemm_nn: C[m,n] = A[m,k] * B[k,n]
//   gemm_nt: C[m,n] = A[m,k] * B[n,k]^T
//   gemm_tn: C[m,n] = A[k,m]^T * B[k,n]
// With accumulate=true the product is added onto the existing C.
struct Kernels {
    const char* name;

    void (*add)(const float* a, const float* b, float* out, std::size_t n);
    void (*sub)(const float* a, const float* b, float* out, std::size_t n);
    void (*mul)(const float* a, const float* b, float* out, std::size_t n);
    void (*div)(const float* a, const float* b, float* out, std::size_t n);
    void (*scale)(const float* a, float s, float* out, std::size_t n);  // out = s*a
    void (*axpy)(float s, const float* x, float* y, std::size_t n);     // y += s*x

    double (*sum)(const float* a, std::size_t n);
    double (*dot)(const float* a, const float* b, std::size_t n);
    double (*sqdiff_sum)(const float* a, const float* b, std::size_t n);  // sum (a-b)^2

    void (*gemm_nn)(const float* a, const float* b, float* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
    void (*gemm_nt)(const float* a, const float* b, float* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
    void (*gemm_tn)(const float* a, const float* b, float* c,
                    std::size_t m, std::size_t k, std::size_t n, bool accumulate);
};

const Kernels& scalar_kernels();

// Currently selected backend. Chosen once on first use: the best SIMD level
// the CPU supports, unless overridden by the VIEWPAINT_KERNELS environment
// variable ("scalar", "avx2", "neon").
const Kernels& active();

// Force a backend by name; returns false if it is not available on this CPU.
// Intended for tests and benchmarks. Not thread-safe against concurrent
// kernel users.
bool select(std::string_view name);

// Names of all backends usable on this machine.
std::vector<std::string> available();

}  // namespace viewpaint::kern
