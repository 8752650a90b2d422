#pragma once

#include <cstddef>
#include <cstdint>

// Numeric inner loops shared by the fitting, prediction, divergence and
// mining stages. Each kernel exists as a scalar reference implementation
// and, on x86-64, an AVX2 variant selected at runtime. Semantics are
// defined by the scalar versions:
//
//   - powerlaw_eval / rate_exp_eval / powerlaw_sse / lm_accumulate use
//     exp() internally; the AVX2 variants agree with scalar to a few ulp
//     per element (not bit-exact).
//   - abs_diff, window_sums and match_sequence are bit-exact across
//     backends (per-element operation order is identical).
//   - the reductions (sum, sum_sq_diff, ...) differ only by summation
//     order.
//
// Exponent arguments are clamped to [-709.43, 709.43] before
// exponentiation; NaN inputs propagate to NaN outputs.

namespace noxpred::kernels {

// Accumulated normal equations for one Gauss-Newton step of the
// three-parameter power-law fit. jtj holds the upper triangle of J^T J
// in the order aa, ab, ac, bb, bc, cc; jtr is J^T r with r = y - model.
struct NormalEq {
    double jtj[6];
    double jtr[3];
    double sse;
};

#define NOXPRED_KERNEL_DECLS                                                            \
    /* out[i] = a * exp(b*ln_t_adiab[i] + c*ln_t_comb[i]) */                            \
    void powerlaw_eval(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,\
                       double a, double b, double c, double* out);                      \
    /* out[i] = scale * exp(c0*x0[i] + c1*x1[i] + c2*x2[i]) */                          \
    void rate_exp_eval(std::size_t n, const double* x0, const double* x1,               \
                       const double* x2, double c0, double c1, double c2, double scale, \
                       double* out);                                                    \
    double powerlaw_sse(std::size_t n, const double* ln_t_adiab,                        \
                        const double* ln_t_comb, const double* y, double a, double b,   \
                        double c);                                                      \
    NormalEq lm_accumulate(std::size_t n, const double* ln_t_adiab,                     \
                           const double* ln_t_comb, const double* y, double a,          \
                           double b, double c);                                         \
    /* out[i] = |a[i] - b[i]| */                                                        \
    void abs_diff(std::size_t n, const double* a, const double* b, double* out);        \
    /* out[i] = e[i] + e[i+1] + ... + e[i+len-1], left to right; n >= len >= 1,        \
       out has n - len + 1 entries */                                                   \
    void window_sums(std::size_t n, const double* e, std::size_t len, double* out);     \
    /* out[i] = 1 iff sym[i..i+len-1] == pat[0..len-1]; out has n - len + 1 entries */  \
    void match_sequence(std::size_t n, const std::int8_t* sym, std::size_t len,         \
                        const std::int8_t* pat, std::uint8_t* out);                     \
    double sum(std::size_t n, const double* x);                                         \
    double sum_sq_diff(std::size_t n, const double* a, const double* b);                \
    double sum_abs_diff(std::size_t n, const double* a, const double* b);               \
    double sum_sq_dev(std::size_t n, const double* x, double mean);

namespace scalar {
NOXPRED_KERNEL_DECLS
}

#if defined(NOXPRED_HAVE_AVX2)
namespace avx2 {
NOXPRED_KERNEL_DECLS
}
#endif

enum class Backend { scalar, avx2 };

// Selected at first use: AVX2 when the CPU supports it and the build
// includes it, unless overridden by set_backend() or the environment
// variable NOXPRED_KERNELS=scalar|avx2.
Backend active_backend();
const char* backend_name();
void set_backend(Backend backend);

// Dispatched entry points.
NOXPRED_KERNEL_DECLS

#undef NOXPRED_KERNEL_DECLS

}  // namespace noxpred::kernels
