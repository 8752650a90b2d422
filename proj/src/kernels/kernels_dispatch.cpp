#include "noxpred/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "noxpred/common.hpp"

namespace noxpred::kernels {

namespace {

bool avx2_available() {
#if defined(NOXPRED_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect_backend() {
    const char* env = std::getenv("NOXPRED_KERNELS");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0) {
            if (avx2_available()) return Backend::avx2;
            log_warn("NOXPRED_KERNELS=avx2 requested but AVX2 is unavailable; using scalar");
            return Backend::scalar;
        }
        log_warn(std::string("unknown NOXPRED_KERNELS value '") + env + "'; autodetecting");
    }
    return avx2_available() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
    static std::atomic<Backend> slot{detect_backend()};
    return slot;
}

}  // namespace

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

const char* backend_name() {
    return active_backend() == Backend::avx2 ? "avx2" : "scalar";
}

void set_backend(Backend backend) {
    if (backend == Backend::avx2 && !avx2_available()) {
        log_warn("AVX2 backend requested but unavailable; keeping scalar");
        backend = Backend::scalar;
    }
    backend_slot().store(backend, std::memory_order_relaxed);
}

#if defined(NOXPRED_HAVE_AVX2)
#define NOXPRED_DISPATCH(call) \
    return active_backend() == Backend::avx2 ? avx2::call : scalar::call
#else
#define NOXPRED_DISPATCH(call) return scalar::call
#endif

void powerlaw_eval(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                   double a, double b, double c, double* out) {
    NOXPRED_DISPATCH(powerlaw_eval(n, ln_t_adiab, ln_t_comb, a, b, c, out));
}

void rate_exp_eval(std::size_t n, const double* x0, const double* x1, const double* x2,
                   double c0, double c1, double c2, double scale, double* out) {
    NOXPRED_DISPATCH(rate_exp_eval(n, x0, x1, x2, c0, c1, c2, scale, out));
}

double powerlaw_sse(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                    const double* y, double a, double b, double c) {
    NOXPRED_DISPATCH(powerlaw_sse(n, ln_t_adiab, ln_t_comb, y, a, b, c));
}

NormalEq lm_accumulate(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                       const double* y, double a, double b, double c) {
    NOXPRED_DISPATCH(lm_accumulate(n, ln_t_adiab, ln_t_comb, y, a, b, c));
}

void abs_diff(std::size_t n, const double* a, const double* b, double* out) {
    NOXPRED_DISPATCH(abs_diff(n, a, b, out));
}

void window_sums(std::size_t n, const double* e, std::size_t len, double* out) {
    NOXPRED_DISPATCH(window_sums(n, e, len, out));
}

void match_sequence(std::size_t n, const std::int8_t* sym, std::size_t len,
                    const std::int8_t* pat, std::uint8_t* out) {
    NOXPRED_DISPATCH(match_sequence(n, sym, len, pat, out));
}

double sum(std::size_t n, const double* x) { NOXPRED_DISPATCH(sum(n, x)); }

double sum_sq_diff(std::size_t n, const double* a, const double* b) {
    NOXPRED_DISPATCH(sum_sq_diff(n, a, b));
}

double sum_abs_diff(std::size_t n, const double* a, const double* b) {
    NOXPRED_DISPATCH(sum_abs_diff(n, a, b));
}

double sum_sq_dev(std::size_t n, const double* x, double mean) {
    NOXPRED_DISPATCH(sum_sq_dev(n, x, mean));
}

#undef NOXPRED_DISPATCH

}  // namespace noxpred::kernels
