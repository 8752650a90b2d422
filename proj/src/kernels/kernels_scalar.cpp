#include "noxpred/kernels.hpp"

#include <cmath>

// Scalar reference kernels. These are the semantic ground truth the AVX2
// variants are tested against.

namespace noxpred::kernels::scalar {

namespace {

constexpr double kExpClamp = 709.43;

// Clamp that lets NaN through (NaN fails both comparisons).
inline double clamp_exp_arg(double x) {
    if (x > kExpClamp) return kExpClamp;
    if (x < -kExpClamp) return -kExpClamp;
    return x;
}

}  // namespace

void powerlaw_eval(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                   double a, double b, double c, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a * std::exp(clamp_exp_arg(b * ln_t_adiab[i] + c * ln_t_comb[i]));
    }
}

void rate_exp_eval(std::size_t n, const double* x0, const double* x1, const double* x2,
                   double c0, double c1, double c2, double scale, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = scale * std::exp(clamp_exp_arg(c0 * x0[i] + c1 * x1[i] + c2 * x2[i]));
    }
}

double powerlaw_sse(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                    const double* y, double a, double b, double c) {
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double m = a * std::exp(clamp_exp_arg(b * ln_t_adiab[i] + c * ln_t_comb[i]));
        double r = y[i] - m;
        sse += r * r;
    }
    return sse;
}

NormalEq lm_accumulate(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                       const double* y, double a, double b, double c) {
    NormalEq acc{};
    for (std::size_t i = 0; i < n; ++i) {
        double lt = ln_t_adiab[i];
        double lc = ln_t_comb[i];
        // e = model / a, so the Jacobian columns of the model are
        // [e, a*e*lt, a*e*lc] = [dm/da, dm/db, dm/dc].
        double e = std::exp(clamp_exp_arg(b * lt + c * lc));
        double m = a * e;
        double r = y[i] - m;
        double j0 = e;
        double j1 = m * lt;
        double j2 = m * lc;
        acc.jtj[0] += j0 * j0;
        acc.jtj[1] += j0 * j1;
        acc.jtj[2] += j0 * j2;
        acc.jtj[3] += j1 * j1;
        acc.jtj[4] += j1 * j2;
        acc.jtj[5] += j2 * j2;
        acc.jtr[0] += j0 * r;
        acc.jtr[1] += j1 * r;
        acc.jtr[2] += j2 * r;
        acc.sse += r * r;
    }
    return acc;
}

void abs_diff(std::size_t n, const double* a, const double* b, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::fabs(a[i] - b[i]);
    }
}

void window_sums(std::size_t n, const double* e, std::size_t len, double* out) {
    // Fresh left-to-right sum per window. No rolling update: every window
    // is summed in the exact order the brute-force oracle uses, so results
    // are bit-identical to it (including NaN propagation).
    std::size_t count = n - len + 1;
    for (std::size_t i = 0; i < count; ++i) {
        double s = e[i];
        for (std::size_t j = 1; j < len; ++j) {
            s += e[i + j];
        }
        out[i] = s;
    }
}

void match_sequence(std::size_t n, const std::int8_t* sym, std::size_t len,
                    const std::int8_t* pat, std::uint8_t* out) {
    std::size_t count = n - len + 1;
    for (std::size_t i = 0; i < count; ++i) {
        std::uint8_t hit = 1;
        for (std::size_t j = 0; j < len; ++j) {
            hit &= static_cast<std::uint8_t>(sym[i + j] == pat[j]);
        }
        out[i] = hit;
    }
}

double sum(std::size_t n, const double* x) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

double sum_sq_diff(std::size_t n, const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double sum_abs_diff(std::size_t n, const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

double sum_sq_dev(std::size_t n, const double* x, double mean) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = x[i] - mean;
        s += d * d;
    }
    return s;
}

}  // namespace noxpred::kernels::scalar
