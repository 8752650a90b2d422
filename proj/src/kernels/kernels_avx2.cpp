#include "noxpred/kernels.hpp"

#if defined(NOXPRED_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

namespace noxpred::kernels::avx2 {

namespace {

constexpr double kExpClamp = 709.43;

inline double clamp_exp_arg(double x) {
    if (x > kExpClamp) return kExpClamp;
    if (x < -kExpClamp) return -kExpClamp;
    return x;
}

// exp() for 4 doubles, cephes-style rational approximation after range
// reduction by powers of two. Agrees with libm to ~2 ulp on the clamped
// domain. NaN lanes propagate.
inline __m256d exp_pd(__m256d x) {
    const __m256d hi = _mm256_set1_pd(kExpClamp);
    const __m256d lo = _mm256_set1_pd(-kExpClamp);
    const __m256d log2e = _mm256_set1_pd(1.44269504088896340736);
    const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
    const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);

    __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
    // max/min return the second operand on unordered, so NaN lanes become
    // finite here and are restored by the final blend.
    __m256d xc = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

    __m256d nf = _mm256_floor_pd(_mm256_fmadd_pd(xc, log2e, _mm256_set1_pd(0.5)));
    __m256d r = _mm256_fnmadd_pd(nf, ln2_hi, xc);
    r = _mm256_fnmadd_pd(nf, ln2_lo, r);
    __m256d r2 = _mm256_mul_pd(r, r);

    __m256d p = _mm256_set1_pd(1.26177193074810590878e-4);
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(3.02994407707441961300e-2));
    p = _mm256_fmadd_pd(p, r2, _mm256_set1_pd(9.99999999999999999910e-1));
    p = _mm256_mul_pd(p, r);
    __m256d q = _mm256_set1_pd(3.00198505138664455042e-6);
    q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.52448340349684104192e-3));
    q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.27265548208155028766e-1));
    q = _mm256_fmadd_pd(q, r2, _mm256_set1_pd(2.0));
    __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
    e = _mm256_fmadd_pd(_mm256_set1_pd(2.0), e, _mm256_set1_pd(1.0));

    // scale by 2^n through the exponent bits
    __m128i n32 = _mm256_cvtpd_epi32(nf);
    __m256i n64 = _mm256_cvtepi32_epi64(n32);
    n64 = _mm256_slli_epi64(_mm256_add_epi64(n64, _mm256_set1_epi64x(1023)), 52);
    e = _mm256_mul_pd(e, _mm256_castsi256_pd(n64));

    return _mm256_blendv_pd(e, x, nan_mask);
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

const __m256d kAbsMask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));

}  // namespace

void powerlaw_eval(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                   double a, double b, double c, double* out) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d arg = _mm256_mul_pd(vb, _mm256_loadu_pd(ln_t_adiab + i));
        arg = _mm256_fmadd_pd(vc, _mm256_loadu_pd(ln_t_comb + i), arg);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, exp_pd(arg)));
    }
    for (; i < n; ++i) {
        out[i] = a * std::exp(clamp_exp_arg(b * ln_t_adiab[i] + c * ln_t_comb[i]));
    }
}

void rate_exp_eval(std::size_t n, const double* x0, const double* x1, const double* x2,
                   double c0, double c1, double c2, double scale, double* out) {
    const __m256d v0 = _mm256_set1_pd(c0);
    const __m256d v1 = _mm256_set1_pd(c1);
    const __m256d v2 = _mm256_set1_pd(c2);
    const __m256d vs = _mm256_set1_pd(scale);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d arg = _mm256_mul_pd(v0, _mm256_loadu_pd(x0 + i));
        arg = _mm256_fmadd_pd(v1, _mm256_loadu_pd(x1 + i), arg);
        arg = _mm256_fmadd_pd(v2, _mm256_loadu_pd(x2 + i), arg);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(vs, exp_pd(arg)));
    }
    for (; i < n; ++i) {
        out[i] = scale * std::exp(clamp_exp_arg(c0 * x0[i] + c1 * x1[i] + c2 * x2[i]));
    }
}

double powerlaw_sse(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                    const double* y, double a, double b, double c) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    const __m256d vc = _mm256_set1_pd(c);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d arg = _mm256_mul_pd(vb, _mm256_loadu_pd(ln_t_adiab + i));
        arg = _mm256_fmadd_pd(vc, _mm256_loadu_pd(ln_t_comb + i), arg);
        __m256d m = _mm256_mul_pd(va, exp_pd(arg));
        __m256d r = _mm256_sub_pd(_mm256_loadu_pd(y + i), m);
        acc = _mm256_fmadd_pd(r, r, acc);
    }
    double sse = hsum(acc);
    for (; i < n; ++i) {
        double m = a * std::exp(clamp_exp_arg(b * ln_t_adiab[i] + c * ln_t_comb[i]));
        double r = y[i] - m;
        sse += r * r;
    }
    return sse;
}

NormalEq lm_accumulate(std::size_t n, const double* ln_t_adiab, const double* ln_t_comb,
                       const double* y, double a, double b, double c) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    const __m256d vc = _mm256_set1_pd(c);
    __m256d jtj00 = _mm256_setzero_pd(), jtj01 = _mm256_setzero_pd();
    __m256d jtj02 = _mm256_setzero_pd(), jtj11 = _mm256_setzero_pd();
    __m256d jtj12 = _mm256_setzero_pd(), jtj22 = _mm256_setzero_pd();
    __m256d jtr0 = _mm256_setzero_pd(), jtr1 = _mm256_setzero_pd();
    __m256d jtr2 = _mm256_setzero_pd(), vsse = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d lt = _mm256_loadu_pd(ln_t_adiab + i);
        __m256d lc = _mm256_loadu_pd(ln_t_comb + i);
        __m256d arg = _mm256_fmadd_pd(vc, lc, _mm256_mul_pd(vb, lt));
        __m256d e = exp_pd(arg);
        __m256d m = _mm256_mul_pd(va, e);
        __m256d r = _mm256_sub_pd(_mm256_loadu_pd(y + i), m);
        __m256d j1 = _mm256_mul_pd(m, lt);
        __m256d j2 = _mm256_mul_pd(m, lc);
        jtj00 = _mm256_fmadd_pd(e, e, jtj00);
        jtj01 = _mm256_fmadd_pd(e, j1, jtj01);
        jtj02 = _mm256_fmadd_pd(e, j2, jtj02);
        jtj11 = _mm256_fmadd_pd(j1, j1, jtj11);
        jtj12 = _mm256_fmadd_pd(j1, j2, jtj12);
        jtj22 = _mm256_fmadd_pd(j2, j2, jtj22);
        jtr0 = _mm256_fmadd_pd(e, r, jtr0);
        jtr1 = _mm256_fmadd_pd(j1, r, jtr1);
        jtr2 = _mm256_fmadd_pd(j2, r, jtr2);
        vsse = _mm256_fmadd_pd(r, r, vsse);
    }
    NormalEq acc{};
    acc.jtj[0] = hsum(jtj00);
    acc.jtj[1] = hsum(jtj01);
    acc.jtj[2] = hsum(jtj02);
    acc.jtj[3] = hsum(jtj11);
    acc.jtj[4] = hsum(jtj12);
    acc.jtj[5] = hsum(jtj22);
    acc.jtr[0] = hsum(jtr0);
    acc.jtr[1] = hsum(jtr1);
    acc.jtr[2] = hsum(jtr2);
    acc.sse = hsum(vsse);
    for (; i < n; ++i) {
        double lt = ln_t_adiab[i];
        double lc = ln_t_comb[i];
        double e = std::exp(clamp_exp_arg(b * lt + c * lc));
        double m = a * e;
        double r = y[i] - m;
        double j1 = m * lt;
        double j2 = m * lc;
        acc.jtj[0] += e * e;
        acc.jtj[1] += e * j1;
        acc.jtj[2] += e * j2;
        acc.jtj[3] += j1 * j1;
        acc.jtj[4] += j1 * j2;
        acc.jtj[5] += j2 * j2;
        acc.jtr[0] += e * r;
        acc.jtr[1] += j1 * r;
        acc.jtr[2] += j2 * r;
        acc.sse += r * r;
    }
    return acc;
}

void abs_diff(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        _mm256_storeu_pd(out + i, _mm256_and_pd(d, kAbsMask));
    }
    for (; i < n; ++i) {
        out[i] = std::fabs(a[i] - b[i]);
    }
}

void window_sums(std::size_t n, const double* e, std::size_t len, double* out) {
    // Vectorized across windows; each lane adds its window left to right,
    // so every output is bit-identical to the scalar reference.
    std::size_t count = n - len + 1;
    std::size_t i = 0;
    for (; i + 4 <= count; i += 4) {
        __m256d s = _mm256_loadu_pd(e + i);
        for (std::size_t j = 1; j < len; ++j) {
            s = _mm256_add_pd(s, _mm256_loadu_pd(e + i + j));
        }
        _mm256_storeu_pd(out + i, s);
    }
    for (; i < count; ++i) {
        double s = e[i];
        for (std::size_t j = 1; j < len; ++j) s += e[i + j];
        out[i] = s;
    }
}

void match_sequence(std::size_t n, const std::int8_t* sym, std::size_t len,
                    const std::int8_t* pat, std::uint8_t* out) {
    std::size_t count = n - len + 1;
    std::size_t i = 0;
    const __m256i one = _mm256_set1_epi8(1);
    for (; i + 32 <= count; i += 32) {
        __m256i acc = _mm256_set1_epi8(static_cast<char>(0xff));
        for (std::size_t j = 0; j < len; ++j) {
            __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(sym + i + j));
            acc = _mm256_and_si256(acc, _mm256_cmpeq_epi8(v, _mm256_set1_epi8(pat[j])));
        }
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(out + i), _mm256_and_si256(acc, one));
    }
    for (; i < count; ++i) {
        std::uint8_t hit = 1;
        for (std::size_t j = 0; j < len; ++j) {
            hit &= static_cast<std::uint8_t>(sym[i + j] == pat[j]);
        }
        out[i] = hit;
    }
}

double sum(std::size_t n, const double* x) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double sum_sq_diff(std::size_t n, const double* a, const double* b) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

double sum_abs_diff(std::size_t n, const double* a, const double* b) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_and_pd(d, kAbsMask));
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += std::fabs(a[i] - b[i]);
    return s;
}

double sum_sq_dev(std::size_t n, const double* x, double mean) {
    const __m256d vm = _mm256_set1_pd(mean);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        double d = x[i] - mean;
        s += d * d;
    }
    return s;
}

}  // namespace noxpred::kernels::avx2

#endif  // NOXPRED_HAVE_AVX2
