#include "noxpred/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "noxpred/common.hpp"
#include "noxpred/kernels.hpp"

namespace noxpred::regression {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Gaussian elimination with partial pivoting for the 3x3 systems of the
// OLS init and the damped normal equations. Returns false when singular.
bool solve3(double m[3][3], double rhs[3], double out[3]) {
    int piv[3] = {0, 1, 2};
    for (int col = 0; col < 3; ++col) {
        int best = col;
        for (int r = col + 1; r < 3; ++r) {
            if (std::fabs(m[piv[r]][col]) > std::fabs(m[piv[best]][col])) best = r;
        }
        std::swap(piv[col], piv[best]);
        double p = m[piv[col]][col];
        if (p == 0.0 || !std::isfinite(p)) return false;
        for (int r = col + 1; r < 3; ++r) {
            double f = m[piv[r]][col] / p;
            for (int c2 = col; c2 < 3; ++c2) m[piv[r]][c2] -= f * m[piv[col]][c2];
            rhs[piv[r]] -= f * rhs[piv[col]];
        }
    }
    for (int col = 2; col >= 0; --col) {
        double s = rhs[piv[col]];
        for (int c2 = col + 1; c2 < 3; ++c2) s -= m[piv[col]][c2] * out[c2];
        out[col] = s / m[piv[col]][col];
        if (!std::isfinite(out[col])) return false;
    }
    return true;
}

}  // namespace

void PowerLawParams::check() const {
    if (!(a > 0.0) || !std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
        throw ConfigError("power-law params require finite values and a > 0");
    }
    if (delta < 0) throw ConfigError("power-law delta must be >= 0");
}

void LmOptions::check() const {
    if (max_iterations <= 0 || !(lambda_init > 0.0) || !(lambda_up > 1.0) ||
        !(lambda_down > 0.0) || !(lambda_down < 1.0) || !(rel_tol > 0.0) ||
        min_samples == 0) {
        throw ConfigError("invalid LM options");
    }
}

SampleSet build_samples(const physics::FeatureSeries& features, const SeriesPerRun& observed,
                        int delta) {
    if (delta < 0) throw ConfigError("build_samples: delta must be >= 0");
    if (observed.size() != features.size()) {
        throw PipelineError("build_samples: observed series shape mismatch");
    }

    SampleSet s;
    s.delta = delta;
    std::size_t skipped_invalid = 0;
    std::size_t skipped_range = 0;
    std::size_t skipped_target = 0;

    for (std::size_t r = 0; r < features.size(); ++r) {
        const auto& f = features[r];
        const auto& obs = observed[r];
        if (obs.size() != f.size()) {
            throw PipelineError("build_samples: run length mismatch at run index " +
                                std::to_string(r));
        }
        const std::size_t n = f.size();
        for (std::size_t k = 0; k < n; ++k) {
            if (!f.valid[k]) {
                ++skipped_invalid;
                continue;
            }
            std::size_t target = k + static_cast<std::size_t>(delta);
            if (target >= n) {
                ++skipped_range;
                continue;
            }
            double y = obs[target];
            if (!std::isfinite(y)) {
                ++skipped_target;
                continue;
            }
            s.ln_t_adiab.push_back(std::log(f.t_adiab[k]));
            s.ln_t_comb.push_back(std::log(f.t_comb[k]));
            s.y.push_back(y);
            s.run_index.push_back(static_cast<std::uint32_t>(r));
            s.source_k.push_back(static_cast<std::uint32_t>(k));
        }
    }

    if (s.size() == 0) {
        throw PipelineError("build_samples: no samples (invalid features: " +
                            std::to_string(skipped_invalid) +
                            ", target out of range: " + std::to_string(skipped_range) +
                            ", undefined targets: " + std::to_string(skipped_target) + ")");
    }
    return s;
}

PowerLawParams log_ols_init(const SampleSet& samples, const LmOptions& opts) {
    opts.check();

    std::vector<double> lt, lc, ly;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples.y[i] > 0.0) {
            lt.push_back(samples.ln_t_adiab[i]);
            lc.push_back(samples.ln_t_comb[i]);
            ly.push_back(std::log(samples.y[i]));
        }
    }
    const std::size_t n = ly.size();
    if (n < opts.min_samples) {
        throw PipelineError("log_ols_init: only " + std::to_string(n) +
                            " positive targets (need " + std::to_string(opts.min_samples) + ")");
    }

    auto mean = [n](const std::vector<double>& v) {
        return kernels::sum(n, v.data()) / static_cast<double>(n);
    };
    const double mt = mean(lt);
    const double mc = mean(lc);
    const double my = mean(ly);
    const double var_t = kernels::sum_sq_dev(n, lt.data(), mt) / static_cast<double>(n);
    const double var_c = kernels::sum_sq_dev(n, lc.data(), mc) / static_cast<double>(n);

    // A regressor whose spread is negligible relative to its magnitude is
    // treated as constant (rank-deficient design).
    auto is_const = [](double var, double m) {
        return std::sqrt(var) <= 1e-10 * (std::fabs(m) + 1.0);
    };
    const bool const_t = is_const(var_t, mt);
    const bool const_c = is_const(var_c, mc);

    PowerLawParams p;
    p.delta = samples.delta;
    if (const_t && const_c) {
        p.a = std::exp(my);  // geometric mean of y
        p.b = 0.0;
        p.c = 0.0;
        return p;
    }
    if (const_t || const_c) {
        // Single-regressor OLS in centered form.
        const std::vector<double>& x = const_t ? lc : lt;
        const double mx = const_t ? mc : mt;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (ly[i] - my);
        }
        double slope = sxy / sxx;
        p.b = const_t ? 0.0 : slope;
        p.c = const_t ? slope : 0.0;
        p.a = std::exp(my - p.b * mt - p.c * mc);
        return p;
    }

    // Full 3-parameter OLS via normal equations on [1, lnT, lnt].
    double s_t = 0, s_c = 0, s_tt = 0, s_tc = 0, s_cc = 0, s_y = 0, s_ty = 0, s_cy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        s_t += lt[i];
        s_c += lc[i];
        s_tt += lt[i] * lt[i];
        s_tc += lt[i] * lc[i];
        s_cc += lc[i] * lc[i];
        s_y += ly[i];
        s_ty += lt[i] * ly[i];
        s_cy += lc[i] * ly[i];
    }
    double nn = static_cast<double>(n);
    double m[3][3] = {{nn, s_t, s_c}, {s_t, s_tt, s_tc}, {s_c, s_tc, s_cc}};
    double rhs[3] = {s_y, s_ty, s_cy};
    double sol[3];
    if (!solve3(m, rhs, sol)) {
        // Nearly collinear regressors: keep the geometric-mean fallback.
        p.a = std::exp(my);
        p.b = 0.0;
        p.c = 0.0;
        return p;
    }
    p.a = std::exp(sol[0]);
    p.b = sol[1];
    p.c = sol[2];
    return p;
}

FitReport fit_lm(const SampleSet& samples, const PowerLawParams& init, const LmOptions& opts) {
    opts.check();
    init.check();
    if (samples.size() < opts.min_samples) {
        throw PipelineError("fit_lm: " + std::to_string(samples.size()) + " samples (need " +
                            std::to_string(opts.min_samples) + ")");
    }

    const std::size_t n = samples.size();
    const double* lt = samples.ln_t_adiab.data();
    const double* lc = samples.ln_t_comb.data();
    const double* y = samples.y.data();

    double a = init.a, b = init.b, c = init.c;
    double sse = kernels::powerlaw_sse(n, lt, lc, y, a, b, c);
    if (!std::isfinite(sse)) {
        // Locate the first offending sample for the error message.
        std::vector<double> m(n);
        kernels::powerlaw_eval(n, lt, lc, a, b, c, m.data());
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(y[i] - m[i])) {
                throw PipelineError("fit_lm: non-finite residual at sample " + std::to_string(i));
            }
        }
        throw PipelineError("fit_lm: non-finite SSE at the initial point");
    }

    FitReport rep;
    rep.n_samples = n;
    rep.sse_initial = sse;
    rep.params.delta = samples.delta;

    double lambda = opts.lambda_init;
    bool converged = false;
    int iter = 0;

    // SSE below fp noise of the target scale counts as an exact fit.
    const double sse_floor = 1e-20 * kernels::sum_sq_dev(n, y, 0.0);
    if (sse <= sse_floor) converged = true;

    while (!converged && iter < opts.max_iterations) {
        ++iter;
        kernels::NormalEq eq = kernels::lm_accumulate(n, lt, lc, y, a, b, c);
        if (eq.jtr[0] == 0.0 && eq.jtr[1] == 0.0 && eq.jtr[2] == 0.0) {
            converged = true;
            break;
        }

        // Marquardt scaling: damp the diagonal of J^T J.
        double m[3][3] = {{eq.jtj[0] * (1.0 + lambda), eq.jtj[1], eq.jtj[2]},
                          {eq.jtj[1], eq.jtj[3] * (1.0 + lambda), eq.jtj[4]},
                          {eq.jtj[2], eq.jtj[4], eq.jtj[5] * (1.0 + lambda)}};
        double rhs[3] = {eq.jtr[0], eq.jtr[1], eq.jtr[2]};
        double step[3];
        if (!solve3(m, rhs, step)) {
            lambda *= opts.lambda_up;
            if (lambda > 1e15) break;
            continue;
        }

        // Keep `a` strictly positive by halving the step if needed.
        int halvings = 0;
        while (a + step[0] <= 0.0 && halvings < 64) {
            step[0] *= 0.5;
            step[1] *= 0.5;
            step[2] *= 0.5;
            ++halvings;
        }
        if (a + step[0] <= 0.0) {
            lambda *= opts.lambda_up;
            continue;
        }

        double a2 = a + step[0], b2 = b + step[1], c2 = c + step[2];
        double sse2 = kernels::powerlaw_sse(n, lt, lc, y, a2, b2, c2);

        if (std::isfinite(sse2) && sse2 < sse) {
            double decrease = (sse - sse2) / sse;
            a = a2;
            b = b2;
            c = c2;
            sse = sse2;
            rep.accepted_sse_trace.push_back(sse);
            lambda = std::max(lambda * opts.lambda_down, 1e-15);
            if (decrease < opts.rel_tol || sse <= sse_floor) converged = true;
        } else {
            if (std::isfinite(sse2) && std::fabs(sse2 - sse) <= opts.rel_tol * sse) {
                // Plateau: no step at this damping improves measurably.
                converged = true;
            } else {
                lambda *= opts.lambda_up;
                if (lambda > 1e15) break;
            }
        }
    }

    rep.params.a = a;
    rep.params.b = b;
    rep.params.c = c;
    rep.iterations = iter;
    rep.converged = converged;
    rep.sse_final = sse;
    return rep;
}

SeriesPerRun predict(const PowerLawParams& params, const physics::FeatureSeries& features) {
    params.check();
    const std::size_t delta = static_cast<std::size_t>(params.delta);
    SeriesPerRun out;
    out.reserve(features.size());
    for (const auto& f : features) {
        const std::size_t n = f.size();
        std::vector<double> pred(n, kNaN);
        if (n > delta) {
            std::size_t m = n - delta;
            std::vector<double> lt(m), lc(m);
            for (std::size_t k = 0; k < m; ++k) {
                if (f.valid[k]) {
                    lt[k] = std::log(f.t_adiab[k]);
                    lc[k] = std::log(f.t_comb[k]);
                } else {
                    lt[k] = kNaN;
                    lc[k] = kNaN;
                }
            }
            kernels::powerlaw_eval(m, lt.data(), lc.data(), params.a, params.b, params.c,
                                   pred.data() + delta);
        }
        out.push_back(std::move(pred));
    }
    return out;
}

Metrics compute_metrics_flat(const std::vector<double>& pred, const std::vector<double>& obs) {
    if (pred.size() != obs.size()) throw PipelineError("compute_metrics: length mismatch");
    std::vector<double> p, o;
    p.reserve(pred.size());
    o.reserve(obs.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (std::isfinite(pred[i]) && std::isfinite(obs[i])) {
            p.push_back(pred[i]);
            o.push_back(obs[i]);
        }
    }
    const std::size_t n = p.size();
    if (n == 0) throw PipelineError("compute_metrics: no overlapping defined points");

    Metrics m;
    m.n = n;
    double ss_res = kernels::sum_sq_diff(n, p.data(), o.data());
    m.rmse = std::sqrt(ss_res / static_cast<double>(n));
    m.mae = kernels::sum_abs_diff(n, p.data(), o.data()) / static_cast<double>(n);
    double mean_obs = kernels::sum(n, o.data()) / static_cast<double>(n);
    double ss_tot = kernels::sum_sq_dev(n, o.data(), mean_obs);
    if (ss_tot == 0.0) {
        m.r2 = ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
    } else {
        m.r2 = 1.0 - ss_res / ss_tot;
    }
    return m;
}

Metrics compute_metrics(const SeriesPerRun& pred, const SeriesPerRun& obs) {
    if (pred.size() != obs.size()) throw PipelineError("compute_metrics: run count mismatch");
    std::vector<double> p, o;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        if (pred[r].size() != obs[r].size()) {
            throw PipelineError("compute_metrics: run length mismatch at run index " +
                                std::to_string(r));
        }
        for (std::size_t i = 0; i < pred[r].size(); ++i) {
            p.push_back(pred[r][i]);
            o.push_back(obs[r][i]);
        }
    }
    return compute_metrics_flat(p, o);
}

DeltaSelection select_delta(const physics::FeatureSeries& features, const SeriesPerRun& observed,
                            const std::vector<int>& candidates, const LmOptions& opts) {
    if (candidates.empty()) throw ConfigError("select_delta: empty candidate list");

    DeltaSelection sel;
    bool any = false;
    double best_rmse = 0.0;
    for (int d : candidates) {
        DeltaCandidate cand;
        cand.delta = d;
        try {
            if (d < 0) throw ConfigError("negative lag candidate");
            SampleSet s = build_samples(features, observed, d);
            PowerLawParams init = log_ols_init(s, opts);
            FitReport rep = fit_lm(s, init, opts);
            cand.train_rmse = std::sqrt(rep.sse_final / static_cast<double>(rep.n_samples));
        } catch (const std::exception& e) {
            cand.failed = true;
            cand.error = e.what();
            sel.candidates.push_back(cand);
            continue;
        }
        if (!any || cand.train_rmse < best_rmse ||
            (cand.train_rmse == best_rmse && d < sel.delta)) {
            best_rmse = cand.train_rmse;
            sel.delta = d;
            any = true;
        }
        sel.candidates.push_back(cand);
    }
    if (!any) throw PipelineError("select_delta: every candidate lag failed to fit");
    return sel;
}

}  // namespace noxpred::regression
