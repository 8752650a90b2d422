#pragma once

#include <cstdint>
#include <vector>

#include "noxpred/physics.hpp"

namespace noxpred::regression {

// Parameters of the power-law NOx model
//   nox(k + delta) = a * t_adiab(k)^b * t_comb(k)^c
struct PowerLawParams {
    double a = 1.0;
    double b = 0.0;
    double c = 0.0;
    int delta = 1;  // lag in samples

    void check() const;  // throws ConfigError unless a > 0, delta >= 0, all finite
};

struct LmOptions {
    int max_iterations = 200;
    double lambda_init = 1e-3;
    double lambda_up = 10.0;    // applied on rejected steps
    double lambda_down = 0.1;   // applied on accepted steps
    double rel_tol = 1e-10;     // on relative SSE decrease
    std::size_t min_samples = 10;

    void check() const;
};

struct FitReport {
    PowerLawParams params;
    int iterations = 0;
    bool converged = false;
    double sse_initial = 0.0;
    double sse_final = 0.0;
    std::size_t n_samples = 0;
    std::vector<double> accepted_sse_trace;  // SSE after each accepted step
};

struct Metrics {
    double r2 = 0.0;  // -inf sentinel when ss_tot == 0 and ss_res > 0
    double rmse = 0.0;
    double mae = 0.0;
    std::size_t n = 0;
};

// Lagged regression samples in dense arrays: (t_adiab(k), t_comb(k)) ->
// y(k + delta), formed only within one run, restricted to valid feature
// timesteps. Logs are precomputed once for the fit kernels.
struct SampleSet {
    std::vector<double> ln_t_adiab;
    std::vector<double> ln_t_comb;
    std::vector<double> y;
    std::vector<std::uint32_t> run_index;  // provenance: run ordinal
    std::vector<std::uint32_t> source_k;   // provenance: feature timestep k
    int delta = 0;

    std::size_t size() const { return y.size(); }
};

// Observed series per run, aligned with the feature series.
using SeriesPerRun = std::vector<std::vector<double>>;

// Throws PipelineError (with exclusion counts) when no sample survives.
SampleSet build_samples(const physics::FeatureSeries& features, const SeriesPerRun& observed,
                        int delta);

// OLS on ln y = ln a + b ln T + c ln t over the y > 0 subset. Falls back
// to b = 0 and/or c = 0 when the corresponding regressor is constant
// (a = geometric mean of y when both are). Throws PipelineError when
// fewer than min_samples positive targets exist.
PowerLawParams log_ols_init(const SampleSet& samples, const LmOptions& opts);

// Levenberg-Marquardt on the linear-ppm objective sum (y - a T^b t^c)^2
// with analytic Jacobian. Accepted steps never increase the SSE; `a` is
// kept positive by step halving.
FitReport fit_lm(const SampleSet& samples, const PowerLawParams& init, const LmOptions& opts);

// Model evaluation aligned at k + delta; NaN where features are invalid
// or the target index falls outside the run.
SeriesPerRun predict(const PowerLawParams& params, const physics::FeatureSeries& features);

// Metrics over the indices where both series are defined (non-NaN).
Metrics compute_metrics(const SeriesPerRun& pred, const SeriesPerRun& obs);
Metrics compute_metrics_flat(const std::vector<double>& pred, const std::vector<double>& obs);

struct DeltaCandidate {
    int delta = 0;
    double train_rmse = 0.0;
    bool failed = false;
    std::string error;
};

struct DeltaSelection {
    int delta = 0;
    std::vector<DeltaCandidate> candidates;
};

// Fits the baseline per candidate lag and picks the minimum training
// RMSE (ties -> smaller lag). Individual candidate failures are recorded;
// throws PipelineError when every candidate fails.
DeltaSelection select_delta(const physics::FeatureSeries& features, const SeriesPerRun& observed,
                            const std::vector<int>& candidates, const LmOptions& opts);

}  // namespace noxpred::regression
