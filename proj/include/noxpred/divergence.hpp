#pragma once

#include <string>
#include <vector>

#include "noxpred/regression.hpp"

namespace noxpred::divergence {

struct DivergenceConfig {
    double window_len_s = 3.0;          // L, seconds
    double summation_threshold = 30.0;  // ppm

    void check() const;
};

// Window of L consecutive samples whose summed absolute baseline error
// exceeds the threshold. Indices are timestep indices within the run;
// end_index is inclusive (end - start + 1 == L).
struct DivergentWindow {
    std::string run_id;
    std::size_t run_index = 0;
    std::size_t start_index = 0;
    std::size_t end_index = 0;
    double error_sum = 0.0;
};

// Window length in samples: round(window_len_s / sample_period), >= 1.
std::size_t window_samples(const DivergenceConfig& config, double sample_period);

// e(k) = |obs(k) - pred(k)| where both defined, NaN otherwise.
regression::SeriesPerRun per_step_errors(const regression::SeriesPerRun& pred,
                                         const regression::SeriesPerRun& obs);

// Stride-1 sliding windows within each run; a window is emitted iff all
// L errors are defined and their sum strictly exceeds the threshold.
// run_ids are taken from the aligned feature series run ids.
std::vector<DivergentWindow> find_divergent_windows(const regression::SeriesPerRun& errors,
                                                    const std::vector<std::string>& run_ids,
                                                    const DivergenceConfig& config,
                                                    double sample_period);

// Overlapping windows merged into disjoint spans, for reporting only.
struct Span {
    std::string run_id;
    std::size_t start_index = 0;
    std::size_t end_index = 0;
};
std::vector<Span> merged_spans(const std::vector<DivergentWindow>& windows);

}  // namespace noxpred::divergence
