#include "noxpred/divergence.hpp"

#include <cmath>
#include <limits>

#include "noxpred/common.hpp"
#include "noxpred/kernels.hpp"

namespace noxpred::divergence {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void DivergenceConfig::check() const {
    if (!(window_len_s > 0.0) || !(summation_threshold > 0.0)) {
        throw ConfigError("divergence config requires window_len_s > 0 and threshold > 0");
    }
}

std::size_t window_samples(const DivergenceConfig& config, double sample_period) {
    config.check();
    if (!(sample_period > 0.0)) throw ConfigError("sample period must be > 0");
    auto L = static_cast<std::size_t>(std::llround(config.window_len_s / sample_period));
    return L == 0 ? 1 : L;
}

regression::SeriesPerRun per_step_errors(const regression::SeriesPerRun& pred,
                                         const regression::SeriesPerRun& obs) {
    if (pred.size() != obs.size()) throw PipelineError("per_step_errors: run count mismatch");
    regression::SeriesPerRun out;
    out.reserve(pred.size());
    for (std::size_t r = 0; r < pred.size(); ++r) {
        if (pred[r].size() != obs[r].size()) {
            throw PipelineError("per_step_errors: run length mismatch");
        }
        std::vector<double> e(pred[r].size(), kNaN);
        // NaN in either input propagates, marking the step undefined.
        kernels::abs_diff(e.size(), obs[r].data(), pred[r].data(), e.data());
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<DivergentWindow> find_divergent_windows(const regression::SeriesPerRun& errors,
                                                    const std::vector<std::string>& run_ids,
                                                    const DivergenceConfig& config,
                                                    double sample_period) {
    if (run_ids.size() != errors.size()) {
        throw PipelineError("find_divergent_windows: run id list mismatch");
    }
    const std::size_t L = window_samples(config, sample_period);
    std::vector<DivergentWindow> out;

    for (std::size_t r = 0; r < errors.size(); ++r) {
        const auto& e = errors[r];
        if (e.size() < L) continue;  // too short, contributes no windows
        std::vector<double> sums(e.size() - L + 1);
        kernels::window_sums(e.size(), e.data(), L, sums.data());
        for (std::size_t s = 0; s < sums.size(); ++s) {
            // NaN sums (undefined step inside the window) fail the comparison.
            if (sums[s] > config.summation_threshold) {
                out.push_back({run_ids[r], r, s, s + L - 1, sums[s]});
            }
        }
    }
    return out;  // already sorted by (run, start)
}

std::vector<Span> merged_spans(const std::vector<DivergentWindow>& windows) {
    std::vector<Span> spans;
    for (const auto& w : windows) {
        if (!spans.empty() && spans.back().run_id == w.run_id &&
            w.start_index <= spans.back().end_index + 1) {
            if (w.end_index > spans.back().end_index) spans.back().end_index = w.end_index;
        } else {
            spans.push_back({w.run_id, w.start_index, w.end_index});
        }
    }
    return spans;
}

}  // namespace noxpred::divergence
