#pragma once

#include <optional>
#include <set>

#include "noxpred/mining.hpp"
#include "noxpred/regression.hpp"

namespace noxpred::pstva {

// Partitioned power-law model: one parameter set per mined pattern plus
// the default partition 0 (non-divergent and unmatched timesteps).
// Pattern order is priority order; a timestep joins the lowest-index
// pattern whose items all match the level window ending at it.
struct PartitionedModel {
    std::vector<mining::CoOccurrencePattern> patterns;   // priority order
    std::vector<regression::PowerLawParams> partition_params;  // size patterns.size() + 1
    mining::Discretizer discretizer;
    std::size_t window_len = 3;  // L, samples
    int delta = 1;
    std::set<std::size_t> fallbacks;  // partitions that inherited partition-0 params

    void check() const;
};

struct FitConfig {
    regression::LmOptions lm;
    int delta = 1;
    std::size_t window_len = 3;
    std::size_t min_partition_samples = 50;
};

struct PartitionFitInfo {
    std::vector<std::size_t> sample_counts;  // per partition
    std::vector<regression::FitReport> reports;  // per fitted partition (empty for fallbacks)
};

// Partition index per timestep for every run; causal trailing window
// [k-L+1, k]. Timesteps with k < L-1 in their run get partition 0.
std::vector<std::vector<std::size_t>> assign_partitions(
    const mining::SymbolTable& symbols,
    const std::vector<mining::CoOccurrencePattern>& patterns, std::size_t window_len);

// Per-partition Levenberg-Marquardt fits. Each partition is seeded with
// both its own log-OLS init and `base_params` (the global baseline fit),
// keeping the lower-SSE result, so the partitioned model never
// underperforms the baseline on training data unless a fallback occurs.
// Partitions with fewer than min_partition_samples inherit partition-0
// params. Throws PipelineError when partition 0 itself cannot be fitted.
PartitionedModel fit(const physics::FeatureSeries& features,
                     const regression::SeriesPerRun& observed,
                     const mining::SymbolTable& symbols,
                     const std::vector<mining::CoOccurrencePattern>& patterns,
                     const mining::Discretizer& discretizer, const FitConfig& config,
                     const std::optional<regression::PowerLawParams>& base_params,
                     PartitionFitInfo* info = nullptr);

// pred(k + delta) = params[partition(k)](t_adiab(k), t_comb(k)).
// `symbols` must come from the model's own (training) discretizer.
regression::SeriesPerRun predict(const PartitionedModel& model,
                                 const physics::FeatureSeries& features,
                                 const mining::SymbolTable& symbols);

}  // namespace noxpred::pstva
