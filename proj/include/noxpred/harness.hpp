#pragma once

#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "noxpred/divergence.hpp"
#include "noxpred/mining.hpp"
#include "noxpred/obd.hpp"
#include "noxpred/physics.hpp"
#include "noxpred/pstva.hpp"
#include "noxpred/regression.hpp"
#include "noxpred/synth.hpp"

namespace noxpred::harness {

// Data source: exactly one of a CSV path or an inline synthetic config.
struct DataSourceConfig {
    std::string csv_path;
    std::optional<synth::SynthConfig> synth;
};

struct ExperimentConfig {
    DataSourceConfig data;
    std::uint64_t split_seed = 42;
    double sample_period = 1.0;  // CSV resampling grid, seconds
    physics::PhysicsConstants constants;
    physics::LopParams lop_shape;
    regression::LmOptions lm;
    divergence::DivergenceConfig divergence;
    mining::MinerConfig miner;
    std::size_t n_patterns = 4;
    std::optional<int> delta;          // fixed lag in samples
    std::vector<int> delta_candidates; // searched on training data when no fixed lag
    std::size_t min_partition_samples = 50;

    void check() const;
};

struct MethodMetrics {
    regression::Metrics train;
    regression::Metrics test;
};

// Everything that lands in report.json. Stage wall-clock lives in
// ExperimentResult::timings and is written to a separate file so that
// report.json is byte-identical across reruns.
struct ExperimentReport {
    ExperimentConfig config;  // echo
    int delta = 1;
    std::map<std::string, MethodMetrics> methods;  // "lop", "p_base", "p_stva"
    std::vector<mining::CoOccurrencePattern> patterns;
    std::vector<std::size_t> partition_sample_counts;
    std::vector<std::size_t> fallbacks;
    std::size_t divergent_window_count = 0;
    obd::IngestReport ingest;
    obd::SplitSpec split;
    regression::FitReport pbase_fit;
    physics::LopParams lop_params;
    std::optional<regression::DeltaSelection> delta_selection;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct ExperimentResult {
    ExperimentReport report;
    std::vector<StageTiming> timings;
    pstva::PartitionedModel model;
    obd::ObdDataset train;
    obd::ObdDataset test;
    regression::SeriesPerRun lop_train, lop_test;
    regression::SeriesPerRun base_train, base_test;
    regression::SeriesPerRun pstva_train, pstva_test;
    std::vector<divergence::DivergentWindow> windows;
};

// Full pipeline: ingest -> features -> LOP -> P-Base -> divergence on the
// training baseline errors -> mining -> P-STVA -> metrics on train and
// test. Deterministic for a fixed config.
ExperimentResult run_experiment(const ExperimentConfig& config);

enum class SweepAxis { n_patterns, summation_threshold, window_len };
SweepAxis parse_axis(const std::string& name);  // throws ConfigError
const char* axis_name(SweepAxis axis);

struct SweepRow {
    double value = 0.0;
    std::string split;   // "train" | "test"
    std::string method;  // "lop" | "p_base" | "p_stva"
    regression::Metrics metrics;
};

struct SweepPointError {
    double value = 0.0;
    std::string error;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::n_patterns;
    std::vector<SweepRow> rows;
    std::vector<SweepPointError> failures;
};

// One pipeline completion per value, varying only the given axis. With
// reuse_stages the axis-independent stages (ingest, features, LOP,
// P-Base, symbolization) run once; results are identical either way.
// Failing points are recorded and the sweep continues.
SweepResult sensitivity_sweep(const ExperimentConfig& base, SweepAxis axis,
                              const std::vector<double>& values, bool reuse_stages = true);

// Scatter data: CSV (observed_ppm, predicted_ppm, run_id, t_s) for the
// defined overlap plus a JSON summary with the y = x reference and axis
// bounds.
void emit_scatter(const regression::SeriesPerRun& pred, const regression::SeriesPerRun& obs,
                  const obd::ObdDataset& dataset, const std::string& csv_path,
                  const std::string& json_path);

void write_metrics_csv(const ExperimentReport& report, const std::string& path);
void write_windows_csv(const std::vector<divergence::DivergentWindow>& windows,
                       const obd::ObdDataset& dataset, const std::string& path);
void write_sweep_csv(const SweepResult& sweep, const std::string& path);
void write_features_csv(const physics::FeatureSeries& features, const obd::ObdDataset& dataset,
                        const std::string& path);
void write_predictions_csv(const regression::SeriesPerRun& pred, const obd::ObdDataset& dataset,
                           const std::string& path);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
void to_json(nlohmann::json& j, const MethodMetrics& m);
void from_json(const nlohmann::json& j, MethodMetrics& m);
void to_json(nlohmann::json& j, const ExperimentReport& r);
void from_json(const nlohmann::json& j, ExperimentReport& r);

nlohmann::json timings_json(const std::vector<StageTiming>& timings);

ExperimentConfig load_config_file(const std::string& path);
std::string report_to_string(const ExperimentReport& report);  // canonical bytes

}  // namespace noxpred::harness
