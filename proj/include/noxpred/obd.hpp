#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace noxpred::obd {

// Canonical CSV column names. Extra columns keep their own names.
inline constexpr const char* kColRunId = "run_id";
inline constexpr const char* kColRouteId = "route_id";
inline constexpr const char* kColTime = "t_s";
inline constexpr const char* kColIntakeAir = "intake_air_kgph";
inline constexpr const char* kColFuel = "fuel_kgph";
inline constexpr const char* kColRailPressure = "rail_pressure_pa";
inline constexpr const char* kColIntakePressure = "intake_pressure_pa";
inline constexpr const char* kColIntakeTemp = "intake_temp_k";
inline constexpr const char* kColEngineSpeed = "engine_rpm";
inline constexpr const char* kColNox = "nox_ppm";

// One run stored column-wise. Absent extra values are NaN; the six core
// attributes and nox are always finite in a validated run.
struct Run {
    std::string run_id;
    std::string route_id;
    std::vector<double> t;
    std::vector<double> intake_air_flow;   // kg/h
    std::vector<double> fuel_rate;         // kg/h
    std::vector<double> rail_pressure;     // Pa
    std::vector<double> intake_pressure;   // Pa
    std::vector<double> intake_temp;       // K
    std::vector<double> engine_speed;      // rev/min
    std::vector<double> nox;               // ppm
    std::map<std::string, std::vector<double>> extras;

    std::size_t size() const { return t.size(); }
};

struct ObdDataset {
    std::vector<Run> runs;
    double sample_period = 1.0;  // seconds

    std::size_t total_records() const;
    const Run* find_run(const std::string& run_id) const;
};

// Column-name -> attribute mapping used by parse_csv. Defaults to the
// canonical names above; remap when ingesting foreign exports.
struct CsvSchema {
    std::string run_id = kColRunId;
    std::string route_id = kColRouteId;
    std::string time = kColTime;
    std::string intake_air_flow = kColIntakeAir;
    std::string fuel_rate = kColFuel;
    std::string rail_pressure = kColRailPressure;
    std::string intake_pressure = kColIntakePressure;
    std::string intake_temp = kColIntakeTemp;
    std::string engine_speed = kColEngineSpeed;
    std::string nox = kColNox;
    bool keep_extras = true;
};

struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_dropped = 0;
    std::size_t runs = 0;
    std::map<std::string, std::size_t> per_run_counts;
};

struct SplitSpec {
    std::set<std::string> train_run_ids;
    std::set<std::string> test_run_ids;
    std::vector<std::string> warnings;
};

// Parses a CSV export. Rows violating the record invariants (non-finite
// core values, engine_speed < 0, non-positive temperatures/pressures) are
// dropped and counted in the report. Throws ConfigError when a mandatory
// column is missing and PipelineError on an empty file.
ObdDataset parse_csv(std::istream& in, const CsvSchema& schema, IngestReport* report);
ObdDataset parse_csv_file(const std::string& path, const CsvSchema& schema,
                          IngestReport* report);

// Writes the canonical CSV form (core columns, then extras sorted by
// name). Doubles are formatted with shortest-round-trip precision, so
// parse_csv(write_csv(ds)) reproduces every value bit-exactly.
void write_csv(const ObdDataset& dataset, std::ostream& out);
void write_csv_file(const ObdDataset& dataset, const std::string& path);

// Re-grids every run to constant spacing by zero-order hold. Gaps longer
// than 5x the period split a run in two (run_id suffixed "#2", "#3", ...).
// Runs with fewer than two records pass through unchanged.
ObdDataset resample_uniform(const ObdDataset& dataset, double period);

// Route-stratified train/test assignment: runs of each route are shuffled
// (seeded) and dealt alternately, starting on the globally lighter side.
// Single-run routes go to train with a warning.
SplitSpec split_train_test(const ObdDataset& dataset, std::uint64_t seed);

// Materializes the subset of runs named in `ids`, preserving order.
ObdDataset select_runs(const ObdDataset& dataset, const std::set<std::string>& ids);

// Throws PipelineError if any dataset invariant fails (finiteness, sign
// constraints, uniform spacing, unique run ids).
void validate(const ObdDataset& dataset);

// Column lookup by canonical core name or extra name; nullptr when the
// run carries no such attribute.
const std::vector<double>* attribute_column(const Run& run, const std::string& name);

// Observed NOx per run, aligned with dataset.runs.
std::vector<std::vector<double>> nox_columns(const ObdDataset& dataset);
std::vector<std::string> run_ids(const ObdDataset& dataset);

}  // namespace noxpred::obd
