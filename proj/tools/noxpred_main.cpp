// noxpred command-line driver: synthetic data generation, ingestion,
// model fitting, mining, evaluation and sensitivity sweeps.
//
// Exit codes: 0 success, 2 config error, 3 pipeline error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "noxpred/common.hpp"
#include "noxpred/harness.hpp"
#include "noxpred/kernels.hpp"
#include "noxpred/serialization.hpp"

namespace fs = std::filesystem;
using noxpred::ConfigError;
using noxpred::PipelineError;
using nlohmann::json;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    std::string log_level = "warn";
};

noxpred::harness::ExperimentConfig load_config(const GlobalOpts& g) {
    if (g.config_path.empty()) throw ConfigError("--config is required for this subcommand");
    auto cfg = noxpred::harness::load_config_file(g.config_path);
    if (g.seed.has_value()) {
        cfg.split_seed = *g.seed;
        if (cfg.data.synth.has_value()) cfg.data.synth->seed = *g.seed;
    }
    return cfg;
}

fs::path ensure_out_dir(const GlobalOpts& g) {
    fs::path dir(g.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw PipelineError("cannot create output directory: " + dir.string());
    return dir;
}

void write_json_file(const json& j, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

void write_text_file(const std::string& text, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write " + path.string());
    out << text;
}

void print_metrics(const noxpred::harness::ExperimentReport& rep) {
    auto line = [&](const std::string& method) {
        const auto& mm = rep.methods.at(method);
        std::printf("%-7s train r2=%8.4f rmse=%9.3f mae=%9.3f | test r2=%8.4f rmse=%9.3f mae=%9.3f\n",
                    method.c_str(), mm.train.r2, mm.train.rmse, mm.train.mae, mm.test.r2,
                    mm.test.rmse, mm.test.mae);
    };
    line("lop");
    line("p_base");
    line("p_stva");
}

void emit_evaluation_outputs(const noxpred::harness::ExperimentResult& res, const fs::path& dir) {
    using noxpred::harness::emit_scatter;
    write_text_file(noxpred::harness::report_to_string(res.report), dir / "report.json");
    write_json_file(noxpred::harness::timings_json(res.timings), dir / "timings.json");
    write_json_file(json(res.report.patterns), dir / "patterns.json");
    write_json_file(json(res.model), dir / "model.json");
    noxpred::harness::write_metrics_csv(res.report, (dir / "metrics.csv").string());
    noxpred::harness::write_windows_csv(res.windows, res.train, (dir / "windows.csv").string());

    auto nox_train = noxpred::obd::nox_columns(res.train);
    auto nox_test = noxpred::obd::nox_columns(res.test);
    emit_scatter(res.lop_train, nox_train, res.train, (dir / "scatter_lop_train.csv").string(),
                 (dir / "scatter_lop_train.json").string());
    emit_scatter(res.lop_test, nox_test, res.test, (dir / "scatter_lop_test.csv").string(),
                 (dir / "scatter_lop_test.json").string());
    emit_scatter(res.base_train, nox_train, res.train,
                 (dir / "scatter_p_base_train.csv").string(),
                 (dir / "scatter_p_base_train.json").string());
    emit_scatter(res.base_test, nox_test, res.test, (dir / "scatter_p_base_test.csv").string(),
                 (dir / "scatter_p_base_test.json").string());
    emit_scatter(res.pstva_train, nox_train, res.train,
                 (dir / "scatter_p_stva_train.csv").string(),
                 (dir / "scatter_p_stva_train.json").string());
    emit_scatter(res.pstva_test, nox_test, res.test, (dir / "scatter_p_stva_test.csv").string(),
                 (dir / "scatter_p_stva_test.json").string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"physics-guided NOx prediction toolkit"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "experiment config JSON")->envname("NOXPRED_CONFIG");
    app.add_option("--out", g.out_dir, "output directory (default: out)");
    app.add_option("--seed", g.seed, "override split seed (and synth seed)");
    app.add_option("--log-level", g.log_level, "error|warn|info|debug");

    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic OBD dataset");
    auto* cmd_ingest = app.add_subcommand("ingest", "parse, validate and resample a CSV export");
    auto* cmd_fit_base = app.add_subcommand("fit-base", "fit the baseline power-law model");
    auto* cmd_mine = app.add_subcommand("mine", "detect divergent windows and mine patterns");
    auto* cmd_fit_pstva = app.add_subcommand("fit-pstva", "fit the partitioned model");
    auto* cmd_evaluate = app.add_subcommand("evaluate", "run the full train/test comparison");
    auto* cmd_sweep = app.add_subcommand("sweep", "sensitivity sweep over one parameter");
    auto* cmd_scatter = app.add_subcommand("scatter", "emit observed-vs-predicted scatter data");

    std::string axis = "n_patterns";
    std::vector<double> sweep_values;
    bool no_reuse = false;
    cmd_sweep->add_option("--axis", axis, "n_patterns|summation_threshold|window_len");
    cmd_sweep->add_option("--values", sweep_values, "sweep values")->delimiter(',');
    cmd_sweep->add_flag("--no-reuse", no_reuse, "recompute shared stages per point");

    std::string scatter_method = "p_stva";
    std::string scatter_split = "test";
    cmd_scatter->add_option("--method", scatter_method, "lop|p_base|p_stva");
    cmd_scatter->add_option("--split", scatter_split, "train|test");

    CLI11_PARSE(app, argc, argv);

    if (!noxpred::set_log_level(g.log_level)) {
        std::cerr << "unknown log level '" << g.log_level << "'\n";
        return 2;
    }
    noxpred::log_debug(std::string("kernel backend: ") + noxpred::kernels::backend_name());

    try {
        fs::path dir = ensure_out_dir(g);

        if (cmd_synth->parsed()) {
            auto cfg = load_config(g);
            if (!cfg.data.synth.has_value()) {
                throw ConfigError("synth subcommand needs a data.synth section");
            }
            auto [ds, truth] = noxpred::synth::generate(*cfg.data.synth);
            noxpred::obd::write_csv_file(ds, (dir / "synth.csv").string());
            noxpred::synth::write_labels_csv(ds, truth, *cfg.data.synth,
                                             (dir / "labels.csv").string());
            std::printf("wrote %s (%zu runs, %zu records)\n", (dir / "synth.csv").c_str(),
                        ds.runs.size(), ds.total_records());
        } else if (cmd_ingest->parsed()) {
            auto cfg = load_config(g);
            if (cfg.data.csv_path.empty()) {
                throw ConfigError("ingest subcommand needs a data.csv path");
            }
            noxpred::obd::IngestReport rep;
            auto raw = noxpred::obd::parse_csv_file(cfg.data.csv_path, noxpred::obd::CsvSchema{},
                                                    &rep);
            auto ds = noxpred::obd::resample_uniform(raw, cfg.sample_period);
            noxpred::obd::validate(ds);
            write_json_file(json(rep), dir / "ingest_report.json");
            noxpred::obd::write_csv_file(ds, (dir / "resampled.csv").string());
            auto feats = noxpred::physics::compute_features(ds, cfg.constants);
            noxpred::harness::write_features_csv(feats, ds, (dir / "features.csv").string());
            std::printf("ingested %zu rows (%zu dropped), %zu runs\n", rep.rows_read,
                        rep.rows_dropped, ds.runs.size());
        } else if (cmd_fit_base->parsed()) {
            auto cfg = load_config(g);
            auto res = noxpred::harness::run_experiment(cfg);
            write_json_file(json(res.report.pbase_fit), dir / "fit_base.json");
            noxpred::harness::write_predictions_csv(res.base_test, res.test,
                                                    (dir / "predictions_p_base_test.csv").string());
            print_metrics(res.report);
        } else if (cmd_mine->parsed()) {
            auto cfg = load_config(g);
            auto res = noxpred::harness::run_experiment(cfg);
            write_json_file(json(res.report.patterns), dir / "patterns.json");
            noxpred::harness::write_windows_csv(res.windows, res.train,
                                                (dir / "windows.csv").string());
            std::printf("divergent windows: %zu, patterns kept: %zu\n", res.windows.size(),
                        res.report.patterns.size());
        } else if (cmd_fit_pstva->parsed()) {
            auto cfg = load_config(g);
            auto res = noxpred::harness::run_experiment(cfg);
            write_json_file(json(res.model), dir / "model.json");
            print_metrics(res.report);
        } else if (cmd_evaluate->parsed()) {
            auto cfg = load_config(g);
            auto res = noxpred::harness::run_experiment(cfg);
            emit_evaluation_outputs(res, dir);
            print_metrics(res.report);
        } else if (cmd_sweep->parsed()) {
            auto cfg = load_config(g);
            auto ax = noxpred::harness::parse_axis(axis);
            if (sweep_values.empty()) throw ConfigError("sweep needs --values");
            auto sweep = noxpred::harness::sensitivity_sweep(cfg, ax, sweep_values, !no_reuse);
            fs::path path = dir / ("sweep_" + axis + ".csv");
            noxpred::harness::write_sweep_csv(sweep, path.string());
            std::printf("wrote %s (%zu rows, %zu failed points)\n", path.c_str(),
                        sweep.rows.size(), sweep.failures.size());
        } else if (cmd_scatter->parsed()) {
            auto cfg = load_config(g);
            auto res = noxpred::harness::run_experiment(cfg);
            const bool train = scatter_split == "train";
            if (!train && scatter_split != "test") {
                throw ConfigError("scatter --split must be train or test");
            }
            const noxpred::regression::SeriesPerRun* pred = nullptr;
            if (scatter_method == "lop") pred = train ? &res.lop_train : &res.lop_test;
            else if (scatter_method == "p_base") pred = train ? &res.base_train : &res.base_test;
            else if (scatter_method == "p_stva") pred = train ? &res.pstva_train : &res.pstva_test;
            else throw ConfigError("scatter --method must be lop, p_base or p_stva");
            const auto& ds = train ? res.train : res.test;
            auto obs = noxpred::obd::nox_columns(ds);
            std::string stem = "scatter_" + scatter_method + "_" + scatter_split;
            noxpred::harness::emit_scatter(*pred, obs, ds, (dir / (stem + ".csv")).string(),
                                           (dir / (stem + ".json")).string());
            std::printf("wrote %s\n", (dir / (stem + ".csv")).c_str());
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
