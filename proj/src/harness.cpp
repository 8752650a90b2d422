#include "noxpred/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "noxpred/common.hpp"
#include "noxpred/serialization.hpp"

namespace noxpred::harness {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "";
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}

    template <typename F>
    auto run(const std::string& stage, F&& fn) -> decltype(fn()) {
        auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(fn())>) {
                fn();
                record(stage, start);
            } else {
                auto value = fn();
                record(stage, start);
                return value;
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw PipelineError("stage '" + stage + "': " + e.what());
        }
    }

private:
    void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out_.push_back({stage, sec});
    }

    std::vector<StageTiming>& out_;
};

// Axis-independent pipeline state shared by sweep points.
struct PipelineContext {
    obd::ObdDataset dataset;
    obd::IngestReport ingest;
    obd::SplitSpec split;
    obd::ObdDataset train, test;
    physics::FeatureSeries feat_train, feat_test;
    regression::SeriesPerRun nox_train, nox_test;
    physics::LopParams lop_params;
    regression::SeriesPerRun lop_train, lop_test;
    int delta = 1;
    std::optional<regression::DeltaSelection> delta_selection;
    regression::FitReport base_fit;
    regression::SeriesPerRun base_train, base_test;
    mining::Discretizer discretizer;
    mining::SymbolTable sym_train, sym_test;
    std::vector<StageTiming> timings;
};

obd::ObdDataset load_dataset(const ExperimentConfig& config, obd::IngestReport& ingest) {
    if (config.data.synth.has_value()) {
        auto [ds, truth] = synth::generate(*config.data.synth);
        ingest = obd::IngestReport{};
        ingest.rows_read = ds.total_records();
        ingest.runs = ds.runs.size();
        for (const auto& run : ds.runs) ingest.per_run_counts[run.run_id] = run.size();
        return ds;
    }
    obd::ObdDataset raw = obd::parse_csv_file(config.data.csv_path, obd::CsvSchema{}, &ingest);
    return obd::resample_uniform(raw, config.sample_period);
}

PipelineContext build_context(const ExperimentConfig& config) {
    PipelineContext ctx;
    StageClock clock(ctx.timings);

    ctx.dataset = clock.run("ingest", [&] { return load_dataset(config, ctx.ingest); });
    clock.run("validate", [&] { obd::validate(ctx.dataset); });

    clock.run("split", [&] {
        ctx.split = obd::split_train_test(ctx.dataset, config.split_seed);
        ctx.train = obd::select_runs(ctx.dataset, ctx.split.train_run_ids);
        ctx.test = obd::select_runs(ctx.dataset, ctx.split.test_run_ids);
    });

    clock.run("features", [&] {
        ctx.feat_train = physics::compute_features(ctx.train, config.constants);
        ctx.feat_test = physics::compute_features(ctx.test, config.constants);
        ctx.nox_train = obd::nox_columns(ctx.train);
        ctx.nox_test = obd::nox_columns(ctx.test);
    });

    clock.run("lop", [&] {
        ctx.lop_params = physics::calibrate_lop(ctx.feat_train, ctx.nox_train, config.lop_shape);
        ctx.lop_train = physics::lop_predict(ctx.feat_train, ctx.lop_params);
        ctx.lop_test = physics::lop_predict(ctx.feat_test, ctx.lop_params);
    });

    clock.run("delta", [&] {
        if (config.delta.has_value()) {
            ctx.delta = *config.delta;
        } else if (!config.delta_candidates.empty()) {
            ctx.delta_selection = regression::select_delta(ctx.feat_train, ctx.nox_train,
                                                           config.delta_candidates, config.lm);
            ctx.delta = ctx.delta_selection->delta;
        } else {
            ctx.delta = 1;
        }
    });

    clock.run("fit_base", [&] {
        regression::SampleSet samples =
            regression::build_samples(ctx.feat_train, ctx.nox_train, ctx.delta);
        regression::PowerLawParams init = regression::log_ols_init(samples, config.lm);
        ctx.base_fit = regression::fit_lm(samples, init, config.lm);
        ctx.base_train = regression::predict(ctx.base_fit.params, ctx.feat_train);
        ctx.base_test = regression::predict(ctx.base_fit.params, ctx.feat_test);
    });

    clock.run("symbolize", [&] {
        std::vector<std::string> attrs = config.miner.attributes.empty()
                                             ? mining::default_mining_attributes()
                                             : config.miner.attributes;
        ctx.discretizer = mining::fit_discretizer(ctx.train, attrs);
        ctx.sym_train = mining::symbolize(ctx.train, ctx.discretizer);
        ctx.sym_test = mining::symbolize(ctx.test, ctx.discretizer);
    });

    return ctx;
}

ExperimentResult complete_run(const PipelineContext& ctx, const ExperimentConfig& config) {
    ExperimentResult res;
    res.timings = ctx.timings;
    StageClock clock(res.timings);

    const std::size_t L =
        divergence::window_samples(config.divergence, ctx.dataset.sample_period);

    res.windows = clock.run("divergence", [&] {
        regression::SeriesPerRun errors = divergence::per_step_errors(ctx.base_train, ctx.nox_train);
        return divergence::find_divergent_windows(errors, obd::run_ids(ctx.train),
                                                  config.divergence,
                                                  ctx.dataset.sample_period);
    });

    std::vector<mining::CoOccurrencePattern> top = clock.run("mine", [&] {
        auto patterns = mining::mine_patterns(ctx.sym_train, res.windows, config.miner, L);
        return mining::select_top_n(patterns, config.n_patterns);
    });

    pstva::PartitionFitInfo fit_info;
    res.model = clock.run("fit_pstva", [&] {
        pstva::FitConfig fc;
        fc.lm = config.lm;
        fc.delta = ctx.delta;
        fc.window_len = L;
        fc.min_partition_samples = config.min_partition_samples;
        return pstva::fit(ctx.feat_train, ctx.nox_train, ctx.sym_train, top, ctx.discretizer, fc,
                          ctx.base_fit.params, &fit_info);
    });

    clock.run("evaluate", [&] {
        res.pstva_train = pstva::predict(res.model, ctx.feat_train, ctx.sym_train);
        res.pstva_test = pstva::predict(res.model, ctx.feat_test, ctx.sym_test);

        ExperimentReport& rep = res.report;
        rep.config = config;
        rep.delta = ctx.delta;
        rep.delta_selection = ctx.delta_selection;
        rep.methods["lop"] = {regression::compute_metrics(ctx.lop_train, ctx.nox_train),
                              regression::compute_metrics(ctx.lop_test, ctx.nox_test)};
        rep.methods["p_base"] = {regression::compute_metrics(ctx.base_train, ctx.nox_train),
                                 regression::compute_metrics(ctx.base_test, ctx.nox_test)};
        rep.methods["p_stva"] = {regression::compute_metrics(res.pstva_train, ctx.nox_train),
                                 regression::compute_metrics(res.pstva_test, ctx.nox_test)};
        rep.patterns = res.model.patterns;
        rep.partition_sample_counts = fit_info.sample_counts;
        rep.fallbacks.assign(res.model.fallbacks.begin(), res.model.fallbacks.end());
        rep.divergent_window_count = res.windows.size();
        rep.ingest = ctx.ingest;
        rep.split = ctx.split;
        rep.pbase_fit = ctx.base_fit;
        rep.lop_params = ctx.lop_params;
    });

    res.train = ctx.train;
    res.test = ctx.test;
    res.lop_train = ctx.lop_train;
    res.lop_test = ctx.lop_test;
    res.base_train = ctx.base_train;
    res.base_test = ctx.base_test;
    return res;
}

}  // namespace

void ExperimentConfig::check() const {
    const bool has_csv = !data.csv_path.empty();
    const bool has_synth = data.synth.has_value();
    if (has_csv == has_synth) {
        throw ConfigError("experiment config: exactly one of data.csv or data.synth required");
    }
    if (has_csv && !std::filesystem::exists(data.csv_path)) {
        throw ConfigError("experiment config: CSV file does not exist: " + data.csv_path);
    }
    if (has_synth) data.synth->check();
    if (!(sample_period > 0.0)) throw ConfigError("experiment config: sample_period must be > 0");
    constants.check();
    lop_shape.check();
    lm.check();
    divergence.check();
    miner.check();
    if (delta.has_value() && *delta < 0) throw ConfigError("experiment config: delta must be >= 0");
    for (int d : delta_candidates) {
        if (d < 0) throw ConfigError("experiment config: delta candidates must be >= 0");
    }
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.check();
    PipelineContext ctx = build_context(config);
    return complete_run(ctx, config);
}

SweepAxis parse_axis(const std::string& name) {
    if (name == "n_patterns") return SweepAxis::n_patterns;
    if (name == "summation_threshold") return SweepAxis::summation_threshold;
    if (name == "window_len") return SweepAxis::window_len;
    throw ConfigError("unknown sweep axis '" + name +
                      "' (expected n_patterns, summation_threshold or window_len)");
}

const char* axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::n_patterns: return "n_patterns";
        case SweepAxis::summation_threshold: return "summation_threshold";
        case SweepAxis::window_len: return "window_len";
    }
    return "?";
}

namespace {

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value) {
    ExperimentConfig cfg = base;
    switch (axis) {
        case SweepAxis::n_patterns:
            if (value < 0.0 || value != std::floor(value)) {
                throw ConfigError("n_patterns sweep values must be non-negative integers");
            }
            cfg.n_patterns = static_cast<std::size_t>(value);
            break;
        case SweepAxis::summation_threshold:
            cfg.divergence.summation_threshold = value;
            break;
        case SweepAxis::window_len:
            cfg.divergence.window_len_s = value;
            break;
    }
    cfg.check();
    return cfg;
}

}  // namespace

SweepResult sensitivity_sweep(const ExperimentConfig& base, SweepAxis axis,
                              const std::vector<double>& values, bool reuse_stages) {
    if (values.empty()) throw ConfigError("sensitivity_sweep: empty value list");
    base.check();

    SweepResult out;
    out.axis = axis;

    std::optional<PipelineContext> shared;
    if (reuse_stages) shared.emplace(build_context(base));

    for (double value : values) {
        try {
            ExperimentConfig cfg = apply_axis(base, axis, value);
            ExperimentResult res =
                reuse_stages ? complete_run(*shared, cfg) : run_experiment(cfg);
            for (const auto& [method, mm] : res.report.methods) {
                out.rows.push_back({value, "train", method, mm.train});
                out.rows.push_back({value, "test", method, mm.test});
            }
        } catch (const std::exception& e) {
            log_warn("sweep point " + fmt(value) + " failed: " + e.what());
            out.failures.push_back({value, e.what()});
        }
    }
    return out;
}

void emit_scatter(const regression::SeriesPerRun& pred, const regression::SeriesPerRun& obs,
                  const obd::ObdDataset& dataset, const std::string& csv_path,
                  const std::string& json_path) {
    if (pred.size() != dataset.runs.size() || obs.size() != dataset.runs.size()) {
        throw PipelineError("emit_scatter: series do not cover the dataset runs");
    }
    std::ofstream csv(csv_path);
    if (!csv) throw PipelineError("cannot write scatter CSV: " + csv_path);
    csv << "observed_ppm,predicted_ppm,run_id,t_s\n";

    std::size_t n = 0;
    double lo = 0.0, hi = 0.0, max_resid = 0.0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
        const auto& run = dataset.runs[r];
        for (std::size_t i = 0; i < pred[r].size(); ++i) {
            double p = pred[r][i];
            double o = obs[r][i];
            if (!std::isfinite(p) || !std::isfinite(o)) continue;
            if (n == 0) {
                lo = std::min(o, p);
                hi = std::max(o, p);
            } else {
                lo = std::min({lo, o, p});
                hi = std::max({hi, o, p});
            }
            max_resid = std::max(max_resid, std::fabs(o - p));
            ++n;
            csv << fmt(o) << ',' << fmt(p) << ',' << run.run_id << ',' << fmt(run.t[i]) << "\n";
        }
    }

    json summary = {{"n", n},
                    {"reference", "y=x"},
                    {"axis_min", n == 0 ? json(nullptr) : json(lo)},
                    {"axis_max", n == 0 ? json(nullptr) : json(hi)},
                    {"max_abs_residual", n == 0 ? json(nullptr) : json(max_resid)}};
    std::ofstream js(json_path);
    if (!js) throw PipelineError("cannot write scatter summary: " + json_path);
    js << summary.dump(2) << "\n";
}

void write_metrics_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write metrics CSV: " + path);
    out << "method,split,r2,rmse,mae,n\n";
    for (const auto& [method, mm] : report.methods) {
        auto row = [&](const char* split, const regression::Metrics& m) {
            out << method << ',' << split << ','
                << (std::isfinite(m.r2) ? fmt(m.r2) : std::string()) << ',' << fmt(m.rmse) << ','
                << fmt(m.mae) << ',' << m.n << "\n";
        };
        row("train", mm.train);
        row("test", mm.test);
    }
}

void write_windows_csv(const std::vector<divergence::DivergentWindow>& windows,
                       const obd::ObdDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write windows CSV: " + path);
    out << "run_id,start_t_s,end_t_s,error_sum_ppm\n";
    for (const auto& w : windows) {
        const obd::Run* run = dataset.find_run(w.run_id);
        if (run == nullptr || w.end_index >= run->size()) {
            throw PipelineError("write_windows_csv: window outside dataset");
        }
        out << w.run_id << ',' << fmt(run->t[w.start_index]) << ',' << fmt(run->t[w.end_index])
            << ',' << fmt(w.error_sum) << "\n";
    }
}

void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write sweep CSV: " + path);
    out << "axis,value,split,method,r2,rmse,mae,n\n";
    for (const auto& row : sweep.rows) {
        out << axis_name(sweep.axis) << ',' << fmt(row.value) << ',' << row.split << ','
            << row.method << ','
            << (std::isfinite(row.metrics.r2) ? fmt(row.metrics.r2) : std::string()) << ','
            << fmt(row.metrics.rmse) << ',' << fmt(row.metrics.mae) << ',' << row.metrics.n
            << "\n";
    }
    for (const auto& f : sweep.failures) {
        out << axis_name(sweep.axis) << ',' << fmt(f.value) << ",error,error,,,,0\n";
    }
}

void write_features_csv(const physics::FeatureSeries& features, const obd::ObdDataset& dataset,
                        const std::string& path) {
    if (features.size() != dataset.runs.size()) {
        throw PipelineError("write_features_csv: features do not cover the dataset");
    }
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write features CSV: " + path);
    out << "t_s,run_id,t_adiab_k,t_comb_s,x_o2,valid\n";
    for (std::size_t r = 0; r < features.size(); ++r) {
        const auto& f = features[r];
        const auto& run = dataset.runs[r];
        for (std::size_t i = 0; i < f.size(); ++i) {
            out << fmt(run.t[i]) << ',' << f.run_id << ',' << fmt(f.t_adiab[i]) << ','
                << fmt(f.t_comb[i]) << ',' << fmt(f.x_o2[i]) << ',' << (f.valid[i] ? 1 : 0)
                << "\n";
        }
    }
}

void write_predictions_csv(const regression::SeriesPerRun& pred, const obd::ObdDataset& dataset,
                           const std::string& path) {
    if (pred.size() != dataset.runs.size()) {
        throw PipelineError("write_predictions_csv: series do not cover the dataset");
    }
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write predictions CSV: " + path);
    out << "run_id,t_s,nox_pred_ppm,nox_obs_ppm\n";
    for (std::size_t r = 0; r < pred.size(); ++r) {
        const auto& run = dataset.runs[r];
        for (std::size_t i = 0; i < pred[r].size(); ++i) {
            out << run.run_id << ',' << fmt(run.t[i]) << ',' << fmt(pred[r][i]) << ','
                << fmt(run.nox[i]) << "\n";
        }
    }
}

void to_json(json& j, const ExperimentConfig& c) {
    json data = json::object();
    if (!c.data.csv_path.empty()) data["csv"] = c.data.csv_path;
    if (c.data.synth.has_value()) data["synth"] = *c.data.synth;
    j = json{{"data", data},
             {"split_seed", c.split_seed},
             {"sample_period_s", c.sample_period},
             {"physics", c.constants},
             {"lop", c.lop_shape},
             {"lm", c.lm},
             {"divergence", c.divergence},
             {"miner", c.miner},
             {"n_patterns", c.n_patterns},
             {"min_partition_samples", c.min_partition_samples}};
    if (c.delta.has_value()) j["delta"] = *c.delta;
    if (!c.delta_candidates.empty()) j["delta_candidates"] = c.delta_candidates;
}

void from_json(const json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    if (j.contains("data")) {
        const json& data = j.at("data");
        if (data.contains("csv")) data.at("csv").get_to(c.data.csv_path);
        if (data.contains("synth")) c.data.synth = data.at("synth").get<synth::SynthConfig>();
    }
    if (j.contains("split_seed")) j.at("split_seed").get_to(c.split_seed);
    if (j.contains("sample_period_s")) j.at("sample_period_s").get_to(c.sample_period);
    if (j.contains("physics")) j.at("physics").get_to(c.constants);
    if (j.contains("lop")) j.at("lop").get_to(c.lop_shape);
    if (j.contains("lm")) j.at("lm").get_to(c.lm);
    if (j.contains("divergence")) j.at("divergence").get_to(c.divergence);
    if (j.contains("miner")) j.at("miner").get_to(c.miner);
    if (j.contains("n_patterns")) j.at("n_patterns").get_to(c.n_patterns);
    if (j.contains("min_partition_samples")) {
        j.at("min_partition_samples").get_to(c.min_partition_samples);
    }
    if (j.contains("delta")) c.delta = j.at("delta").get<int>();
    if (j.contains("delta_candidates")) j.at("delta_candidates").get_to(c.delta_candidates);
}

void to_json(json& j, const MethodMetrics& m) {
    j = json{{"train", m.train}, {"test", m.test}};
}

void from_json(const json& j, MethodMetrics& m) {
    j.at("train").get_to(m.train);
    j.at("test").get_to(m.test);
}

void to_json(json& j, const ExperimentReport& r) {
    j = json{{"config", r.config},
             {"delta", r.delta},
             {"methods", r.methods},
             {"patterns", r.patterns},
             {"partition_sample_counts", r.partition_sample_counts},
             {"fallbacks", r.fallbacks},
             {"divergent_windows", r.divergent_window_count},
             {"ingest", r.ingest},
             {"split", r.split},
             {"pbase_fit", r.pbase_fit},
             {"lop_params", r.lop_params}};
    if (r.delta_selection.has_value()) j["delta_selection"] = *r.delta_selection;
}

void from_json(const json& j, ExperimentReport& r) {
    r = ExperimentReport{};
    j.at("config").get_to(r.config);
    j.at("delta").get_to(r.delta);
    j.at("methods").get_to(r.methods);
    j.at("patterns").get_to(r.patterns);
    j.at("partition_sample_counts").get_to(r.partition_sample_counts);
    j.at("fallbacks").get_to(r.fallbacks);
    j.at("divergent_windows").get_to(r.divergent_window_count);
    j.at("ingest").get_to(r.ingest);
    j.at("split").get_to(r.split);
    j.at("pbase_fit").get_to(r.pbase_fit);
    j.at("lop_params").get_to(r.lop_params);
    if (j.contains("delta_selection")) {
        r.delta_selection = j.at("delta_selection").get<regression::DeltaSelection>();
    }
}

json timings_json(const std::vector<StageTiming>& timings) {
    json arr = json::array();
    for (const auto& t : timings) arr.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    return arr;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config JSON parse error in " + path + ": " + e.what());
    }
    ExperimentConfig cfg;
    try {
        cfg = j.get<ExperimentConfig>();
    } catch (const json::exception& e) {
        throw ConfigError("config schema error in " + path + ": " + e.what());
    }
    cfg.check();
    return cfg;
}

std::string report_to_string(const ExperimentReport& report) {
    json j = report;
    return j.dump(2) + "\n";
}

}  // namespace noxpred::harness
