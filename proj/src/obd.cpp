#include "noxpred/obd.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "noxpred/common.hpp"

namespace noxpred::obd {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Empty fields and the usual missing-value spellings parse to NaN.
double parse_value(const std::string& raw) {
    std::string s = trim(raw);
    if (s.empty() || s == "NA" || s == "na" || s == "null") return kNaN;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return kNaN;
    return v;
}

void format_value(std::string& out, double v) {
    if (std::isnan(v)) return;  // absent -> empty field
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

bool record_valid(double air, double fuel, double rail, double intake_p, double intake_t,
                  double rpm, double nox) {
    if (!std::isfinite(air) || !std::isfinite(fuel) || !std::isfinite(rail) ||
        !std::isfinite(intake_p) || !std::isfinite(intake_t) || !std::isfinite(rpm) ||
        !std::isfinite(nox)) {
        return false;
    }
    return rpm >= 0.0 && intake_t > 0.0 && rail > 0.0 && intake_p > 0.0;
}

struct RowIdx {
    std::size_t order;  // arrival order, stable sort tiebreak
    double t;
    std::size_t row;
};

}  // namespace

std::size_t ObdDataset::total_records() const {
    std::size_t n = 0;
    for (const auto& run : runs) n += run.size();
    return n;
}

const Run* ObdDataset::find_run(const std::string& run_id) const {
    for (const auto& run : runs) {
        if (run.run_id == run_id) return &run;
    }
    return nullptr;
}

ObdDataset parse_csv(std::istream& in, const CsvSchema& schema, IngestReport* report) {
    std::string header;
    if (!std::getline(in, header)) {
        throw PipelineError("empty CSV: no header row");
    }
    std::vector<std::string> cols = split_line(header);
    for (auto& c : cols) c = trim(c);

    auto col_index = [&](const std::string& name) -> std::ptrdiff_t {
        auto it = std::find(cols.begin(), cols.end(), name);
        return it == cols.end() ? -1 : it - cols.begin();
    };
    auto require = [&](const std::string& name) -> std::size_t {
        std::ptrdiff_t idx = col_index(name);
        if (idx < 0) throw ConfigError("CSV schema: missing mandatory column '" + name + "'");
        return static_cast<std::size_t>(idx);
    };

    const std::size_t i_run = require(schema.run_id);
    const std::size_t i_route = require(schema.route_id);
    const std::size_t i_t = require(schema.time);
    const std::size_t i_air = require(schema.intake_air_flow);
    const std::size_t i_fuel = require(schema.fuel_rate);
    const std::size_t i_rail = require(schema.rail_pressure);
    const std::size_t i_ip = require(schema.intake_pressure);
    const std::size_t i_it = require(schema.intake_temp);
    const std::size_t i_rpm = require(schema.engine_speed);
    const std::size_t i_nox = require(schema.nox);

    std::vector<std::size_t> extra_idx;
    std::vector<std::string> extra_names;
    if (schema.keep_extras) {
        std::set<std::size_t> mandatory = {i_run, i_route, i_t, i_air, i_fuel,
                                           i_rail, i_ip, i_it, i_rpm, i_nox};
        for (std::size_t i = 0; i < cols.size(); ++i) {
            if (!mandatory.count(i) && !cols[i].empty()) {
                extra_idx.push_back(i);
                extra_names.push_back(cols[i]);
            }
        }
    }

    ObdDataset ds;
    std::unordered_map<std::string, std::size_t> run_pos;
    std::vector<std::vector<RowIdx>> run_rows;  // parallel to ds.runs
    IngestReport rep;

    std::string line;
    std::size_t order = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++rep.rows_read;
        std::vector<std::string> f = split_line(line);
        if (f.size() < cols.size()) f.resize(cols.size());

        double t = parse_value(f[i_t]);
        double air = parse_value(f[i_air]);
        double fuel = parse_value(f[i_fuel]);
        double rail = parse_value(f[i_rail]);
        double ip = parse_value(f[i_ip]);
        double it = parse_value(f[i_it]);
        double rpm = parse_value(f[i_rpm]);
        double nox = parse_value(f[i_nox]);
        std::string run_id = trim(f[i_run]);
        std::string route_id = trim(f[i_route]);

        if (run_id.empty() || !std::isfinite(t) ||
            !record_valid(air, fuel, rail, ip, it, rpm, nox)) {
            ++rep.rows_dropped;
            continue;
        }

        auto [pos_it, inserted] = run_pos.try_emplace(run_id, ds.runs.size());
        if (inserted) {
            Run run;
            run.run_id = run_id;
            run.route_id = route_id;
            for (const auto& name : extra_names) run.extras[name] = {};
            ds.runs.push_back(std::move(run));
            run_rows.emplace_back();
        }
        Run& run = ds.runs[pos_it->second];
        run_rows[pos_it->second].push_back({order++, t, run.size()});
        run.t.push_back(t);
        run.intake_air_flow.push_back(air);
        run.fuel_rate.push_back(fuel);
        run.rail_pressure.push_back(rail);
        run.intake_pressure.push_back(ip);
        run.intake_temp.push_back(it);
        run.engine_speed.push_back(rpm);
        run.nox.push_back(nox);
        for (std::size_t e = 0; e < extra_idx.size(); ++e) {
            run.extras[extra_names[e]].push_back(parse_value(f[extra_idx[e]]));
        }
    }

    if (ds.runs.empty()) {
        throw PipelineError("empty dataset: no valid rows parsed");
    }

    // Sort rows of each run by timestamp (stable on arrival order).
    for (std::size_t r = 0; r < ds.runs.size(); ++r) {
        auto& rows = run_rows[r];
        bool sorted = std::is_sorted(rows.begin(), rows.end(),
                                     [](const RowIdx& a, const RowIdx& b) { return a.t < b.t; });
        if (sorted) continue;
        std::stable_sort(rows.begin(), rows.end(), [](const RowIdx& a, const RowIdx& b) {
            if (a.t != b.t) return a.t < b.t;
            return a.order < b.order;
        });
        Run& run = ds.runs[r];
        Run reordered = run;
        for (auto& [name, col] : reordered.extras) col.clear();
        reordered.t.clear();
        reordered.intake_air_flow.clear();
        reordered.fuel_rate.clear();
        reordered.rail_pressure.clear();
        reordered.intake_pressure.clear();
        reordered.intake_temp.clear();
        reordered.engine_speed.clear();
        reordered.nox.clear();
        for (const RowIdx& row : rows) {
            std::size_t i = row.row;
            reordered.t.push_back(run.t[i]);
            reordered.intake_air_flow.push_back(run.intake_air_flow[i]);
            reordered.fuel_rate.push_back(run.fuel_rate[i]);
            reordered.rail_pressure.push_back(run.rail_pressure[i]);
            reordered.intake_pressure.push_back(run.intake_pressure[i]);
            reordered.intake_temp.push_back(run.intake_temp[i]);
            reordered.engine_speed.push_back(run.engine_speed[i]);
            reordered.nox.push_back(run.nox[i]);
            for (auto& [name, col] : reordered.extras) col.push_back(run.extras[name][i]);
        }
        run = std::move(reordered);
    }

    rep.runs = ds.runs.size();
    for (const auto& run : ds.runs) rep.per_run_counts[run.run_id] = run.size();
    if (report != nullptr) *report = rep;
    return ds;
}

ObdDataset parse_csv_file(const std::string& path, const CsvSchema& schema,
                          IngestReport* report) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open CSV file: " + path);
    return parse_csv(in, schema, report);
}

void write_csv(const ObdDataset& dataset, std::ostream& out) {
    // Union of extra column names across runs, sorted.
    std::set<std::string> extra_names;
    for (const auto& run : dataset.runs) {
        for (const auto& [name, col] : run.extras) extra_names.insert(name);
    }

    std::string line;
    line = std::string(kColRunId) + "," + kColRouteId + "," + kColTime + "," + kColIntakeAir +
           "," + kColFuel + "," + kColRailPressure + "," + kColIntakePressure + "," +
           kColIntakeTemp + "," + kColEngineSpeed + "," + kColNox;
    for (const auto& name : extra_names) {
        line += ",";
        line += name;
    }
    out << line << "\n";

    for (const auto& run : dataset.runs) {
        for (std::size_t i = 0; i < run.size(); ++i) {
            line.clear();
            line += run.run_id;
            line += ',';
            line += run.route_id;
            line += ',';
            format_value(line, run.t[i]);
            line += ',';
            format_value(line, run.intake_air_flow[i]);
            line += ',';
            format_value(line, run.fuel_rate[i]);
            line += ',';
            format_value(line, run.rail_pressure[i]);
            line += ',';
            format_value(line, run.intake_pressure[i]);
            line += ',';
            format_value(line, run.intake_temp[i]);
            line += ',';
            format_value(line, run.engine_speed[i]);
            line += ',';
            format_value(line, run.nox[i]);
            for (const auto& name : extra_names) {
                line += ',';
                auto it = run.extras.find(name);
                if (it != run.extras.end() && i < it->second.size()) {
                    format_value(line, it->second[i]);
                }
            }
            out << line << "\n";
        }
    }
}

void write_csv_file(const ObdDataset& dataset, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write CSV file: " + path);
    write_csv(dataset, out);
    if (!out) throw PipelineError("I/O error writing CSV file: " + path);
}

namespace {

// Copies rows [begin, end) of `src` onto a uniform grid anchored at
// src.t[begin] using previous-value interpolation.
Run resample_segment(const Run& src, std::size_t begin, std::size_t end, double period,
                     const std::string& run_id) {
    Run out;
    out.run_id = run_id;
    out.route_id = src.route_id;
    for (const auto& [name, col] : src.extras) out.extras[name] = {};

    const double t0 = src.t[begin];
    const double t_last = src.t[end - 1];
    const double slack = period * 1e-9;
    std::size_t n_points =
        static_cast<std::size_t>(std::floor((t_last - t0) / period + 1e-9)) + 1;

    std::size_t src_i = begin;
    for (std::size_t g = 0; g < n_points; ++g) {
        double tg = t0 + static_cast<double>(g) * period;
        while (src_i + 1 < end && src.t[src_i + 1] <= tg + slack) ++src_i;
        out.t.push_back(tg);
        out.intake_air_flow.push_back(src.intake_air_flow[src_i]);
        out.fuel_rate.push_back(src.fuel_rate[src_i]);
        out.rail_pressure.push_back(src.rail_pressure[src_i]);
        out.intake_pressure.push_back(src.intake_pressure[src_i]);
        out.intake_temp.push_back(src.intake_temp[src_i]);
        out.engine_speed.push_back(src.engine_speed[src_i]);
        out.nox.push_back(src.nox[src_i]);
        for (auto& [name, col] : out.extras) col.push_back(src.extras.at(name)[src_i]);
    }
    return out;
}

}  // namespace

ObdDataset resample_uniform(const ObdDataset& dataset, double period) {
    if (!(period > 0.0)) throw ConfigError("resample period must be > 0");

    ObdDataset out;
    out.sample_period = period;
    const double gap_limit = 5.0 * period;

    for (const auto& run : dataset.runs) {
        if (run.size() < 2) {
            out.runs.push_back(run);
            continue;
        }
        // Segment boundaries at gaps longer than the limit.
        std::vector<std::size_t> starts = {0};
        for (std::size_t i = 0; i + 1 < run.size(); ++i) {
            if (run.t[i + 1] - run.t[i] > gap_limit) starts.push_back(i + 1);
        }
        starts.push_back(run.size());
        for (std::size_t s = 0; s + 1 < starts.size(); ++s) {
            std::string id = run.run_id;
            if (s > 0) id += "#" + std::to_string(s + 1);
            out.runs.push_back(resample_segment(run, starts[s], starts[s + 1], period, id));
        }
    }
    return out;
}

SplitSpec split_train_test(const ObdDataset& dataset, std::uint64_t seed) {
    if (dataset.runs.size() < 2) {
        throw PipelineError("split_train_test needs at least 2 runs");
    }

    std::map<std::string, std::vector<std::string>> by_route;
    for (const auto& run : dataset.runs) by_route[run.route_id].push_back(run.run_id);

    SplitSpec spec;
    std::mt19937_64 rng(seed);
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    for (auto& [route, run_ids] : by_route) {
        std::shuffle(run_ids.begin(), run_ids.end(), rng);
        if (run_ids.size() == 1) {
            spec.train_run_ids.insert(run_ids[0]);
            ++n_train;
            spec.warnings.push_back("route '" + route +
                                    "' has a single run; assigned to train");
            log_warn(spec.warnings.back());
            continue;
        }
        // Start on whichever side is lighter so overall counts stay within 1.
        bool to_train = n_train <= n_test;
        for (const auto& id : run_ids) {
            if (to_train) {
                spec.train_run_ids.insert(id);
                ++n_train;
            } else {
                spec.test_run_ids.insert(id);
                ++n_test;
            }
            to_train = !to_train;
        }
    }
    return spec;
}

ObdDataset select_runs(const ObdDataset& dataset, const std::set<std::string>& ids) {
    ObdDataset out;
    out.sample_period = dataset.sample_period;
    for (const auto& run : dataset.runs) {
        if (ids.count(run.run_id)) out.runs.push_back(run);
    }
    return out;
}

const std::vector<double>* attribute_column(const Run& run, const std::string& name) {
    if (name == kColIntakeAir) return &run.intake_air_flow;
    if (name == kColFuel) return &run.fuel_rate;
    if (name == kColRailPressure) return &run.rail_pressure;
    if (name == kColIntakePressure) return &run.intake_pressure;
    if (name == kColIntakeTemp) return &run.intake_temp;
    if (name == kColEngineSpeed) return &run.engine_speed;
    if (name == kColNox) return &run.nox;
    if (name == kColTime) return &run.t;
    auto it = run.extras.find(name);
    return it == run.extras.end() ? nullptr : &it->second;
}

std::vector<std::vector<double>> nox_columns(const ObdDataset& dataset) {
    std::vector<std::vector<double>> out;
    out.reserve(dataset.runs.size());
    for (const auto& run : dataset.runs) out.push_back(run.nox);
    return out;
}

std::vector<std::string> run_ids(const ObdDataset& dataset) {
    std::vector<std::string> out;
    out.reserve(dataset.runs.size());
    for (const auto& run : dataset.runs) out.push_back(run.run_id);
    return out;
}

void validate(const ObdDataset& dataset) {
    std::set<std::string> seen;
    for (const auto& run : dataset.runs) {
        if (!seen.insert(run.run_id).second) {
            throw PipelineError("duplicate run_id '" + run.run_id + "'");
        }
        const std::size_t n = run.size();
        auto check_len = [&](const std::vector<double>& col, const char* name) {
            if (col.size() != n) {
                throw PipelineError("run '" + run.run_id + "': column '" + name +
                                    "' length mismatch");
            }
        };
        check_len(run.intake_air_flow, "intake_air_flow");
        check_len(run.fuel_rate, "fuel_rate");
        check_len(run.rail_pressure, "rail_pressure");
        check_len(run.intake_pressure, "intake_pressure");
        check_len(run.intake_temp, "intake_temp");
        check_len(run.engine_speed, "engine_speed");
        check_len(run.nox, "nox");
        for (const auto& [name, col] : run.extras) check_len(col, name.c_str());

        for (std::size_t i = 0; i < n; ++i) {
            if (!record_valid(run.intake_air_flow[i], run.fuel_rate[i], run.rail_pressure[i],
                              run.intake_pressure[i], run.intake_temp[i], run.engine_speed[i],
                              run.nox[i])) {
                throw PipelineError("run '" + run.run_id + "': invalid record at index " +
                                    std::to_string(i));
            }
            if (i > 0) {
                double dt = run.t[i] - run.t[i - 1];
                if (!(dt > 0.0) ||
                    std::fabs(dt - dataset.sample_period) > dataset.sample_period * 1e-9) {
                    throw PipelineError("run '" + run.run_id + "': non-uniform spacing at index " +
                                        std::to_string(i));
                }
            }
        }
    }
}

}  // namespace noxpred::obd
