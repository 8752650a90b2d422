#include "noxpred/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "noxpred/common.hpp"

namespace noxpred::synth {

namespace {

// Attribute floors used when truncating the normal draws. Engine speed
// stays above the combustion-validity cutoff so every generated timestep
// has defined features (and therefore finite NOx).
double lower_bound_for(const std::string& attr) {
    if (attr == obd::kColEngineSpeed) return physics::kMinEngineSpeed + 5.0;
    if (attr == obd::kColIntakeTemp) return 1.0;
    if (attr == obd::kColRailPressure || attr == obd::kColIntakePressure) return 1.0;
    if (attr == obd::kColIntakeAir || attr == obd::kColFuel) return 1e-3;
    return 0.0;  // extras: non-negative
}

double truncated_normal(std::mt19937_64& rng, double mean, double stddev, double lo) {
    if (stddev <= 0.0) return std::max(mean, lo);
    std::normal_distribution<double> dist(mean, stddev);
    for (int tries = 0; tries < 64; ++tries) {
        double v = dist(rng);
        if (v >= lo) return v;
    }
    return lo;
}

std::string padded_run_id(std::size_t index, std::size_t total) {
    std::size_t digits = std::to_string(total).size();
    std::string num = std::to_string(index + 1);
    return "run" + std::string(digits > num.size() ? digits - num.size() : 0, '0') + num;
}

// Generator-side constants differ from the fitting constants when
// physics_mismatch > 0, emulating low-order model error. The perturbation
// alternates direction across constants and respects each invariant
// (gamma > 1, o2 fraction <= 0.21).
physics::PhysicsConstants perturbed(const physics::PhysicsConstants& c, double p) {
    physics::PhysicsConstants out = c;
    if (p == 0.0) return out;
    out.compression_ratio *= 1.0 + p;
    out.gamma = 1.0 + (out.gamma - 1.0) * (1.0 + p);
    out.lhv_fuel *= 1.0 - p;
    out.cp_charge *= 1.0 + p;
    out.afr_stoich *= 1.0 - p;
    out.nozzle_area_total *= 1.0 + p;
    out.discharge_coeff *= 1.0 - p;
    out.fuel_density *= 1.0 + p;
    out.ambient_o2_fraction *= 1.0 - p;
    out.check();
    return out;
}

}  // namespace

void SynthConfig::check() const {
    if (regimes.empty()) throw ConfigError("synth config needs at least one regime");
    if (runs < 1 || run_length < 1) throw ConfigError("synth config: runs and run_length must be >= 1");
    if (routes < 1) throw ConfigError("synth config: routes must be >= 1");
    if (!(noise_stddev >= 0.0)) throw ConfigError("synth config: noise_stddev must be >= 0");
    if (delta < 0) throw ConfigError("synth config: delta must be >= 0");
    if (!(physics_mismatch >= 0.0) || physics_mismatch >= 1.0) {
        throw ConfigError("synth config: physics_mismatch must be in [0, 1)");
    }
    if (!(sample_period > 0.0)) throw ConfigError("synth config: sample_period must be > 0");
    constants.check();

    const auto& first_means = regimes.front().attribute_means;
    for (const auto& r : regimes) {
        r.params.check();
        if (!(r.mean_dwell >= 1.0)) {
            throw ConfigError("regime '" + r.name + "': mean_dwell must be >= 1");
        }
        for (const char* core :
             {obd::kColIntakeAir, obd::kColFuel, obd::kColRailPressure, obd::kColIntakePressure,
              obd::kColIntakeTemp, obd::kColEngineSpeed}) {
            if (!r.attribute_means.count(core)) {
                throw ConfigError("regime '" + r.name + "': missing mean for core attribute '" +
                                  std::string(core) + "'");
            }
        }
        if (r.attribute_means.size() != first_means.size()) {
            throw ConfigError("all regimes must declare the same attribute set");
        }
        for (const auto& [name, mean] : r.attribute_means) {
            if (!first_means.count(name)) {
                throw ConfigError("all regimes must declare the same attribute set ('" + name +
                                  "' differs)");
            }
        }
        for (const auto& [name, sd] : r.attribute_stddevs) {
            if (!(sd >= 0.0)) {
                throw ConfigError("regime '" + r.name + "': stddev for '" + name +
                                  "' must be >= 0");
            }
        }
    }

    if (transition.size() != regimes.size()) {
        throw ConfigError("transition matrix must be square over the regimes");
    }
    for (const auto& row : transition) {
        if (row.size() != regimes.size()) {
            throw ConfigError("transition matrix must be square over the regimes");
        }
        double s = 0.0;
        for (double v : row) {
            if (!(v >= 0.0)) throw ConfigError("transition probabilities must be >= 0");
            s += v;
        }
        if (std::fabs(s - 1.0) > 1e-9) {
            throw ConfigError("transition matrix rows must sum to 1");
        }
    }
}

std::vector<std::vector<double>> effective_transition(const SynthConfig& config) {
    const std::size_t n = config.regimes.size();
    std::vector<std::vector<double>> eff(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        double stay = 1.0 - 1.0 / config.regimes[i].mean_dwell;
        for (std::size_t j = 0; j < n; ++j) {
            eff[i][j] = (1.0 - stay) * config.transition[i][j];
        }
        eff[i][i] += stay;
    }
    return eff;
}

std::pair<obd::ObdDataset, GroundTruth> generate(const SynthConfig& config) {
    config.check();

    const std::size_t n_regimes = config.regimes.size();
    const physics::PhysicsConstants gen_constants =
        perturbed(config.constants, config.physics_mismatch);

    // Attribute list: core columns drawn from the regime means, everything
    // else goes to extras.
    std::vector<std::string> attr_names;
    for (const auto& [name, mean] : config.regimes.front().attribute_means) {
        attr_names.push_back(name);
    }

    obd::ObdDataset ds;
    ds.sample_period = config.sample_period;
    GroundTruth truth;

    for (std::size_t r = 0; r < config.runs; ++r) {
        std::mt19937_64 rng(config.seed + r);
        const std::size_t n = config.run_length;

        obd::Run run;
        run.run_id = padded_run_id(r, config.runs);
        run.route_id = "route" + std::to_string(r % config.routes + 1);

        // Regime path: geometric dwell composed with the transition row.
        std::vector<std::size_t> labels(n);
        std::uniform_int_distribution<std::size_t> init_dist(0, n_regimes - 1);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::size_t state = init_dist(rng);
        for (std::size_t k = 0; k < n; ++k) {
            labels[k] = state;
            double stay = 1.0 - 1.0 / config.regimes[state].mean_dwell;
            if (unif(rng) >= stay) {
                double u = unif(rng);
                double acc = 0.0;
                std::size_t next = state;
                for (std::size_t j = 0; j < n_regimes; ++j) {
                    acc += config.transition[state][j];
                    if (u < acc) {
                        next = j;
                        break;
                    }
                }
                state = next;
            }
        }

        // Attribute draws.
        std::map<std::string, std::vector<double>> cols;
        for (const auto& name : attr_names) cols[name] = std::vector<double>(n);
        for (std::size_t k = 0; k < n; ++k) {
            const RegimeSpec& regime = config.regimes[labels[k]];
            for (const auto& name : attr_names) {
                double mean = regime.attribute_means.at(name);
                auto sd_it = regime.attribute_stddevs.find(name);
                double sd = sd_it == regime.attribute_stddevs.end() ? 0.0 : sd_it->second;
                cols[name][k] = truncated_normal(rng, mean, sd, lower_bound_for(name));
            }
        }

        run.t.resize(n);
        for (std::size_t k = 0; k < n; ++k) run.t[k] = static_cast<double>(k) * config.sample_period;
        run.intake_air_flow = cols.at(obd::kColIntakeAir);
        run.fuel_rate = cols.at(obd::kColFuel);
        run.rail_pressure = cols.at(obd::kColRailPressure);
        run.intake_pressure = cols.at(obd::kColIntakePressure);
        run.intake_temp = cols.at(obd::kColIntakeTemp);
        run.engine_speed = cols.at(obd::kColEngineSpeed);
        for (const auto& name : attr_names) {
            if (obd::attribute_column(run, name) == nullptr) run.extras[name] = cols.at(name);
        }
        run.nox.assign(n, 0.0);

        // NOx through the same feature computation the fit uses (with the
        // generator-side constants).
        obd::ObdDataset tmp;
        tmp.sample_period = config.sample_period;
        tmp.runs.push_back(run);
        physics::FeatureSeries feats = physics::compute_features(tmp, gen_constants);
        const physics::RunFeatures& f = feats.front();

        std::normal_distribution<double> noise(0.0, config.noise_stddev);
        const std::size_t delta = static_cast<std::size_t>(config.delta);
        for (std::size_t k = 0; k < n; ++k) {
            std::size_t src = k >= delta ? k - delta : 0;
            const RegimeSpec& regime = config.regimes[labels[src]];
            double model = regime.params.a *
                           std::exp(regime.params.b * std::log(f.t_adiab[src]) +
                                    regime.params.c * std::log(f.t_comb[src]));
            double eps = config.noise_stddev > 0.0 ? noise(rng) : 0.0;
            run.nox[k] = model + eps;
        }

        ds.runs.push_back(std::move(run));
        truth.labels.push_back(std::move(labels));
    }
    return {std::move(ds), std::move(truth)};
}

void write_labels_csv(const obd::ObdDataset& dataset, const GroundTruth& truth,
                      const SynthConfig& config, const std::string& path) {
    if (truth.labels.size() != dataset.runs.size()) {
        throw PipelineError("write_labels_csv: label/run mismatch");
    }
    std::ofstream out(path);
    if (!out) throw PipelineError("cannot write labels CSV: " + path);
    out << "run_id,t_s,regime_index,regime_name\n";
    for (std::size_t r = 0; r < dataset.runs.size(); ++r) {
        const auto& run = dataset.runs[r];
        for (std::size_t k = 0; k < run.size(); ++k) {
            std::size_t lbl = truth.labels[r][k];
            out << run.run_id << ',' << run.t[k] << ',' << lbl << ','
                << config.regimes[lbl].name << "\n";
        }
    }
}

}  // namespace noxpred::synth
