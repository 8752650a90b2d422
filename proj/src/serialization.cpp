#include "noxpred/serialization.hpp"

#include <cmath>
#include <limits>

#include "noxpred/common.hpp"

using nlohmann::json;

namespace noxpred::obd {

void to_json(json& j, const IngestReport& r) {
    j = json{{"rows_read", r.rows_read},
             {"rows_dropped", r.rows_dropped},
             {"runs", r.runs},
             {"per_run_counts", r.per_run_counts}};
}

void from_json(const json& j, IngestReport& r) {
    j.at("rows_read").get_to(r.rows_read);
    j.at("rows_dropped").get_to(r.rows_dropped);
    j.at("runs").get_to(r.runs);
    j.at("per_run_counts").get_to(r.per_run_counts);
}

void to_json(json& j, const SplitSpec& s) {
    j = json{{"train_run_ids", s.train_run_ids},
             {"test_run_ids", s.test_run_ids},
             {"warnings", s.warnings}};
}

void from_json(const json& j, SplitSpec& s) {
    j.at("train_run_ids").get_to(s.train_run_ids);
    j.at("test_run_ids").get_to(s.test_run_ids);
    if (j.contains("warnings")) j.at("warnings").get_to(s.warnings);
}

}  // namespace noxpred::obd

namespace noxpred::physics {

void to_json(json& j, const PhysicsConstants& c) {
    j = json{{"compression_ratio", c.compression_ratio},
             {"gamma", c.gamma},
             {"lhv_fuel_j_per_kg", c.lhv_fuel},
             {"cp_charge_j_per_kg_k", c.cp_charge},
             {"afr_stoich", c.afr_stoich},
             {"n_cylinders", c.n_cylinders},
             {"nozzle_area_total_m2", c.nozzle_area_total},
             {"discharge_coeff", c.discharge_coeff},
             {"fuel_density_kg_per_m3", c.fuel_density},
             {"ambient_o2_fraction", c.ambient_o2_fraction},
             {"eps_delta_p_pa", c.eps_delta_p}};
}

void from_json(const json& j, PhysicsConstants& c) {
    c = PhysicsConstants{};
    if (j.contains("compression_ratio")) j.at("compression_ratio").get_to(c.compression_ratio);
    if (j.contains("gamma")) j.at("gamma").get_to(c.gamma);
    if (j.contains("lhv_fuel_j_per_kg")) j.at("lhv_fuel_j_per_kg").get_to(c.lhv_fuel);
    if (j.contains("cp_charge_j_per_kg_k")) j.at("cp_charge_j_per_kg_k").get_to(c.cp_charge);
    if (j.contains("afr_stoich")) j.at("afr_stoich").get_to(c.afr_stoich);
    if (j.contains("n_cylinders")) j.at("n_cylinders").get_to(c.n_cylinders);
    if (j.contains("nozzle_area_total_m2")) j.at("nozzle_area_total_m2").get_to(c.nozzle_area_total);
    if (j.contains("discharge_coeff")) j.at("discharge_coeff").get_to(c.discharge_coeff);
    if (j.contains("fuel_density_kg_per_m3")) j.at("fuel_density_kg_per_m3").get_to(c.fuel_density);
    if (j.contains("ambient_o2_fraction")) j.at("ambient_o2_fraction").get_to(c.ambient_o2_fraction);
    if (j.contains("eps_delta_p_pa")) j.at("eps_delta_p_pa").get_to(c.eps_delta_p);
    c.check();
}

void to_json(json& j, const LopParams& p) {
    j = json{{"amplitude_ppm", p.amplitude},
             {"o2_exponent", p.o2_exponent},
             {"tcomb_exponent", p.tcomb_exponent},
             {"activation_temp_k", p.activation_temp}};
}

void from_json(const json& j, LopParams& p) {
    p = LopParams{};
    if (j.contains("amplitude_ppm")) j.at("amplitude_ppm").get_to(p.amplitude);
    if (j.contains("o2_exponent")) j.at("o2_exponent").get_to(p.o2_exponent);
    if (j.contains("tcomb_exponent")) j.at("tcomb_exponent").get_to(p.tcomb_exponent);
    if (j.contains("activation_temp_k")) j.at("activation_temp_k").get_to(p.activation_temp);
    p.check();
}

}  // namespace noxpred::physics

namespace noxpred::regression {

void to_json(json& j, const PowerLawParams& p) {
    j = json{{"a", p.a}, {"b", p.b}, {"c", p.c}, {"delta", p.delta}};
}

void from_json(const json& j, PowerLawParams& p) {
    j.at("a").get_to(p.a);
    j.at("b").get_to(p.b);
    j.at("c").get_to(p.c);
    j.at("delta").get_to(p.delta);
    p.check();
}

void to_json(json& j, const LmOptions& o) {
    j = json{{"max_iterations", o.max_iterations},
             {"lambda_init", o.lambda_init},
             {"lambda_up", o.lambda_up},
             {"lambda_down", o.lambda_down},
             {"rel_tol", o.rel_tol},
             {"min_samples", o.min_samples}};
}

void from_json(const json& j, LmOptions& o) {
    o = LmOptions{};
    if (j.contains("max_iterations")) j.at("max_iterations").get_to(o.max_iterations);
    if (j.contains("lambda_init")) j.at("lambda_init").get_to(o.lambda_init);
    if (j.contains("lambda_up")) j.at("lambda_up").get_to(o.lambda_up);
    if (j.contains("lambda_down")) j.at("lambda_down").get_to(o.lambda_down);
    if (j.contains("rel_tol")) j.at("rel_tol").get_to(o.rel_tol);
    if (j.contains("min_samples")) j.at("min_samples").get_to(o.min_samples);
    o.check();
}

void to_json(json& j, const FitReport& r) {
    j = json{{"params", r.params},
             {"iterations", r.iterations},
             {"converged", r.converged},
             {"sse_initial", r.sse_initial},
             {"sse_final", r.sse_final},
             {"n_samples", r.n_samples},
             {"accepted_sse_trace", r.accepted_sse_trace}};
}

void from_json(const json& j, FitReport& r) {
    j.at("params").get_to(r.params);
    j.at("iterations").get_to(r.iterations);
    j.at("converged").get_to(r.converged);
    j.at("sse_initial").get_to(r.sse_initial);
    j.at("sse_final").get_to(r.sse_final);
    j.at("n_samples").get_to(r.n_samples);
    if (j.contains("accepted_sse_trace")) j.at("accepted_sse_trace").get_to(r.accepted_sse_trace);
}

void to_json(json& j, const Metrics& m) {
    j = json{{"rmse", m.rmse}, {"mae", m.mae}, {"n", m.n}};
    if (std::isfinite(m.r2)) {
        j["r2"] = m.r2;
    } else {
        j["r2"] = nullptr;  // undefined R^2 (zero-variance observations)
    }
}

void from_json(const json& j, Metrics& m) {
    j.at("rmse").get_to(m.rmse);
    j.at("mae").get_to(m.mae);
    j.at("n").get_to(m.n);
    if (j.contains("r2") && !j.at("r2").is_null()) {
        j.at("r2").get_to(m.r2);
    } else {
        m.r2 = -std::numeric_limits<double>::infinity();
    }
}

void to_json(json& j, const DeltaCandidate& c) {
    j = json{{"delta", c.delta}, {"train_rmse", c.train_rmse}, {"failed", c.failed}};
    if (c.failed) j["error"] = c.error;
}

void from_json(const json& j, DeltaCandidate& c) {
    j.at("delta").get_to(c.delta);
    j.at("train_rmse").get_to(c.train_rmse);
    j.at("failed").get_to(c.failed);
    if (j.contains("error")) j.at("error").get_to(c.error);
}

void to_json(json& j, const DeltaSelection& s) {
    j = json{{"delta", s.delta}, {"candidates", s.candidates}};
}

void from_json(const json& j, DeltaSelection& s) {
    j.at("delta").get_to(s.delta);
    j.at("candidates").get_to(s.candidates);
}

}  // namespace noxpred::regression

namespace noxpred::divergence {

void to_json(json& j, const DivergenceConfig& c) {
    j = json{{"window_len_s", c.window_len_s},
             {"summation_threshold_ppm", c.summation_threshold}};
}

void from_json(const json& j, DivergenceConfig& c) {
    c = DivergenceConfig{};
    if (j.contains("window_len_s")) j.at("window_len_s").get_to(c.window_len_s);
    if (j.contains("summation_threshold_ppm")) {
        j.at("summation_threshold_ppm").get_to(c.summation_threshold);
    }
    c.check();
}

}  // namespace noxpred::divergence

namespace noxpred::mining {

void to_json(json& j, const MinerConfig& c) {
    j = json{{"min_supp", c.min_supp},
             {"epsilon", c.epsilon},
             {"max_attributes", c.max_attributes},
             {"attributes", c.attributes}};
}

void from_json(const json& j, MinerConfig& c) {
    c = MinerConfig{};
    if (j.contains("min_supp")) j.at("min_supp").get_to(c.min_supp);
    if (j.contains("epsilon")) j.at("epsilon").get_to(c.epsilon);
    if (j.contains("max_attributes")) j.at("max_attributes").get_to(c.max_attributes);
    if (j.contains("attributes")) j.at("attributes").get_to(c.attributes);
    c.check();
}

void to_json(json& j, const AttributeBins& b) {
    j = json{{"attribute", b.attribute}, {"edges", b.edges}, {"degenerate", b.degenerate}};
}

void from_json(const json& j, AttributeBins& b) {
    j.at("attribute").get_to(b.attribute);
    j.at("edges").get_to(b.edges);
    j.at("degenerate").get_to(b.degenerate);
    if (b.edges.size() != kNumLevels + 1) {
        throw ConfigError("discretizer bins must carry 12 edges");
    }
}

void to_json(json& j, const Discretizer& d) { j = json{{"bins", d.bins}}; }

void from_json(const json& j, Discretizer& d) { j.at("bins").get_to(d.bins); }

void to_json(json& j, const CoOccurrencePattern& p) {
    json items = json::object();
    for (const auto& item : p.items) {
        json seq = json::array();
        for (std::int8_t lv : item.levels) seq.push_back(static_cast<int>(lv));
        items[item.attribute] = seq;
    }
    j = json{{"items", items},
             {"support", p.support},
             {"cross_k_ratio", p.cross_k_ratio},
             {"occurrences", p.occurrence_count}};
    if (!p.scenario_label.empty()) j["scenario_label"] = p.scenario_label;
}

void from_json(const json& j, CoOccurrencePattern& p) {
    p = CoOccurrencePattern{};
    for (const auto& [attr, seq] : j.at("items").items()) {
        PatternItem item;
        item.attribute = attr;
        for (const auto& v : seq) item.levels.push_back(static_cast<std::int8_t>(v.get<int>()));
        p.items.push_back(std::move(item));
    }
    j.at("support").get_to(p.support);
    j.at("cross_k_ratio").get_to(p.cross_k_ratio);
    j.at("occurrences").get_to(p.occurrence_count);
    if (j.contains("scenario_label")) j.at("scenario_label").get_to(p.scenario_label);
}

}  // namespace noxpred::mining

namespace noxpred::synth {

void to_json(json& j, const RegimeSpec& r) {
    j = json{{"name", r.name},
             {"a", r.params.a},
             {"b", r.params.b},
             {"c", r.params.c},
             {"means", r.attribute_means},
             {"stddevs", r.attribute_stddevs},
             {"mean_dwell_s", r.mean_dwell}};
}

void from_json(const json& j, RegimeSpec& r) {
    r = RegimeSpec{};
    j.at("name").get_to(r.name);
    j.at("a").get_to(r.params.a);
    j.at("b").get_to(r.params.b);
    j.at("c").get_to(r.params.c);
    j.at("means").get_to(r.attribute_means);
    if (j.contains("stddevs")) j.at("stddevs").get_to(r.attribute_stddevs);
    if (j.contains("mean_dwell_s")) j.at("mean_dwell_s").get_to(r.mean_dwell);
}

void to_json(json& j, const SynthConfig& c) {
    j = json{{"regimes", c.regimes},
             {"transition", c.transition},
             {"runs", c.runs},
             {"run_length", c.run_length},
             {"routes", c.routes},
             {"noise_stddev_ppm", c.noise_stddev},
             {"delta", c.delta},
             {"physics_mismatch", c.physics_mismatch},
             {"sample_period_s", c.sample_period},
             {"seed", c.seed},
             {"physics", c.constants}};
}

void from_json(const json& j, SynthConfig& c) {
    c = SynthConfig{};
    j.at("regimes").get_to(c.regimes);
    j.at("transition").get_to(c.transition);
    if (j.contains("runs")) j.at("runs").get_to(c.runs);
    if (j.contains("run_length")) j.at("run_length").get_to(c.run_length);
    if (j.contains("routes")) j.at("routes").get_to(c.routes);
    if (j.contains("noise_stddev_ppm")) j.at("noise_stddev_ppm").get_to(c.noise_stddev);
    if (j.contains("delta")) j.at("delta").get_to(c.delta);
    if (j.contains("physics_mismatch")) j.at("physics_mismatch").get_to(c.physics_mismatch);
    if (j.contains("sample_period_s")) j.at("sample_period_s").get_to(c.sample_period);
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("physics")) j.at("physics").get_to(c.constants);
    c.check();
}

}  // namespace noxpred::synth

namespace noxpred::pstva {

void to_json(json& j, const PartitionedModel& m) {
    j = json{{"patterns", m.patterns},
             {"partition_params", m.partition_params},
             {"discretizer", m.discretizer},
             {"window_len", m.window_len},
             {"delta", m.delta},
             {"fallbacks", m.fallbacks}};
}

void from_json(const json& j, PartitionedModel& m) {
    m = PartitionedModel{};
    j.at("patterns").get_to(m.patterns);
    j.at("partition_params").get_to(m.partition_params);
    j.at("discretizer").get_to(m.discretizer);
    j.at("window_len").get_to(m.window_len);
    j.at("delta").get_to(m.delta);
    j.at("fallbacks").get_to(m.fallbacks);
    m.check();
}

}  // namespace noxpred::pstva
