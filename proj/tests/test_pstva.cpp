#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "noxpred/obd.hpp"
#include "noxpred/pstva.hpp"
#include "noxpred/serialization.hpp"
#include "noxpred/synth.hpp"

using namespace noxpred;

namespace {

mining::SymbolTable table_from_levels(const std::vector<std::vector<std::int8_t>>& runs,
                                      const std::string& attr = "X") {
    mining::SymbolTable sym;
    sym.attributes = {attr};
    for (std::size_t r = 0; r < runs.size(); ++r) {
        sym.run_ids.push_back("run" + std::to_string(r));
        sym.levels.push_back({runs[r]});
    }
    return sym;
}

mining::CoOccurrencePattern pattern_of(const std::string& attr, std::vector<std::int8_t> seq) {
    mining::CoOccurrencePattern p;
    p.items.push_back({attr, std::move(seq)});
    p.support = 0.1;
    p.cross_k_ratio = 5.0;
    return p;
}

// Two-regime synthetic set with an EngTq level signature per regime.
synth::SynthConfig separable_config() {
    synth::SynthConfig cfg;
    cfg.seed = 404;
    cfg.runs = 4;
    cfg.run_length = 1500;
    cfg.routes = 2;
    cfg.noise_stddev = 0.0;
    cfg.delta = 1;
    auto regime = [](const std::string& name, double a, double b, double c, double tq) {
        synth::RegimeSpec r;
        r.name = name;
        r.params = {a, b, c, 1};
        r.mean_dwell = 40.0;
        r.attribute_means = {{obd::kColIntakeAir, 420.0}, {obd::kColFuel, 12.0},
                             {obd::kColRailPressure, 1.2e8}, {obd::kColIntakePressure, 2.1e5},
                             {obd::kColIntakeTemp, 305.0},  {obd::kColEngineSpeed, 1400.0},
                             {"EngTq", tq}};
        r.attribute_stddevs = {{obd::kColIntakeAir, 10.0}, {obd::kColFuel, 0.5},
                               {obd::kColIntakeTemp, 2.0}, {obd::kColEngineSpeed, 40.0},
                               {"EngTq", 8.0}};
        return r;
    };
    cfg.regimes.push_back(regime("low", 2.0e-4, 2.0, -0.4, 100.0));
    cfg.regimes.push_back(regime("high", 6.0e-5, 2.35, -0.65, 800.0));
    cfg.transition = {{0.0, 1.0}, {1.0, 0.0}};
    return cfg;
}

}  // namespace

TEST_CASE("assign_partitions") {
    SUBCASE("no patterns puts every timestep in partition 0") {
        auto sym = table_from_levels({{1, 2, 3, 4, 5}});
        auto parts = pstva::assign_partitions(sym, {}, 3);
        for (std::size_t p : parts[0]) CHECK(p == 0);
    }
    SUBCASE("trailing-window matching against a brute-force matcher") {
        std::mt19937_64 rng(15);
        for (int rep = 0; rep < 40; ++rep) {
            std::size_t n = 5 + rng() % 60;
            std::vector<std::int8_t> lv(n);
            for (auto& v : lv) v = static_cast<std::int8_t>(rng() % 3);
            auto sym = table_from_levels({lv});
            const std::size_t L = 3;
            std::vector<std::int8_t> seq = {static_cast<std::int8_t>(rng() % 3),
                                            static_cast<std::int8_t>(rng() % 3),
                                            static_cast<std::int8_t>(rng() % 3)};
            auto parts = pstva::assign_partitions(sym, {pattern_of("X", seq)}, L);
            for (std::size_t k = 0; k < n; ++k) {
                bool match = k + 1 >= L;
                if (match) {
                    for (std::size_t j = 0; j < L; ++j) {
                        if (lv[k - L + 1 + j] != seq[j]) match = false;
                    }
                }
                CHECK(parts[0][k] == (match ? 1u : 0u));
            }
        }
    }
    SUBCASE("the lowest-priority index wins when two patterns match") {
        auto sym = table_from_levels({{7, 7, 7, 7}});
        auto p1 = pattern_of("X", {7, 7, 7});
        auto p2 = pattern_of("X", {7, 7, 7});
        auto parts = pstva::assign_partitions(sym, {p1, p2}, 3);
        CHECK(parts[0][2] == 1);
        CHECK(parts[0][3] == 1);
    }
    SUBCASE("assignment is total: counts sum to the timestep count") {
        std::mt19937_64 rng(16);
        std::vector<std::int8_t> lv(200);
        for (auto& v : lv) v = static_cast<std::int8_t>(rng() % 4);
        auto sym = table_from_levels({lv});
        auto parts = pstva::assign_partitions(
            sym, {pattern_of("X", {1, 1, 1}), pattern_of("X", {2, 2, 2})}, 3);
        std::size_t count = 0;
        for (std::size_t k = 0; k < lv.size(); ++k) {
            CHECK(parts[0][k] <= 2);
            ++count;
        }
        CHECK(count == lv.size());
    }
}

TEST_CASE("fit recovers both planted regimes through mined-style patterns") {
    auto cfg = separable_config();
    auto [ds, truth] = synth::generate(cfg);
    auto feats = physics::compute_features(ds, cfg.constants);
    auto obs = obd::nox_columns(ds);

    auto disc = mining::fit_discretizer(ds, {"EngTq"});
    auto sym = mining::symbolize(ds, disc);

    // One constant level triple per regime; together they separate the
    // regimes, leaving only boundary windows in partition 0.
    auto triple = [&](double torque) {
        auto lv = static_cast<std::int8_t>(disc.bins[0].level(torque));
        return pattern_of("EngTq", {lv, lv, lv});
    };
    auto pat_hi = triple(800.0);
    auto pat_lo = triple(100.0);

    pstva::FitConfig fc;
    fc.delta = 1;
    fc.window_len = 3;
    pstva::PartitionFitInfo info;
    auto model = pstva::fit(feats, obs, sym, {pat_hi, pat_lo}, disc, fc, std::nullopt, &info);

    REQUIRE(model.partition_params.size() == 3);
    CHECK(model.fallbacks.empty());
    // Partition 1 = high regime, partition 2 = low regime; noiseless
    // recovery to 1e-3 relative.
    for (auto [part, regime] : {std::pair{1, 1}, std::pair{2, 0}}) {
        CAPTURE(part);
        CHECK(model.partition_params[part].a ==
              doctest::Approx(cfg.regimes[regime].params.a).epsilon(1e-3));
        CHECK(model.partition_params[part].b ==
              doctest::Approx(cfg.regimes[regime].params.b).epsilon(1e-3));
        CHECK(model.partition_params[part].c ==
              doctest::Approx(cfg.regimes[regime].params.c).epsilon(1e-3));
    }
}

TEST_CASE("n=0 predictions are bit-identical to the baseline") {
    auto cfg = separable_config();
    cfg.runs = 2;
    cfg.run_length = 600;
    cfg.noise_stddev = 12.0;
    auto [ds, truth] = synth::generate(cfg);
    auto feats = physics::compute_features(ds, cfg.constants);
    auto obs = obd::nox_columns(ds);

    auto samples = regression::build_samples(feats, obs, 1);
    auto init = regression::log_ols_init(samples, regression::LmOptions{});
    auto base = regression::fit_lm(samples, init, regression::LmOptions{});
    auto base_pred = regression::predict(base.params, feats);

    auto disc = mining::fit_discretizer(ds, {"EngTq"});
    auto sym = mining::symbolize(ds, disc);
    pstva::FitConfig fc;
    fc.delta = 1;
    auto model = pstva::fit(feats, obs, sym, {}, disc, fc, base.params, nullptr);
    auto pstva_pred = pstva::predict(model, feats, sym);

    REQUIRE(pstva_pred.size() == base_pred.size());
    for (std::size_t r = 0; r < base_pred.size(); ++r) {
        REQUIRE(pstva_pred[r].size() == base_pred[r].size());
        for (std::size_t k = 0; k < base_pred[r].size(); ++k) {
            if (std::isnan(base_pred[r][k])) {
                CHECK(std::isnan(pstva_pred[r][k]));
            } else {
                CHECK(pstva_pred[r][k] == base_pred[r][k]);  // bitwise
            }
        }
    }
}

TEST_CASE("undersized partitions fall back to partition-0 params") {
    auto cfg = separable_config();
    cfg.runs = 1;
    cfg.run_length = 400;
    auto [ds, truth] = synth::generate(cfg);
    auto feats = physics::compute_features(ds, cfg.constants);
    auto obs = obd::nox_columns(ds);
    auto disc = mining::fit_discretizer(ds, {"EngTq"});
    auto sym = mining::symbolize(ds, disc);

    // A pattern that matches nothing: impossible level sequence.
    auto pat = pattern_of("EngTq", {0, 10, 0});
    pstva::FitConfig fc;
    fc.delta = 1;
    fc.min_partition_samples = 50;
    pstva::PartitionFitInfo info;
    auto model = pstva::fit(feats, obs, sym, {pat}, disc, fc, std::nullopt, &info);
    CHECK(model.fallbacks.count(1) == 1);
    CHECK(model.partition_params[1].a == model.partition_params[0].a);
    CHECK(model.partition_params[1].b == model.partition_params[0].b);
    CHECK(info.sample_counts[1] < 50);
}

TEST_CASE("training SSE never exceeds the baseline's when no fallback occurred") {
    auto cfg = separable_config();
    cfg.noise_stddev = 20.0;
    auto [ds, truth] = synth::generate(cfg);
    auto feats = physics::compute_features(ds, cfg.constants);
    auto obs = obd::nox_columns(ds);

    auto samples = regression::build_samples(feats, obs, 1);
    auto init = regression::log_ols_init(samples, regression::LmOptions{});
    auto base = regression::fit_lm(samples, init, regression::LmOptions{});

    auto disc = mining::fit_discretizer(ds, {"EngTq"});
    auto sym = mining::symbolize(ds, disc);
    int hi = disc.bins[0].level(800.0);
    auto pat = pattern_of("EngTq", {static_cast<std::int8_t>(hi), static_cast<std::int8_t>(hi),
                                    static_cast<std::int8_t>(hi)});
    pstva::FitConfig fc;
    fc.delta = 1;
    auto model = pstva::fit(feats, obs, sym, {pat}, disc, fc, base.params, nullptr);
    REQUIRE(model.fallbacks.empty());

    auto pred_base = regression::predict(base.params, feats);
    auto pred_model = pstva::predict(model, feats, sym);
    double sse_base = 0.0, sse_model = 0.0;
    for (std::size_t r = 0; r < obs.size(); ++r) {
        for (std::size_t k = 0; k < obs[r].size(); ++k) {
            if (!std::isnan(pred_base[r][k])) {
                sse_base += (obs[r][k] - pred_base[r][k]) * (obs[r][k] - pred_base[r][k]);
            }
            if (!std::isnan(pred_model[r][k])) {
                sse_model += (obs[r][k] - pred_model[r][k]) * (obs[r][k] - pred_model[r][k]);
            }
        }
    }
    CHECK(sse_model <= sse_base + 1e-9);
}

TEST_CASE("hand-routed 3-step example matches scalar computation") {
    physics::FeatureSeries feats(1);
    feats[0].run_id = "r";
    feats[0].t_adiab = {2000.0, 2100.0, 2200.0, 2300.0};
    feats[0].t_comb = {1e-3, 2e-3, 3e-3, 4e-3};
    feats[0].x_o2 = {0.21, 0.21, 0.21, 0.21};
    feats[0].valid = {true, true, true, true};

    mining::SymbolTable sym = table_from_levels({{5, 5, 5, 2}});
    pstva::PartitionedModel model;
    model.patterns = {pattern_of("X", {5, 5, 5})};
    model.partition_params = {regression::PowerLawParams{1.0, 1.0, 0.0, 1},
                              regression::PowerLawParams{2.0, 1.0, 0.0, 1}};
    model.window_len = 3;
    model.delta = 1;

    auto pred = pstva::predict(model, feats, sym);
    // k=0,1: partition 0 (window incomplete); k=2: pattern matches -> partition 1;
    // k=3: window [1..3] = {5,5,2} -> partition 0.
    CHECK(std::isnan(pred[0][0]));
    CHECK(pred[0][1] == doctest::Approx(1.0 * 2000.0).epsilon(1e-12));  // from k=0, part 0
    CHECK(pred[0][2] == doctest::Approx(1.0 * 2100.0).epsilon(1e-12));  // from k=1, part 0
    CHECK(pred[0][3] == doctest::Approx(2.0 * 2200.0).epsilon(1e-12));  // from k=2, part 1
}

TEST_CASE("PartitionedModel JSON round-trips losslessly") {
    auto cfg = separable_config();
    cfg.runs = 2;
    cfg.run_length = 800;
    cfg.noise_stddev = 7.0;
    auto [ds, truth] = synth::generate(cfg);
    auto feats = physics::compute_features(ds, cfg.constants);
    auto obs = obd::nox_columns(ds);
    auto disc = mining::fit_discretizer(ds, {"EngTq"});
    auto sym = mining::symbolize(ds, disc);
    int hi = disc.bins[0].level(800.0);
    auto pat = pattern_of("EngTq", {static_cast<std::int8_t>(hi), static_cast<std::int8_t>(hi),
                                    static_cast<std::int8_t>(hi)});
    pat.scenario_label = "high engine load";
    pstva::FitConfig fc;
    fc.delta = 1;
    auto model = pstva::fit(feats, obs, sym, {pat}, disc, fc, std::nullopt, nullptr);

    nlohmann::json j = model;
    auto back = j.get<pstva::PartitionedModel>();
    nlohmann::json j2 = back;
    CHECK(j.dump() == j2.dump());
    REQUIRE(back.partition_params.size() == model.partition_params.size());
    for (std::size_t i = 0; i < model.partition_params.size(); ++i) {
        CHECK(back.partition_params[i].a == model.partition_params[i].a);  // bitwise
        CHECK(back.partition_params[i].b == model.partition_params[i].b);
        CHECK(back.partition_params[i].c == model.partition_params[i].c);
    }
    CHECK(back.patterns[0].scenario_label == "high engine load");
    CHECK(back.discretizer.bins[0].edges == model.discretizer.bins[0].edges);

    // Routing with the deserialized model is identical.
    auto p1 = pstva::predict(model, feats, sym);
    auto p2 = pstva::predict(back, feats, sym);
    for (std::size_t r = 0; r < p1.size(); ++r) {
        for (std::size_t k = 0; k < p1[r].size(); ++k) {
            if (!std::isnan(p1[r][k])) CHECK(p1[r][k] == p2[r][k]);
        }
    }
}
