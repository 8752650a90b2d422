#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "noxpred/common.hpp"
#include "noxpred/kernels.hpp"
#include "noxpred/regression.hpp"

using namespace noxpred;
using regression::LmOptions;
using regression::PowerLawParams;
using regression::SampleSet;

namespace {

// Feature series with smoothly varying valid features, run lengths given.
physics::FeatureSeries synthetic_features(const std::vector<std::size_t>& run_lengths,
                                          unsigned seed = 1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> utemp(1800.0, 2900.0);
    std::uniform_real_distribution<double> utcomb(2e-4, 4e-3);
    physics::FeatureSeries feats;
    for (std::size_t r = 0; r < run_lengths.size(); ++r) {
        physics::RunFeatures f;
        f.run_id = "r" + std::to_string(r);
        for (std::size_t k = 0; k < run_lengths[r]; ++k) {
            f.t_adiab.push_back(utemp(rng));
            f.t_comb.push_back(utcomb(rng));
            f.x_o2.push_back(0.21);
            f.valid.push_back(true);
        }
        feats.push_back(std::move(f));
    }
    return feats;
}

// Observed series generated from the power law (optionally with noise).
regression::SeriesPerRun generate_observed(const physics::FeatureSeries& feats,
                                           const PowerLawParams& truth, double noise_sd = 0.0,
                                           unsigned seed = 2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, noise_sd);
    regression::SeriesPerRun obs;
    for (const auto& f : feats) {
        std::vector<double> y(f.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t k = 0; k < f.size(); ++k) {
            std::size_t target = k + static_cast<std::size_t>(truth.delta);
            if (target >= f.size()) continue;
            double m = truth.a * std::pow(f.t_adiab[k], truth.b) * std::pow(f.t_comb[k], truth.c);
            y[target] = m + (noise_sd > 0.0 ? noise(rng) : 0.0);
        }
        // Fill the leading lag targets so the series is fully defined.
        for (int k = 0; k < truth.delta; ++k) {
            if (static_cast<std::size_t>(k) < y.size() && std::isnan(y[k])) {
                y[k] = y[std::min<std::size_t>(truth.delta, y.size() - 1)];
            }
        }
        obs.push_back(std::move(y));
    }
    return obs;
}

}  // namespace

TEST_CASE("build_samples") {
    SUBCASE("delta=0 keeps every valid timestep") {
        auto feats = synthetic_features({10});
        regression::SeriesPerRun obs = {std::vector<double>(10, 5.0)};
        auto s = regression::build_samples(feats, obs, 0);
        CHECK(s.size() == 10);
    }
    SUBCASE("delta=1 on a 10-step run yields 9 samples") {
        auto feats = synthetic_features({10});
        regression::SeriesPerRun obs = {std::vector<double>(10, 5.0)};
        auto s = regression::build_samples(feats, obs, 1);
        CHECK(s.size() == 9);
    }
    SUBCASE("two runs of 10, delta=1 -> 18 samples, no boundary crossing") {
        auto feats = synthetic_features({10, 10});
        regression::SeriesPerRun obs = {std::vector<double>(10, 5.0),
                                        std::vector<double>(10, 5.0)};
        auto s = regression::build_samples(feats, obs, 1);
        CHECK(s.size() == 18);  // a naive concatenation would give 19
        for (std::size_t i = 0; i < s.size(); ++i) {
            CHECK(s.source_k[i] + 1 < 10);  // target stays inside the run
        }
    }
    SUBCASE("invalid features are excluded") {
        auto feats = synthetic_features({10});
        feats[0].valid[3] = false;
        regression::SeriesPerRun obs = {std::vector<double>(10, 5.0)};
        auto s = regression::build_samples(feats, obs, 0);
        CHECK(s.size() == 9);
    }
    SUBCASE("empty result is an error naming the cause") {
        auto feats = synthetic_features({3});
        regression::SeriesPerRun obs = {std::vector<double>(3, 5.0)};
        CHECK_THROWS_AS(regression::build_samples(feats, obs, 5), PipelineError);
    }
}

TEST_CASE("log_ols_init") {
    LmOptions opts;
    SUBCASE("noiseless data from (5, 2, -0.5) recovers exactly") {
        PowerLawParams truth{5.0, 2.0, -0.5, 0};
        auto feats = synthetic_features({200});
        auto obs = generate_observed(feats, truth);
        auto s = regression::build_samples(feats, obs, 0);
        auto p = regression::log_ols_init(s, opts);
        CHECK(p.a == doctest::Approx(5.0).epsilon(1e-9));
        CHECK(p.b == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(p.c == doctest::Approx(-0.5).epsilon(1e-9));
    }
    SUBCASE("constant y = 7 with varying T, t gives a=7, b=c~0") {
        auto feats = synthetic_features({100});
        regression::SeriesPerRun obs = {std::vector<double>(100, 7.0)};
        auto s = regression::build_samples(feats, obs, 0);
        auto p = regression::log_ols_init(s, opts);
        CHECK(p.a == doctest::Approx(7.0).epsilon(1e-9));
        CHECK(p.b == doctest::Approx(0.0).epsilon(1e-7));
        CHECK(p.c == doctest::Approx(0.0).epsilon(1e-7));
    }
    SUBCASE("rank-deficient design falls back to fewer regressors") {
        auto feats = synthetic_features({100});
        for (auto& v : feats[0].t_comb) v = 1e-3;  // constant regressor
        PowerLawParams truth{3.0, 1.5, 0.0, 0};
        auto obs = generate_observed(feats, truth);
        auto s = regression::build_samples(feats, obs, 0);
        auto p = regression::log_ols_init(s, opts);
        CHECK(p.c == 0.0);
        CHECK(p.b == doctest::Approx(1.5).epsilon(1e-9));
    }
    SUBCASE("all non-positive targets is an init error") {
        auto feats = synthetic_features({50});
        regression::SeriesPerRun obs = {std::vector<double>(50, -1.0)};
        auto s = regression::build_samples(feats, obs, 0);
        CHECK_THROWS_AS(regression::log_ols_init(s, opts), PipelineError);
    }
}

TEST_CASE("fit_lm recovers noiseless parameters from a perturbed start") {
    PowerLawParams truth{2.5e-4, 2.2, -0.6, 0};
    auto feats = synthetic_features({500});
    auto obs = generate_observed(feats, truth);
    auto s = regression::build_samples(feats, obs, 0);

    PowerLawParams init = truth;
    init.a *= 2.0;
    init.b *= 1.2;
    init.c *= 0.5;
    auto rep = regression::fit_lm(s, init, LmOptions{});
    CHECK(rep.converged);
    CHECK(rep.params.a == doctest::Approx(truth.a).epsilon(1e-6));
    CHECK(rep.params.b == doctest::Approx(truth.b).epsilon(1e-6));
    CHECK(rep.params.c == doctest::Approx(truth.c).epsilon(1e-6));
    CHECK(rep.sse_final <= rep.sse_initial);
}

TEST_CASE("fit_lm at the true optimum is a fixed point") {
    PowerLawParams truth{1e-3, 2.0, -0.4, 0};
    auto feats = synthetic_features({200});
    auto obs = generate_observed(feats, truth);
    auto s = regression::build_samples(feats, obs, 0);
    auto rep = regression::fit_lm(s, truth, LmOptions{});
    CHECK(rep.converged);
    CHECK(rep.iterations <= 2);
    CHECK(rep.params.a == doctest::Approx(truth.a).epsilon(1e-12));
    CHECK(rep.params.b == doctest::Approx(truth.b).epsilon(1e-12));
    CHECK(rep.params.c == doctest::Approx(truth.c).epsilon(1e-12));
}

TEST_CASE("fit_lm with Gaussian noise lands within 3 estimated standard errors") {
    // sigma = 5 ppm, 1e4 samples, a few fixed seeds.
    PowerLawParams truth{2.0e-4, 2.1, -0.55, 0};
    for (unsigned seed : {11u, 12u, 13u}) {
        auto feats = synthetic_features({10000}, seed);
        auto obs = generate_observed(feats, truth, 5.0, seed + 100);
        auto s = regression::build_samples(feats, obs, 0);
        auto init = regression::log_ols_init(s, LmOptions{});
        auto rep = regression::fit_lm(s, init, LmOptions{});

        // Standard errors from (J^T J)^{-1} sigma^2 at the optimum.
        auto eq = kernels::lm_accumulate(s.size(), s.ln_t_adiab.data(), s.ln_t_comb.data(),
                                         s.y.data(), rep.params.a, rep.params.b, rep.params.c);
        double sigma2 = rep.sse_final / static_cast<double>(s.size() - 3);
        // Invert the symmetric 3x3 J^T J.
        double m[3][3] = {{eq.jtj[0], eq.jtj[1], eq.jtj[2]},
                          {eq.jtj[1], eq.jtj[3], eq.jtj[4]},
                          {eq.jtj[2], eq.jtj[4], eq.jtj[5]}};
        double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        double inv00 = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
        double inv11 = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
        double inv22 = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
        double se_a = std::sqrt(sigma2 * inv00);
        double se_b = std::sqrt(sigma2 * inv11);
        double se_c = std::sqrt(sigma2 * inv22);

        CHECK(std::fabs(rep.params.a - truth.a) <= 3.0 * se_a);
        CHECK(std::fabs(rep.params.b - truth.b) <= 3.0 * se_b);
        CHECK(std::fabs(rep.params.c - truth.c) <= 3.0 * se_c);
    }
}

TEST_CASE("analytic Jacobian matches central finite differences") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> ua(1e-5, 10.0);
    std::uniform_real_distribution<double> ubc(-2.5, 2.5);
    auto feats = synthetic_features({40});
    regression::SeriesPerRun obs = {std::vector<double>(40, 100.0)};
    auto s = regression::build_samples(feats, obs, 0);

    // 4 parameter points x 40 samples x 3 params = 480 randomized checks.
    for (int rep = 0; rep < 4; ++rep) {
        double a = ua(rng), b = ubc(rng), c = ubc(rng);
        for (std::size_t i = 0; i < s.size(); ++i) {
            double lt = s.ln_t_adiab[i];
            double lc = s.ln_t_comb[i];
            double e = std::exp(b * lt + c * lc);
            double m = a * e;
            double jac[3] = {e, m * lt, m * lc};

            auto model = [&](double aa, double bb, double cc) {
                return aa * std::exp(bb * lt + cc * lc);
            };
            double theta[3] = {a, b, c};
            for (int p = 0; p < 3; ++p) {
                double h = 1e-6 * std::max(std::fabs(theta[p]), 1e-3);
                double tp[3] = {a, b, c}, tm[3] = {a, b, c};
                tp[p] += h;
                tm[p] -= h;
                double fd = (model(tp[0], tp[1], tp[2]) - model(tm[0], tm[1], tm[2])) / (2.0 * h);
                double denom = std::max(std::fabs(jac[p]), 1e-8 * std::fabs(m) + 1e-300);
                CHECK(std::fabs(fd - jac[p]) / denom <= 1e-6);
            }
        }
    }
}

TEST_CASE("accepted LM steps never increase the SSE") {
    PowerLawParams truth{3e-4, 2.0, -0.5, 0};
    auto feats = synthetic_features({400}, 31);
    auto obs = generate_observed(feats, truth, 25.0, 32);
    auto s = regression::build_samples(feats, obs, 0);
    PowerLawParams init{1.0, 0.1, 0.1, 0};
    auto rep = regression::fit_lm(s, init, LmOptions{});
    REQUIRE(!rep.accepted_sse_trace.empty());
    double prev = rep.sse_initial;
    for (double v : rep.accepted_sse_trace) {
        CHECK(v <= prev);
        prev = v;
    }
    CHECK(rep.sse_final == rep.accepted_sse_trace.back());
}

TEST_CASE("fit_lm is invariant to sample order") {
    PowerLawParams truth{2e-4, 2.3, -0.4, 0};
    auto feats = synthetic_features({300}, 41);
    auto obs = generate_observed(feats, truth, 10.0, 42);
    auto s = regression::build_samples(feats, obs, 0);
    auto init = regression::log_ols_init(s, LmOptions{});
    auto rep1 = regression::fit_lm(s, init, LmOptions{});

    SampleSet shuffled = s;
    std::vector<std::size_t> idx(s.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), std::mt19937_64(7));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        shuffled.ln_t_adiab[i] = s.ln_t_adiab[idx[i]];
        shuffled.ln_t_comb[i] = s.ln_t_comb[idx[i]];
        shuffled.y[i] = s.y[idx[i]];
    }
    auto init2 = regression::log_ols_init(shuffled, LmOptions{});
    auto rep2 = regression::fit_lm(shuffled, init2, LmOptions{});
    CHECK(rep2.params.a == doctest::Approx(rep1.params.a).epsilon(1e-12));
    CHECK(rep2.params.b == doctest::Approx(rep1.params.b).epsilon(1e-12));
    CHECK(rep2.params.c == doctest::Approx(rep1.params.c).epsilon(1e-12));
}

TEST_CASE("predict") {
    SUBCASE("b=c=0 is the constant series a") {
        auto feats = synthetic_features({6});
        PowerLawParams p{42.0, 0.0, 0.0, 0};
        auto pred = regression::predict(p, feats);
        for (double v : pred[0]) CHECK(v == 42.0);
    }
    SUBCASE("params (1,1,1) on T=1000, t=0.002 gives 2.0") {
        physics::FeatureSeries feats(1);
        feats[0].run_id = "r";
        feats[0].t_adiab = {1000.0};
        feats[0].t_comb = {0.002};
        feats[0].x_o2 = {0.21};
        feats[0].valid = {true};
        PowerLawParams p{1.0, 1.0, 1.0, 0};
        auto pred = regression::predict(p, feats);
        CHECK(pred[0][0] == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("matches by-hand evaluation on random samples, aligned at k+delta") {
        auto feats = synthetic_features({20}, 51);
        PowerLawParams p{3.0e-4, 2.1, -0.7, 2};
        auto pred = regression::predict(p, feats);
        std::mt19937_64 rng(52);
        for (int i = 0; i < 5; ++i) {
            std::size_t k = rng() % 18;
            double expect =
                p.a * std::pow(feats[0].t_adiab[k], p.b) * std::pow(feats[0].t_comb[k], p.c);
            CHECK(pred[0][k + 2] == doctest::Approx(expect).epsilon(1e-12));
        }
        CHECK(std::isnan(pred[0][0]));
        CHECK(std::isnan(pred[0][1]));
        CHECK(pred[0].size() == 20);
    }
    SUBCASE("positivity: a>0 and valid features give positive predictions") {
        auto feats = synthetic_features({50}, 53);
        PowerLawParams p{1e-4, 2.0, -0.5, 1};
        auto pred = regression::predict(p, feats);
        for (std::size_t k = 1; k < 50; ++k) CHECK(pred[0][k] > 0.0);
    }
}

TEST_CASE("compute_metrics") {
    SUBCASE("perfect prediction") {
        std::vector<double> v = {1.0, 2.0, 3.0};
        auto m = regression::compute_metrics_flat(v, v);
        CHECK(m.rmse == 0.0);
        CHECK(m.mae == 0.0);
        CHECK(m.r2 == 1.0);
        CHECK(m.n == 3);
    }
    SUBCASE("hand case obs=[0,2], pred=[1,1]") {
        auto m = regression::compute_metrics_flat({1.0, 1.0}, {0.0, 2.0});
        CHECK(m.rmse == doctest::Approx(1.0));
        CHECK(m.mae == doctest::Approx(1.0));
        CHECK(m.r2 == doctest::Approx(0.0));
    }
    SUBCASE("constant observations: r2 sentinel") {
        auto m = regression::compute_metrics_flat({1.0, 2.0}, {5.0, 5.0});
        CHECK(std::isinf(m.r2));
        CHECK(m.r2 < 0.0);
        auto exact = regression::compute_metrics_flat({5.0, 5.0}, {5.0, 5.0});
        CHECK(exact.r2 == 1.0);
    }
    SUBCASE("zero overlap is an error") {
        std::vector<double> nans(3, std::numeric_limits<double>::quiet_NaN());
        std::vector<double> obs = {1.0, 2.0, 3.0};
        CHECK_THROWS_AS(regression::compute_metrics_flat(nans, obs), PipelineError);
    }
    SUBCASE("rmse >= mae and r2 <= 1 on random pairs") {
        std::mt19937_64 rng(61);
        std::uniform_real_distribution<double> u(-100.0, 1500.0);
        for (int rep = 0; rep < 200; ++rep) {
            std::size_t n = 2 + rng() % 40;
            std::vector<double> p(n), o(n);
            for (std::size_t i = 0; i < n; ++i) {
                p[i] = u(rng);
                o[i] = u(rng);
            }
            auto m = regression::compute_metrics_flat(p, o);
            CHECK(m.rmse >= m.mae);
            CHECK(m.mae >= 0.0);
            CHECK(m.r2 <= 1.0);
        }
    }
}

TEST_CASE("select_delta") {
    SUBCASE("single candidate 0 returns 0") {
        PowerLawParams truth{2e-4, 2.0, -0.5, 0};
        auto feats = synthetic_features({100});
        auto obs = generate_observed(feats, truth);
        auto sel = regression::select_delta(feats, obs, {0}, LmOptions{});
        CHECK(sel.delta == 0);
    }
    SUBCASE("data generated at lag 1 selects 1; lag 3 selects 3 with a strict minimum") {
        for (int lag : {1, 3}) {
            PowerLawParams truth{2e-4, 2.0, -0.5, lag};
            auto feats = synthetic_features({400}, 71 + lag);
            auto obs = generate_observed(feats, truth);
            auto sel = regression::select_delta(feats, obs, {0, 1, 2, 3, 4, 5}, LmOptions{});
            CHECK(sel.delta == lag);
            double best = 0.0;
            for (const auto& c : sel.candidates) {
                if (c.delta == lag) best = c.train_rmse;
            }
            for (const auto& c : sel.candidates) {
                if (c.delta != lag) CHECK(c.train_rmse > best);
            }
        }
    }
}
