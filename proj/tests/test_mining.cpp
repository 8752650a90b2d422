#include <doctest.h>

#include <random>

#include "noxpred/common.hpp"
#include "noxpred/mining.hpp"
#include "oracles.hpp"

using namespace noxpred;

namespace {

obd::ObdDataset tiny_dataset(const std::vector<double>& engtq) {
    obd::ObdDataset ds;
    obd::Run run;
    run.run_id = "r1";
    run.route_id = "a";
    for (std::size_t i = 0; i < engtq.size(); ++i) {
        run.t.push_back(static_cast<double>(i));
        run.intake_air_flow.push_back(400.0);
        run.fuel_rate.push_back(10.0);
        run.rail_pressure.push_back(1e8);
        run.intake_pressure.push_back(2e5);
        run.intake_temp.push_back(300.0);
        run.engine_speed.push_back(1200.0);
        run.nox.push_back(100.0);
    }
    run.extras["EngTq"] = engtq;
    ds.runs.push_back(std::move(run));
    return ds;
}

}  // namespace

TEST_CASE("fit_discretizer") {
    SUBCASE("uniform values over [0,11) hit all 11 levels") {
        std::vector<double> v;
        for (int i = 0; i < 110; ++i) v.push_back(i * 0.1);  // 0 .. 10.9
        auto ds = tiny_dataset(v);
        auto disc = mining::fit_discretizer(ds, {"EngTq"});
        REQUIRE(disc.bins.size() == 1);
        std::vector<int> hits(11, 0);
        for (double x : v) hits[disc.bins[0].level(x)]++;
        for (int h : hits) CHECK(h == 10);
    }
    SUBCASE("constant attribute maps everything to level 0") {
        auto ds = tiny_dataset(std::vector<double>(20, 5.0));
        auto disc = mining::fit_discretizer(ds, {"EngTq"});
        CHECK(disc.bins[0].degenerate);
        CHECK(disc.bins[0].level(5.0) == 0);
        CHECK(disc.bins[0].level(1e9) == 0);
        // Edges stay strictly ascending even in the fallback.
        for (std::size_t i = 1; i < disc.bins[0].edges.size(); ++i) {
            CHECK(disc.bins[0].edges[i] > disc.bins[0].edges[i - 1]);
        }
    }
    SUBCASE("apply-time values outside the training range clamp to 0/10") {
        std::vector<double> v;
        for (int i = 0; i <= 10; ++i) v.push_back(static_cast<double>(i));
        auto ds = tiny_dataset(v);
        auto disc = mining::fit_discretizer(ds, {"EngTq"});
        CHECK(disc.bins[0].level(-100.0) == 0);
        CHECK(disc.bins[0].level(100.0) == 10);
        CHECK(disc.bins[0].level(10.0) == 10);  // at the max
    }
    SUBCASE("absent attribute is a named error") {
        auto ds = tiny_dataset({1.0, 2.0});
        try {
            mining::fit_discretizer(ds, {"NoSuchColumn"});
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("NoSuchColumn") != std::string::npos);
        }
    }
    SUBCASE("level is monotone in the value") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> u(-3.0, 40.0);
        std::vector<double> v;
        for (int i = 0; i < 64; ++i) v.push_back(u(rng));
        auto ds = tiny_dataset(v);
        auto disc = mining::fit_discretizer(ds, {"EngTq"});
        for (int i = 0; i < 200; ++i) {
            double a = u(rng), b = u(rng);
            if (a > b) std::swap(a, b);
            CHECK(disc.bins[0].level(a) <= disc.bins[0].level(b));
        }
    }
}

TEST_CASE("symbolize") {
    SUBCASE("matches the scalar binning oracle on random values") {
        std::mt19937_64 rng(6);
        std::uniform_real_distribution<double> u(0.0, 100.0);
        std::vector<double> v(100);
        for (auto& x : v) x = u(rng);
        auto ds = tiny_dataset(v);
        auto disc = mining::fit_discretizer(ds, {"EngTq"});
        auto sym = mining::symbolize(ds, disc);
        REQUIRE(sym.attributes == std::vector<std::string>{"EngTq"});
        double lo = disc.bins[0].edges.front();
        double hi = disc.bins[0].edges.back();
        for (std::size_t i = 0; i < v.size(); ++i) {
            int expect = std::min(10, static_cast<int>((v[i] - lo) / (hi - lo) * 11.0));
            CHECK(sym.levels[0][0][i] == expect);
        }
    }
    SUBCASE("bin midpoints map to their own bin index") {
        std::vector<double> v;
        for (int i = 0; i <= 11; ++i) v.push_back(static_cast<double>(i));
        auto ds = tiny_dataset(v);
        auto disc = mining::fit_discretizer(ds, {"EngTq"});
        const auto& e = disc.bins[0].edges;
        for (int b = 0; b < 11; ++b) {
            CHECK(disc.bins[0].level(0.5 * (e[b] + e[b + 1])) == b);
        }
    }
    SUBCASE("absent raw values symbolize as absent") {
        std::vector<double> v = {1.0, std::numeric_limits<double>::quiet_NaN(), 3.0};
        auto ds = tiny_dataset(v);
        auto disc = mining::fit_discretizer(ds, {"EngTq"});
        auto sym = mining::symbolize(ds, disc);
        CHECK(sym.levels[0][0][1] == mining::kAbsentLevel);
    }
}

TEST_CASE("planted motif is mined with the expected cross-K ratio") {
    // Attribute X shows [10,10,10] exactly inside the divergent windows and
    // nowhere else. 100 steps, L=3.
    const std::size_t n = 100;
    mining::SymbolTable sym;
    sym.attributes = {"X"};
    sym.run_ids = {"r"};
    std::vector<std::int8_t> lv(n, 0);
    // Two divergent windows at starts 10 and 50.
    for (std::size_t s : {10u, 50u}) {
        lv[s] = lv[s + 1] = lv[s + 2] = 10;
    }
    sym.levels = {{lv}};

    std::vector<divergence::DivergentWindow> windows = {{"r", 0, 10, 12, 99.0},
                                                        {"r", 0, 50, 52, 99.0}};
    mining::MinerConfig cfg;
    cfg.min_supp = 0.01;
    cfg.epsilon = 2.0;
    auto patterns = mining::mine_patterns(sym, windows, cfg, 3);
    REQUIRE(!patterns.empty());
    const auto& top = patterns.front();
    REQUIRE(top.items.size() == 1);
    CHECK(top.items[0].attribute == "X");
    CHECK(top.items[0].levels == std::vector<std::int8_t>{10, 10, 10});
    CHECK(top.occurrence_count == 2);
    // Matches only the two divergent windows: (2/2) / (2/98) = 49.
    const double total = static_cast<double>(n - 3 + 1);
    CHECK(top.cross_k_ratio == doctest::Approx(total / 2.0));
    CHECK(top.support == doctest::Approx(2.0 / total));

    // And the standalone scorer agrees.
    CHECK(mining::cross_k_ratio(top, sym, windows, 3) == top.cross_k_ratio);
}

TEST_CASE("support ceiling: min_supp=1 excludes a pattern absent from one divergent window") {
    mining::SymbolTable sym;
    sym.attributes = {"X"};
    sym.run_ids = {"r"};
    // 5 steps -> 3 windows of L=3; make all windows divergent but give the
    // pattern content only to two of them.
    sym.levels = {{std::vector<std::int8_t>{1, 1, 1, 1, 2}}};
    std::vector<divergence::DivergentWindow> windows = {
        {"r", 0, 0, 2, 99.0}, {"r", 0, 1, 3, 99.0}, {"r", 0, 2, 4, 99.0}};
    mining::MinerConfig cfg;
    cfg.min_supp = 1.0;
    cfg.epsilon = 0.5;
    auto patterns = mining::mine_patterns(sym, windows, cfg, 3);
    CHECK(patterns.empty());
}

TEST_CASE("cross-K baseline: a pattern matching every window has ratio 1") {
    mining::SymbolTable sym;
    sym.attributes = {"X"};
    sym.run_ids = {"r"};
    sym.levels = {{std::vector<std::int8_t>(50, 7)}};
    std::vector<divergence::DivergentWindow> windows = {{"r", 0, 3, 5, 99.0},
                                                        {"r", 0, 20, 22, 99.0}};
    mining::CoOccurrencePattern p;
    p.items.push_back({"X", {7, 7, 7}});
    CHECK(mining::cross_k_ratio(p, sym, windows, 3) == doctest::Approx(1.0));

    // Concentration example: matching only divergent windows, which are 10%
    // of all windows, gives ratio 10.
    mining::SymbolTable sym2;
    sym2.attributes = {"X"};
    sym2.run_ids = {"r"};
    std::vector<std::int8_t> lv(22, 0);  // 20 windows at L=3
    lv[4] = lv[5] = lv[6] = 9;
    lv[11] = lv[12] = lv[13] = 9;
    sym2.levels = {{lv}};
    std::vector<divergence::DivergentWindow> div2 = {{"r", 0, 4, 6, 99.0}, {"r", 0, 11, 13, 99.0}};
    mining::CoOccurrencePattern p2;
    p2.items.push_back({"X", {9, 9, 9}});
    CHECK(mining::cross_k_ratio(p2, sym2, div2, 3) == doctest::Approx(10.0));

    CHECK_THROWS_AS(mining::cross_k_ratio(p2, sym2, {}, 3), PipelineError);
}

TEST_CASE("miner equals exhaustive enumeration on random instances") {
    std::mt19937_64 rng(777);
    int nonempty = 0;
    for (int rep = 0; rep < 120; ++rep) {
        auto inst = oracles::random_small_instance(rng);
        divergence::DivergenceConfig dcfg;
        dcfg.window_len_s = static_cast<double>(1 + rng() % 4);
        dcfg.summation_threshold = 5.0 + static_cast<double>(rng() % 30);
        const std::size_t L = divergence::window_samples(dcfg, 1.0);
        auto windows = divergence::find_divergent_windows(inst.errors, inst.run_ids, dcfg, 1.0);

        mining::MinerConfig mcfg;
        mcfg.min_supp = 0.002 + 0.01 * static_cast<double>(rng() % 5);
        mcfg.epsilon = 1.0 + 0.5 * static_cast<double>(rng() % 4);
        mcfg.max_attributes = 1 + rng() % 3;

        auto fast = mining::mine_patterns(inst.symbols, windows, mcfg, L);
        auto naive = oracles::mine_patterns_naive(inst.symbols, windows, mcfg, L);
        CHECK_MESSAGE(oracles::patterns_equal(fast, naive), "rep=", rep, " fast=", fast.size(),
                      " naive=", naive.size());
        if (!fast.empty()) ++nonempty;
    }
    CHECK(nonempty > 20);  // the generator must actually exercise the miner
}

TEST_CASE("top patterns take the shape of single-attribute triples and conjunctions") {
    // Three attributes hold constant levels inside the divergent blocks and
    // wander elsewhere: the miner reports the single triples plus their
    // higher-order conjunctions.
    std::mt19937_64 rng(404);
    const std::size_t n = 240;
    mining::SymbolTable sym;
    sym.attributes = {"EGRkgph", "EngTq", "engine_rpm"};
    sym.run_ids = {"r"};
    std::vector<std::vector<std::int8_t>> lv(3, std::vector<std::int8_t>(n));
    for (std::size_t k = 0; k < n; ++k) {
        for (int a = 0; a < 3; ++a) lv[a][k] = static_cast<std::int8_t>(rng() % 11);
    }
    std::vector<divergence::DivergentWindow> windows;
    for (std::size_t block : {40u, 120u, 200u}) {
        for (std::size_t k = block; k < block + 10; ++k) {
            lv[0][k] = 4;   // like a steady EGR level
            lv[1][k] = 10;  // high torque
            lv[2][k] = 2;   // low speed
        }
        for (std::size_t s = block; s + 3 <= block + 10; ++s) {
            windows.push_back({"r", 0, s, s + 2, 99.0});
        }
    }
    sym.levels = {lv};

    mining::MinerConfig cfg;
    cfg.min_supp = 0.003;
    cfg.epsilon = 2.0;
    cfg.max_attributes = 3;
    auto patterns = mining::mine_patterns(sym, windows, cfg, 3);

    bool has_single = false, has_pair = false, has_triple_conjunction = false;
    for (const auto& p : patterns) {
        if (p.items.size() == 1) has_single = true;
        if (p.items.size() == 2) has_pair = true;
        if (p.items.size() == 3) has_triple_conjunction = true;
    }
    CHECK(has_single);
    CHECK(has_pair);
    CHECK(has_triple_conjunction);

    // Priority selection keeps distinct shapes, not redundant extensions.
    auto top = mining::select_top_n(patterns, 4);
    REQUIRE(!top.empty());
    for (std::size_t i = 1; i < top.size(); ++i) {
        CHECK(!(top[i].items == top[0].items));
    }
}

TEST_CASE("support anti-monotonicity on attribute supersets") {
    std::mt19937_64 rng(31337);
    auto inst = oracles::random_small_instance(rng, 400, 3);
    divergence::DivergenceConfig dcfg;
    dcfg.summation_threshold = 12.0;
    auto windows = divergence::find_divergent_windows(inst.errors, inst.run_ids, dcfg, 1.0);
    mining::MinerConfig mcfg;
    mcfg.min_supp = 1e-6;
    mcfg.epsilon = 1e-9;  // keep everything; we only compare supports
    auto patterns = mining::mine_patterns(inst.symbols, windows, mcfg, 3);
    for (const auto& p : patterns) {
        for (const auto& q : patterns) {
            if (q.items.size() <= p.items.size()) continue;
            // p subset of q (same sequences on shared attributes)?
            bool subset = true;
            for (const auto& item : p.items) {
                bool found = false;
                for (const auto& qi : q.items) {
                    if (qi.attribute == item.attribute && qi.levels == item.levels) found = true;
                }
                if (!found) subset = false;
            }
            if (subset) CHECK(q.support <= p.support);
        }
    }
}

TEST_CASE("cross-K is invariant under proportional padding") {
    // Append non-divergent, non-matching padding so that matching and total
    // window counts scale together; the ratio must not move.
    mining::SymbolTable sym;
    sym.attributes = {"X"};
    sym.run_ids = {"r"};
    std::vector<std::int8_t> lv = {5, 5, 5, 0, 0, 5, 5, 5, 0, 0};  // 8 windows, 2 matching
    sym.levels = {{lv}};
    std::vector<divergence::DivergentWindow> windows = {{"r", 0, 0, 2, 9.0}};
    mining::CoOccurrencePattern p;
    p.items.push_back({"X", {5, 5, 5}});
    double before = mining::cross_k_ratio(p, sym, windows, 3);

    // Doubling: duplicate the run (same divergent density, same match density).
    mining::SymbolTable sym2 = sym;
    sym2.attributes = {"X"};
    sym2.run_ids = {"r", "r2"};
    sym2.levels.push_back(sym.levels[0]);
    std::vector<divergence::DivergentWindow> windows2 = windows;
    windows2.push_back({"r2", 1, 0, 2, 9.0});
    double after = mining::cross_k_ratio(p, sym2, windows2, 3);
    CHECK(after == doctest::Approx(before));
}

TEST_CASE("select_top_n") {
    auto mk = [](std::string attr, std::vector<std::int8_t> seq, double ck) {
        mining::CoOccurrencePattern p;
        p.items.push_back({std::move(attr), std::move(seq)});
        p.cross_k_ratio = ck;
        p.support = 0.1;
        return p;
    };
    SUBCASE("n = 0 is empty; n beyond the pool returns the pool") {
        std::vector<mining::CoOccurrencePattern> pats = {mk("A", {1, 1, 1}, 5.0)};
        CHECK(mining::select_top_n(pats, 0).empty());
        CHECK(mining::select_top_n(pats, 10).size() == 1);
    }
    SUBCASE("an attribute-superset duplicate of a selected pattern is skipped") {
        auto base = mk("A", {1, 1, 1}, 9.0);
        mining::CoOccurrencePattern super = base;
        super.items.push_back({"B", {2, 2, 2}});
        super.cross_k_ratio = 8.0;
        auto other = mk("C", {3, 3, 3}, 7.0);
        auto picked = mining::select_top_n({base, super, other}, 2);
        REQUIRE(picked.size() == 2);
        CHECK(picked[0].items[0].attribute == "A");
        CHECK(picked[1].items[0].attribute == "C");
    }
    SUBCASE("a subset (more general) pattern ranked lower is kept") {
        auto super = mk("A", {1, 1, 1}, 9.0);
        super.items.push_back({"B", {2, 2, 2}});
        auto sub = mk("A", {1, 1, 1}, 8.0);
        auto picked = mining::select_top_n({super, sub}, 2);
        CHECK(picked.size() == 2);
    }
}

TEST_CASE("mining ranking is deterministic under input permutation") {
    std::mt19937_64 rng(2222);
    auto inst = oracles::random_small_instance(rng, 300, 2);
    divergence::DivergenceConfig dcfg;
    dcfg.summation_threshold = 10.0;
    auto windows = divergence::find_divergent_windows(inst.errors, inst.run_ids, dcfg, 1.0);
    mining::MinerConfig mcfg;
    mcfg.min_supp = 0.001;
    mcfg.epsilon = 1.0;
    auto pats = mining::mine_patterns(inst.symbols, windows, mcfg, 3);
    auto shuffled = pats;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::sort(shuffled.begin(), shuffled.end(),
              [](const mining::CoOccurrencePattern& a, const mining::CoOccurrencePattern& b) {
                  if (a.cross_k_ratio != b.cross_k_ratio) return a.cross_k_ratio > b.cross_k_ratio;
                  if (a.support != b.support) return a.support > b.support;
                  const std::size_t n = std::min(a.items.size(), b.items.size());
                  for (std::size_t i = 0; i < n; ++i) {
                      if (a.items[i].attribute != b.items[i].attribute) {
                          return a.items[i].attribute < b.items[i].attribute;
                      }
                      if (a.items[i].levels != b.items[i].levels) {
                          return a.items[i].levels < b.items[i].levels;
                      }
                  }
                  return a.items.size() < b.items.size();
              });
    auto sel1 = mining::select_top_n(pats, 4);
    auto sel2 = mining::select_top_n(shuffled, 4);
    CHECK(oracles::patterns_equal(sel1, sel2));
}
