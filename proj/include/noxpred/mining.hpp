#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "noxpred/divergence.hpp"
#include "noxpred/obd.hpp"

namespace noxpred::mining {

inline constexpr int kNumLevels = 11;  // discrete levels 0..10
inline constexpr std::int8_t kAbsentLevel = -1;

// Equal-width 11-level binning over the training range of one attribute.
struct AttributeBins {
    std::string attribute;
    std::vector<double> edges;  // 12 strictly ascending values
    bool degenerate = false;    // constant training attribute -> level 0

    int level(double v) const;
};

struct Discretizer {
    std::vector<AttributeBins> bins;  // sorted by attribute name

    int attribute_index(const std::string& name) const;  // -1 when unknown
};

// Integer level sequences per run and attribute; kAbsentLevel marks
// absent raw values.
struct SymbolTable {
    std::vector<std::string> attributes;  // same order as Discretizer::bins
    std::vector<std::string> run_ids;
    std::vector<std::vector<std::vector<std::int8_t>>> levels;  // [run][attr][t]

    int attribute_index(const std::string& name) const;
    std::size_t run_length(std::size_t run) const { return levels[run].empty() ? 0 : levels[run][0].size(); }
};

struct PatternItem {
    std::string attribute;
    std::vector<std::int8_t> levels;  // exact sequence of length L

    bool operator==(const PatternItem&) const = default;
};

struct CoOccurrencePattern {
    std::vector<PatternItem> items;  // sorted by attribute name
    double support = 0.0;            // divergent occurrences / all stride-1 windows
    double cross_k_ratio = 0.0;
    std::int64_t occurrence_count = 0;  // divergent windows containing the pattern
    std::string scenario_label;         // human annotation slot, never machine-filled
};

struct MinerConfig {
    double min_supp = 0.003;
    double epsilon = 2.0;
    std::size_t max_attributes = 3;
    std::vector<std::string> attributes;  // empty -> default_mining_attributes()

    void check() const;
};

std::vector<std::string> default_mining_attributes();

// 11 equal-width bins per attribute over [train_min, train_max]. Values
// outside the range clamp to levels 0/10 at apply time. Throws
// ConfigError when an attribute exists in no run.
Discretizer fit_discretizer(const obd::ObdDataset& train,
                            const std::vector<std::string>& attributes);

SymbolTable symbolize(const obd::ObdDataset& dataset, const Discretizer& disc);

// Apriori-style levelwise search over per-attribute exact level sequences
// observed inside divergent windows, scored by the temporal cross-K
// ratio. Returns patterns with cross_k_ratio >= epsilon sorted by
// (cross_k_ratio desc, support desc, items lexicographically asc).
std::vector<CoOccurrencePattern> mine_patterns(
    const SymbolTable& symbols, const std::vector<divergence::DivergentWindow>& windows,
    const MinerConfig& config, std::size_t window_len);

// (density of matching windows among divergent windows) /
// (density of matching windows among all windows); 0 when the pattern
// matches nothing. Throws PipelineError when there is no divergent window.
double cross_k_ratio(const CoOccurrencePattern& pattern, const SymbolTable& symbols,
                     const std::vector<divergence::DivergentWindow>& windows,
                     std::size_t window_len);

// First n patterns in rank order, skipping any pattern whose items extend
// an already selected pattern (same sequences on a superset of
// attributes); such a pattern could never match first under priority
// routing.
std::vector<CoOccurrencePattern> select_top_n(const std::vector<CoOccurrencePattern>& patterns,
                                              std::size_t n);

}  // namespace noxpred::mining
