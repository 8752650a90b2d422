#include "noxpred/mining.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "noxpred/common.hpp"
#include "noxpred/kernels.hpp"

namespace noxpred::mining {

int AttributeBins::level(double v) const {
    if (degenerate || !std::isfinite(v)) return 0;
    const double lo = edges.front();
    const double hi = edges.back();
    if (v <= lo) return 0;
    if (v >= hi) return kNumLevels - 1;
    int idx = static_cast<int>(std::floor((v - lo) / (hi - lo) * kNumLevels));
    return std::clamp(idx, 0, kNumLevels - 1);
}

int Discretizer::attribute_index(const std::string& name) const {
    for (std::size_t i = 0; i < bins.size(); ++i) {
        if (bins[i].attribute == name) return static_cast<int>(i);
    }
    return -1;
}

int SymbolTable::attribute_index(const std::string& name) const {
    for (std::size_t i = 0; i < attributes.size(); ++i) {
        if (attributes[i] == name) return static_cast<int>(i);
    }
    return -1;
}

void MinerConfig::check() const {
    if (!(min_supp > 0.0) || min_supp > 1.0) throw ConfigError("min_supp must be in (0, 1]");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (max_attributes < 1) throw ConfigError("max_attributes must be >= 1");
}

std::vector<std::string> default_mining_attributes() {
    return {"EngTq",
            "EGRkgph",
            obd::kColEngineSpeed,
            obd::kColIntakeAir,
            obd::kColFuel,
            obd::kColRailPressure,
            obd::kColIntakePressure,
            obd::kColIntakeTemp};
}

Discretizer fit_discretizer(const obd::ObdDataset& train,
                            const std::vector<std::string>& attributes) {
    std::vector<std::string> names = attributes;
    std::sort(names.begin(), names.end());
    names.erase(std::unique(names.begin(), names.end()), names.end());

    Discretizer disc;
    for (const auto& name : names) {
        bool present = false;
        double lo = 0.0, hi = 0.0;
        double first_value = 0.0;
        std::size_t n_finite = 0;
        bool distinct = false;
        for (const auto& run : train.runs) {
            const auto* col = obd::attribute_column(run, name);
            if (col == nullptr) continue;
            present = true;
            for (double v : *col) {
                if (!std::isfinite(v)) continue;
                if (n_finite == 0) {
                    lo = hi = first_value = v;
                } else {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                    if (v != first_value) distinct = true;
                }
                ++n_finite;
            }
        }
        if (!present) {
            throw ConfigError("mining attribute '" + name + "' is absent from the dataset");
        }

        AttributeBins bins;
        bins.attribute = name;
        bins.edges.resize(kNumLevels + 1);
        if (n_finite < 2 || !distinct) {
            // Single-bin fallback: everything maps to level 0.
            bins.degenerate = true;
            double base = n_finite > 0 ? first_value : 0.0;
            for (int i = 0; i <= kNumLevels; ++i) {
                bins.edges[i] = base + static_cast<double>(i);
            }
        } else {
            const double width = (hi - lo) / kNumLevels;
            for (int i = 0; i <= kNumLevels; ++i) {
                bins.edges[i] = i == kNumLevels ? hi : lo + width * i;
            }
        }
        disc.bins.push_back(std::move(bins));
    }
    return disc;
}

SymbolTable symbolize(const obd::ObdDataset& dataset, const Discretizer& disc) {
    SymbolTable table;
    for (const auto& bins : disc.bins) table.attributes.push_back(bins.attribute);

    for (const auto& run : dataset.runs) {
        table.run_ids.push_back(run.run_id);
        std::vector<std::vector<std::int8_t>> per_attr;
        per_attr.reserve(disc.bins.size());
        for (const auto& bins : disc.bins) {
            const auto* col = obd::attribute_column(run, bins.attribute);
            std::vector<std::int8_t> lv(run.size(), kAbsentLevel);
            if (col != nullptr) {
                for (std::size_t i = 0; i < col->size(); ++i) {
                    if (std::isfinite((*col)[i])) {
                        lv[i] = static_cast<std::int8_t>(bins.level((*col)[i]));
                    }
                }
            }
            per_attr.push_back(std::move(lv));
        }
        table.levels.push_back(std::move(per_attr));
    }
    return table;
}

namespace {

// Candidate key: items sorted by attribute index, flattened as
// (attr, lvl_0 .. lvl_{L-1}) per item.
using CandKey = std::vector<std::int16_t>;

struct CandStats {
    std::int64_t match_all = 0;        // W_P
    std::int64_t match_divergent = 0;  // D_P
};

struct WindowCounts {
    std::vector<std::size_t> per_run;  // stride-1 windows per run
    std::int64_t total = 0;            // W
};

WindowCounts count_windows(const SymbolTable& symbols, std::size_t L) {
    WindowCounts wc;
    for (std::size_t r = 0; r < symbols.levels.size(); ++r) {
        std::size_t n = symbols.run_length(r);
        std::size_t w = n >= L ? n - L + 1 : 0;
        wc.per_run.push_back(w);
        wc.total += static_cast<std::int64_t>(w);
    }
    return wc;
}

std::vector<std::vector<std::uint8_t>> divergent_masks(
    const std::vector<divergence::DivergentWindow>& windows, const WindowCounts& wc) {
    std::vector<std::vector<std::uint8_t>> masks(wc.per_run.size());
    for (std::size_t r = 0; r < wc.per_run.size(); ++r) masks[r].assign(wc.per_run[r], 0);
    for (const auto& w : windows) {
        if (w.run_index >= masks.size() || w.start_index >= masks[w.run_index].size()) {
            throw PipelineError("divergent window out of range of the symbol table");
        }
        masks[w.run_index][w.start_index] = 1;
    }
    return masks;
}

CandStats evaluate_candidate(const CandKey& key, std::size_t L, const SymbolTable& symbols,
                             const std::vector<std::vector<std::uint8_t>>& div_masks,
                             const WindowCounts& wc) {
    CandStats st;
    const std::size_t n_items = key.size() / (L + 1);
    std::vector<std::uint8_t> mask, item;
    std::vector<std::int8_t> pat(L);
    for (std::size_t r = 0; r < wc.per_run.size(); ++r) {
        const std::size_t w = wc.per_run[r];
        if (w == 0) continue;
        mask.assign(w, 1);
        item.resize(w);
        const std::size_t n = symbols.run_length(r);
        for (std::size_t it = 0; it < n_items; ++it) {
            const auto attr = static_cast<std::size_t>(key[it * (L + 1)]);
            for (std::size_t j = 0; j < L; ++j) {
                pat[j] = static_cast<std::int8_t>(key[it * (L + 1) + 1 + j]);
            }
            kernels::match_sequence(n, symbols.levels[r][attr].data(), L, pat.data(),
                                    item.data());
            for (std::size_t s = 0; s < w; ++s) mask[s] &= item[s];
        }
        for (std::size_t s = 0; s < w; ++s) {
            st.match_all += mask[s];
            st.match_divergent += mask[s] & div_masks[r][s];
        }
    }
    return st;
}

CoOccurrencePattern to_pattern(const CandKey& key, std::size_t L, const SymbolTable& symbols,
                               const CandStats& st, std::int64_t total_windows,
                               std::int64_t total_divergent) {
    CoOccurrencePattern p;
    const std::size_t n_items = key.size() / (L + 1);
    for (std::size_t it = 0; it < n_items; ++it) {
        PatternItem item;
        item.attribute = symbols.attributes[static_cast<std::size_t>(key[it * (L + 1)])];
        for (std::size_t j = 0; j < L; ++j) {
            item.levels.push_back(static_cast<std::int8_t>(key[it * (L + 1) + 1 + j]));
        }
        p.items.push_back(std::move(item));
    }
    p.occurrence_count = st.match_divergent;
    p.support = static_cast<double>(st.match_divergent) / static_cast<double>(total_windows);
    p.cross_k_ratio =
        st.match_all == 0
            ? 0.0
            : (static_cast<double>(st.match_divergent) / static_cast<double>(total_divergent)) /
                  (static_cast<double>(st.match_all) / static_cast<double>(total_windows));
    return p;
}

bool items_lex_less(const std::vector<PatternItem>& a, const std::vector<PatternItem>& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i].attribute != b[i].attribute) return a[i].attribute < b[i].attribute;
        if (a[i].levels != b[i].levels) return a[i].levels < b[i].levels;
    }
    return a.size() < b.size();
}

bool rank_less(const CoOccurrencePattern& a, const CoOccurrencePattern& b) {
    if (a.cross_k_ratio != b.cross_k_ratio) return a.cross_k_ratio > b.cross_k_ratio;
    if (a.support != b.support) return a.support > b.support;
    return items_lex_less(a.items, b.items);
}

}  // namespace

std::vector<CoOccurrencePattern> mine_patterns(
    const SymbolTable& symbols, const std::vector<divergence::DivergentWindow>& windows,
    const MinerConfig& config, std::size_t window_len) {
    config.check();
    if (window_len == 0) throw ConfigError("mine_patterns: window length must be >= 1");
    const std::size_t L = window_len;

    if (windows.empty()) {
        log_warn("mine_patterns: no divergent windows; nothing to mine");
        return {};
    }

    const WindowCounts wc = count_windows(symbols, L);
    if (wc.total == 0) throw PipelineError("mine_patterns: every run is shorter than L");
    const auto div_masks = divergent_masks(windows, wc);
    std::int64_t total_divergent = 0;
    for (const auto& m : div_masks) {
        for (std::uint8_t v : m) total_divergent += v;
    }

    const std::size_t n_attrs = symbols.attributes.size();

    // Level 1: every (attribute, exact L-sequence) observed inside a
    // divergent window.
    std::set<CandKey> level_candidates;
    for (std::size_t r = 0; r < div_masks.size(); ++r) {
        for (std::size_t s = 0; s < div_masks[r].size(); ++s) {
            if (!div_masks[r][s]) continue;
            for (std::size_t a = 0; a < n_attrs; ++a) {
                CandKey key;
                key.push_back(static_cast<std::int16_t>(a));
                bool defined = true;
                for (std::size_t j = 0; j < L; ++j) {
                    std::int8_t lv = symbols.levels[r][a][s + j];
                    if (lv < 0) {
                        defined = false;
                        break;
                    }
                    key.push_back(lv);
                }
                if (defined) level_candidates.insert(std::move(key));
            }
        }
    }

    std::map<CandKey, CandStats> frequent;  // all frequent patterns, all sizes
    std::vector<CandKey> current_level;     // frequent patterns of the current size

    for (std::size_t size = 1; size <= config.max_attributes; ++size) {
        std::vector<CandKey> next;
        for (const auto& key : level_candidates) {
            CandStats st = evaluate_candidate(key, L, symbols, div_masks, wc);
            double support = static_cast<double>(st.match_divergent) /
                             static_cast<double>(wc.total);
            if (support >= config.min_supp) {
                frequent.emplace(key, st);
                next.push_back(key);
            }
        }
        current_level = std::move(next);
        if (size == config.max_attributes || current_level.empty()) break;

        // Apriori join: combine patterns sharing all but the last item.
        const std::size_t stride = L + 1;
        level_candidates.clear();
        for (std::size_t i = 0; i < current_level.size(); ++i) {
            for (std::size_t j = i + 1; j < current_level.size(); ++j) {
                const CandKey& p = current_level[i];
                const CandKey& q = current_level[j];
                if (!std::equal(p.begin(), p.end() - stride, q.begin())) continue;
                const std::int16_t attr_p = p[p.size() - stride];
                const std::int16_t attr_q = q[q.size() - stride];
                if (attr_p == attr_q) continue;  // same attribute, different sequences
                CandKey joined = p;
                if (attr_p < attr_q) {
                    joined.insert(joined.end(), q.end() - stride, q.end());
                } else {
                    joined.erase(joined.end() - stride, joined.end());
                    joined.insert(joined.end(), q.end() - stride, q.end());
                    joined.insert(joined.end(), p.end() - stride, p.end());
                }
                // Prune: all size-m subpatterns must themselves be frequent.
                bool all_frequent = true;
                const std::size_t n_items = joined.size() / stride;
                for (std::size_t drop = 0; drop < n_items && all_frequent; ++drop) {
                    CandKey sub;
                    sub.reserve(joined.size() - stride);
                    for (std::size_t it = 0; it < n_items; ++it) {
                        if (it == drop) continue;
                        sub.insert(sub.end(), joined.begin() + it * stride,
                                   joined.begin() + (it + 1) * stride);
                    }
                    all_frequent = frequent.count(sub) > 0;
                }
                if (all_frequent) level_candidates.insert(std::move(joined));
            }
        }
    }

    std::vector<CoOccurrencePattern> out;
    for (const auto& [key, st] : frequent) {
        CoOccurrencePattern p = to_pattern(key, L, symbols, st, wc.total, total_divergent);
        if (p.cross_k_ratio >= config.epsilon) out.push_back(std::move(p));
    }
    std::sort(out.begin(), out.end(), rank_less);
    return out;
}

double cross_k_ratio(const CoOccurrencePattern& pattern, const SymbolTable& symbols,
                     const std::vector<divergence::DivergentWindow>& windows,
                     std::size_t window_len) {
    if (windows.empty()) {
        throw PipelineError("cross_k_ratio: no divergent windows");
    }
    if (pattern.items.empty()) throw ConfigError("cross_k_ratio: pattern has no items");
    const std::size_t L = window_len;
    for (const auto& item : pattern.items) {
        if (item.levels.size() != L) {
            throw ConfigError("cross_k_ratio: item sequence length does not match L");
        }
    }

    const WindowCounts wc = count_windows(symbols, L);
    if (wc.total == 0) throw PipelineError("cross_k_ratio: every run is shorter than L");
    const auto div_masks = divergent_masks(windows, wc);

    CandKey key;
    for (const auto& item : pattern.items) {
        int attr = symbols.attribute_index(item.attribute);
        if (attr < 0) {
            throw ConfigError("cross_k_ratio: attribute '" + item.attribute +
                              "' is not in the symbol table");
        }
        key.push_back(static_cast<std::int16_t>(attr));
        for (std::int8_t lv : item.levels) key.push_back(lv);
    }

    std::int64_t total_divergent = 0;
    for (const auto& m : div_masks) {
        for (std::uint8_t v : m) total_divergent += v;
    }
    CandStats st = evaluate_candidate(key, L, symbols, div_masks, wc);
    if (st.match_all == 0) return 0.0;
    return (static_cast<double>(st.match_divergent) / static_cast<double>(total_divergent)) /
           (static_cast<double>(st.match_all) / static_cast<double>(wc.total));
}

std::vector<CoOccurrencePattern> select_top_n(const std::vector<CoOccurrencePattern>& patterns,
                                              std::size_t n) {
    std::vector<CoOccurrencePattern> picked;
    for (const auto& cand : patterns) {
        if (picked.size() >= n) break;
        bool subsumed = false;
        for (const auto& sel : picked) {
            // cand extends sel iff every item of sel appears in cand verbatim.
            bool extends = true;
            for (const auto& item : sel.items) {
                bool found = false;
                for (const auto& ci : cand.items) {
                    if (ci.attribute == item.attribute && ci.levels == item.levels) {
                        found = true;
                        break;
                    }
                }
                if (!found) {
                    extends = false;
                    break;
                }
            }
            if (extends && cand.items.size() > sel.items.size()) {
                subsumed = true;
                break;
            }
        }
        if (!subsumed) picked.push_back(cand);
    }
    if (picked.size() < n) {
        log_warn("select_top_n: only " + std::to_string(picked.size()) + " of " +
                 std::to_string(n) + " requested patterns available");
    }
    return picked;
}

}  // namespace noxpred::mining
