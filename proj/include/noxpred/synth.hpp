#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "noxpred/obd.hpp"
#include "noxpred/physics.hpp"
#include "noxpred/regression.hpp"

namespace noxpred::synth {

// One planted operating regime: attribute distributions plus the
// power-law coefficients that generate its NOx.
struct RegimeSpec {
    std::string name;
    regression::PowerLawParams params;           // ground truth (a, b, c)
    std::map<std::string, double> attribute_means;
    std::map<std::string, double> attribute_stddevs;  // missing -> 0
    double mean_dwell = 1.0;                     // seconds (>= 1)
};

struct SynthConfig {
    std::vector<RegimeSpec> regimes;
    std::vector<std::vector<double>> transition;  // row-stochastic
    std::size_t runs = 1;
    std::size_t run_length = 100;  // samples per run
    std::size_t routes = 3;        // run i -> route (i % routes)
    double noise_stddev = 0.0;     // ppm
    int delta = 1;                 // generation lag in samples
    double physics_mismatch = 0.0; // fractional perturbation of generator constants
    double sample_period = 1.0;    // seconds
    std::uint64_t seed = 0;
    physics::PhysicsConstants constants;

    void check() const;
};

struct GroundTruth {
    // regime index per timestep, aligned with the dataset runs
    std::vector<std::vector<std::size_t>> labels;
};

// Draws regime sequences (Markov chain with geometric dwell composed
// with the transition matrix), samples attributes as truncated normals,
// and produces nox(k + delta) = a_r T_adiab(k)^b_r t_comb(k)^c_r + noise
// through the same feature computation the fit uses. Deterministic for a
// fixed seed; run i uses derived seed (seed + i).
std::pair<obd::ObdDataset, GroundTruth> generate(const SynthConfig& config);

// Writes the sidecar labels CSV (run_id, t_s, regime_index, regime_name).
void write_labels_csv(const obd::ObdDataset& dataset, const GroundTruth& truth,
                      const SynthConfig& config, const std::string& path);

// The per-step transition matrix actually realized by the dwell
// composition: stay with probability 1 - 1/dwell, otherwise draw from
// the configured row.
std::vector<std::vector<double>> effective_transition(const SynthConfig& config);

}  // namespace noxpred::synth
