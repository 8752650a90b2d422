#pragma once

#include <string>
#include <vector>

#include "noxpred/obd.hpp"

namespace noxpred::physics {

// Low-order combustion constants. Defaults are documented stand-ins for a
// generic 6-cylinder diesel; every value is config-overridable.
struct PhysicsConstants {
    double compression_ratio = 17.0;
    double gamma = 1.35;
    double lhv_fuel = 42.8e6;          // J/kg
    double cp_charge = 1200.0;         // J/(kg K)
    double afr_stoich = 14.5;
    double n_cylinders = 6.0;
    double nozzle_area_total = 1.0e-7; // m^2
    double discharge_coeff = 0.70;
    double fuel_density = 840.0;       // kg/m^3
    double ambient_o2_fraction = 0.21;
    double eps_delta_p = 1.0e4;        // Pa floor on rail - intake pressure

    void check() const;  // throws ConfigError on invalid values
};

// Per-timestep derived quantities for one run. Timesteps with
// engine_speed below the combustion cutoff are flagged invalid; their
// entries are NaN.
struct RunFeatures {
    std::string run_id;
    std::vector<double> t_adiab;  // K
    std::vector<double> t_comb;   // s
    std::vector<double> x_o2;     // mole fraction
    std::vector<bool> valid;

    std::size_t size() const { return valid.size(); }
};

using FeatureSeries = std::vector<RunFeatures>;

// Name of the EGR mass-flow extra used for intake O2 dilution.
inline constexpr const char* kEgrColumn = "EGRkgph";

// Engine speed below which per-cycle quantities are undefined.
inline constexpr double kMinEngineSpeed = 100.0;  // rev/min

FeatureSeries compute_features(const obd::ObdDataset& dataset,
                               const PhysicsConstants& constants);

// Zeldovich-flavored phenomenological predictor:
//   pred = amplitude * x_o2^o2_exponent * t_comb^tcomb_exponent
//          * exp(-activation_temp / t_adiab)
struct LopParams {
    double amplitude = 1.0;        // ppm
    double o2_exponent = 1.0;
    double tcomb_exponent = 0.5;
    double activation_temp = 38000.0;  // K

    void check() const;
};

// Prediction per timestep; NaN where features are invalid.
std::vector<std::vector<double>> lop_predict(const FeatureSeries& features,
                                             const LopParams& params);

// Least-squares calibration of `amplitude` with the exponents and
// activation temperature held fixed (closed-form ratio of sums).
// Requires >= 10 valid samples; throws PipelineError otherwise.
LopParams calibrate_lop(const FeatureSeries& features,
                        const std::vector<std::vector<double>>& observed,
                        const LopParams& shape);

}  // namespace noxpred::physics
