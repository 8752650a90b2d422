#include "noxpred/physics.hpp"

#include <cmath>
#include <limits>

#include "noxpred/common.hpp"
#include "noxpred/kernels.hpp"

namespace noxpred::physics {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void PhysicsConstants::check() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw ConfigError(std::string("physics constant '") + name +
                              "' must be strictly positive");
        }
    };
    positive(compression_ratio, "compression_ratio");
    positive(gamma, "gamma");
    positive(lhv_fuel, "lhv_fuel");
    positive(cp_charge, "cp_charge");
    positive(afr_stoich, "afr_stoich");
    positive(n_cylinders, "n_cylinders");
    positive(nozzle_area_total, "nozzle_area_total");
    positive(discharge_coeff, "discharge_coeff");
    positive(fuel_density, "fuel_density");
    positive(ambient_o2_fraction, "ambient_o2_fraction");
    positive(eps_delta_p, "eps_delta_p");
    if (!(gamma > 1.0)) throw ConfigError("physics constant 'gamma' must be > 1");
    if (ambient_o2_fraction > 0.21) {
        throw ConfigError("physics constant 'ambient_o2_fraction' must be in (0, 0.21]");
    }
}

void LopParams::check() const {
    if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
        throw ConfigError("LOP amplitude must be strictly positive");
    }
    if (!(activation_temp > 0.0) || !std::isfinite(activation_temp)) {
        throw ConfigError("LOP activation_temp must be strictly positive");
    }
    if (!std::isfinite(o2_exponent) || !std::isfinite(tcomb_exponent)) {
        throw ConfigError("LOP exponents must be finite");
    }
}

FeatureSeries compute_features(const obd::ObdDataset& dataset,
                               const PhysicsConstants& c) {
    c.check();
    FeatureSeries out;
    out.reserve(dataset.runs.size());

    // Charge temperature after compression scales intake temp by CR^(gamma-1);
    // the burn adds a fuel-energy term weighted by the O2 dilution ratio.
    const double cr_pow = std::pow(c.compression_ratio, c.gamma - 1.0);
    const double burn_rise = c.lhv_fuel / (c.cp_charge * (1.0 + c.afr_stoich));

    for (const auto& run : dataset.runs) {
        RunFeatures f;
        f.run_id = run.run_id;
        const std::size_t n = run.size();
        f.t_adiab.assign(n, kNaN);
        f.t_comb.assign(n, kNaN);
        f.x_o2.assign(n, kNaN);
        f.valid.assign(n, false);

        auto egr_it = run.extras.find(kEgrColumn);
        const std::vector<double>* egr =
            egr_it == run.extras.end() ? nullptr : &egr_it->second;

        for (std::size_t i = 0; i < n; ++i) {
            if (run.engine_speed[i] < kMinEngineSpeed) continue;  // flagged invalid

            double cycles_per_s = run.engine_speed[i] / 120.0;  // 4-stroke
            double m_fuel_inj =
                (run.fuel_rate[i] / 3600.0) / (cycles_per_s * c.n_cylinders);
            double dp = run.rail_pressure[i] - run.intake_pressure[i];
            if (dp < c.eps_delta_p) dp = c.eps_delta_p;
            double mdot_inj =
                c.discharge_coeff * c.nozzle_area_total * std::sqrt(2.0 * c.fuel_density * dp);
            double t_comb = m_fuel_inj / mdot_inj;

            double x_o2 = c.ambient_o2_fraction;
            if (egr != nullptr && std::isfinite((*egr)[i])) {
                double air = run.intake_air_flow[i];
                x_o2 = c.ambient_o2_fraction * air / (air + (*egr)[i]);
            }

            double t_comp = run.intake_temp[i] * cr_pow;
            double t_adiab = t_comp + burn_rise * (x_o2 / 0.21);

            f.t_adiab[i] = t_adiab;
            f.t_comb[i] = t_comb;
            f.x_o2[i] = x_o2;
            f.valid[i] = true;
        }
        out.push_back(std::move(f));
    }
    return out;
}

std::vector<std::vector<double>> lop_predict(const FeatureSeries& features,
                                             const LopParams& p) {
    p.check();
    std::vector<std::vector<double>> out;
    out.reserve(features.size());
    for (const auto& f : features) {
        const std::size_t n = f.size();
        std::vector<double> ln_xo2(n), ln_tcomb(n), inv_tadiab(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (f.valid[i]) {
                ln_xo2[i] = std::log(f.x_o2[i]);
                ln_tcomb[i] = std::log(f.t_comb[i]);
                inv_tadiab[i] = 1.0 / f.t_adiab[i];
            } else {
                ln_xo2[i] = kNaN;
                ln_tcomb[i] = kNaN;
                inv_tadiab[i] = kNaN;
            }
        }
        kernels::rate_exp_eval(n, ln_xo2.data(), ln_tcomb.data(), inv_tadiab.data(),
                               p.o2_exponent, p.tcomb_exponent, -p.activation_temp,
                               p.amplitude, pred.data());
        out.push_back(std::move(pred));
    }
    return out;
}

LopParams calibrate_lop(const FeatureSeries& features,
                        const std::vector<std::vector<double>>& observed,
                        const LopParams& shape) {
    if (observed.size() != features.size()) {
        throw PipelineError("calibrate_lop: observed series shape mismatch");
    }
    LopParams unit = shape;
    unit.amplitude = 1.0;
    auto base = lop_predict(features, unit);

    // SSE in `amplitude` is quadratic; the minimizer is the ratio of sums.
    double num = 0.0;
    double den = 0.0;
    std::size_t n_valid = 0;
    for (std::size_t r = 0; r < features.size(); ++r) {
        const auto& f = features[r];
        if (observed[r].size() != f.size()) {
            throw PipelineError("calibrate_lop: observed run length mismatch");
        }
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (!f.valid[i] || !std::isfinite(observed[r][i])) continue;
            num += observed[r][i] * base[r][i];
            den += base[r][i] * base[r][i];
            ++n_valid;
        }
    }
    if (n_valid < 10) {
        throw PipelineError("calibrate_lop: fewer than 10 valid samples (" +
                            std::to_string(n_valid) + ")");
    }
    LopParams fitted = shape;
    fitted.amplitude = num / den;
    if (!(fitted.amplitude > 0.0)) {
        log_warn("calibrate_lop: non-positive amplitude clamped to smallest positive value");
        fitted.amplitude = std::numeric_limits<double>::min();
    }
    return fitted;
}

}  // namespace noxpred::physics
