#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "dcmmc/circuit_sim.hpp"
#include "dcmmc/converter_model.hpp"
#include "dcmmc/scenario.hpp"

namespace fixture {

inline dcmmc::ConverterConfig table2_sim() { return dcmmc::scenario_config(dcmmc::preset("table2-sim")); }

/// Two-module arms with a huge arm inductance so the arm current stays at
/// zero and each clamp sees only its own RLC loop.
inline dcmmc::ConverterConfig isolated_pair(double u1, double u2, double c = 15e-3, double l = 10e-6) {
    dcmmc::ConverterConfig cfg;
    cfg.modules_per_arm = 2;
    cfg.dc_voltage = 1.0;
    cfg.switching_freq = 5000.0;
    cfg.fundamental_freq = 50.0;
    dcmmc::ModuleParams m{c, 0.0, std::nullopt, u1};
    cfg.upper_arm_modules = {m, m};
    cfg.upper_arm_modules[1].initial_voltage = u2;
    cfg.lower_arm_modules = {m, m};
    dcmmc::ClampParams cl;
    cl.inductance = l;
    cfg.upper_clamps = {cl};
    cfg.lower_clamps = {cl};
    cfg.arm_inductance = 1e9;
    cfg.load.amplitude = 0.0;
    return cfg;
}

/// Reference-leg devices with n modules per arm at the same module voltage.
inline dcmmc::ConverterConfig small_leg(int n) {
    auto s = dcmmc::preset("table2-sim");
    s.leg.modules_per_arm = n;
    s.leg.dc_voltage = 600.0 * n;
    return dcmmc::scenario_config(s);
}

/// Six-module leg with the gates frozen and uneven initial voltages so the
/// clamps conduct; state after t_end at step dt.
inline dcmmc::ConverterState frozen_run(double dt, double t_end) {
    const int n = 6;
    auto cfg = small_leg(n);
    cfg.numerics.time_step = dt;
    for (int j = 0; j < n; ++j) {
        cfg.upper_arm_modules[j].initial_voltage = 600.0 + 2.0 * j;
        cfg.lower_arm_modules[j].initial_voltage = 600.0 + (j % 3);
    }
    dcmmc::LegEngine e(cfg, dt);
    auto s = dcmmc::initial_state(cfg);
    std::vector<std::uint8_t> ug(n), lg(n);
    for (int j = 0; j < n; ++j) {
        ug[j] = j % 2;
        lg[j] = (j + 1) % 2;
    }
    const long steps = std::lround(t_end / dt);
    for (long k = 0; k < steps; ++k) {
        e.step(s, ug, lg, nullptr);
        s.time = (k + 1) * dt;
    }
    return s;
}

inline double state_distance(const dcmmc::ConverterState& a, const dcmmc::ConverterState& b) {
    double d = std::fabs(a.arm_current_upper - b.arm_current_upper);
    for (auto arm : {dcmmc::Arm::Upper, dcmmc::Arm::Lower}) {
        for (std::size_t j = 0; j < a.arm(arm).cap_voltages.size(); ++j) {
            d = std::max(d, std::fabs(a.arm(arm).cap_voltages[j] - b.arm(arm).cap_voltages[j]));
        }
    }
    return d;
}

/// Least-squares slope of log(err) against log(h) for the frozen-gate leg.
inline double observed_order(double t_end = 2e-3) {
    const auto ref = frozen_run(t_end / 65536, t_end);
    double lx[3], ly[3], mx = 0.0, my = 0.0;
    const int divs[] = {500, 1000, 2000};
    for (int i = 0; i < 3; ++i) {
        lx[i] = std::log(t_end / divs[i]);
        ly[i] = std::log(state_distance(frozen_run(t_end / divs[i], t_end), ref));
        mx += lx[i] / 3;
        my += ly[i] / 3;
    }
    double sxy = 0.0, sxx = 0.0;
    for (int i = 0; i < 3; ++i) {
        sxy += (lx[i] - mx) * (ly[i] - my);
        sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace fixture
