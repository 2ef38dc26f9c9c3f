#include "dcmmc/design_rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dcmmc/clamp_analytics.hpp"

namespace dcmmc {

namespace {

double mean_capacitance(const ConverterConfig& cfg) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto* arm : {&cfg.upper_arm_modules, &cfg.lower_arm_modules}) {
        for (const auto& m : *arm) {
            acc += m.capacitance;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("design rules: configuration has no modules");
    return acc / static_cast<double>(count);
}

double mean_esr(const ConverterConfig& cfg) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto* arm : {&cfg.upper_arm_modules, &cfg.lower_arm_modules}) {
        for (const auto& m : *arm) {
            acc += m.esr;
            ++count;
        }
    }
    return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

const ClampParams& reference_clamp(const ConverterConfig& cfg) {
    if (cfg.upper_clamps.empty()) throw std::invalid_argument("design rules: configuration has no clamps");
    return cfg.upper_clamps.front();
}

double spread_denominator(int n, double epsilon) {
    const double x = static_cast<double>(n - 1) * epsilon / 2.0;
    if (x >= 1.0) throw std::domain_error("non-physical capacitance spread");
    return (1.0 - x) * (1.0 + x);
}

}  // namespace

double epsilon_from_tolerance(int n, double tolerance) {
    if (n < 2) throw std::invalid_argument("epsilon_from_tolerance: N >= 2 required");
    if (tolerance < 0.0) throw std::invalid_argument("epsilon_from_tolerance: tolerance must be >= 0");
    return 2.0 * tolerance / static_cast<double>(n - 1);
}

DriftInputs drift_inputs(const ConverterConfig& cfg) {
    const auto ip = phase_current(cfg);
    DriftInputs in;
    in.modules_per_arm = cfg.modules_per_arm;
    in.phase_current = ip.amplitude;
    in.k = k_factor(cfg.modulation_index, ip.angle);
    in.fundamental_freq = cfg.fundamental_freq;
    in.capacitance = mean_capacitance(cfg);
    return in;
}

double drift_per_cycle(const DriftInputs& in, double epsilon) {
    const double denom = spread_denominator(in.modules_per_arm, epsilon);
    return in.phase_current * static_cast<double>(in.modules_per_arm - 1) * epsilon * epsilon /
           (4.0 * in.k * in.fundamental_freq * in.capacitance * denom);
}

double drift_per_cycle(const ConverterConfig& cfg, double epsilon) {
    return drift_per_cycle(drift_inputs(cfg), epsilon);
}

double compensation_per_cycle(const DriftInputs& in, double epsilon, double total_displacement) {
    const double denom = spread_denominator(in.modules_per_arm, epsilon);
    return in.phase_current * total_displacement / (4.0 * in.k * in.fundamental_freq * in.capacitance) *
           2.0 / denom;
}

double min_displacement(int n, double epsilon) {
    if (n < 2) throw std::invalid_argument("min_displacement: N >= 2 required");
    return static_cast<double>(n - 1) * epsilon * epsilon / 2.0;
}

double avg_balancing_current(double i_p, double phi, double m_a, double delta_a) {
    return i_p * delta_a / (2.0 * k_factor(m_a, phi));
}

InductorWindow inductor_window(const ConverterConfig& cfg, double u_diff_max, double i_d_max,
                               double i_p, double phi, double delta_a) {
    if (!(i_d_max > 0.0)) throw std::invalid_argument("inductor_window: i_d_max must be > 0");
    if (!(u_diff_max > 0.0)) throw std::invalid_argument("inductor_window: u_diff_max must be > 0");
    const auto& clamp = reference_clamp(cfg);
    const double c = mean_capacitance(cfg);
    const double c_e = series_capacitance(c, c);
    const double r = clamp_loop_resistance(mean_esr(cfg), clamp.diode_resistance, cfg.sw.on_resistance,
                                           clamp.inductor_resistance);
    const double t_sw = 1.0 / cfg.switching_freq;

    InductorWindow w;
    const double ratio = u_diff_max / i_d_max;
    w.lower_peak_branch = c_e * (ratio * ratio + r * r / 4.0);
    w.lower_ramp_branch = u_diff_max * t_sw / i_d_max;
    w.lower = std::min(w.lower_peak_branch, w.lower_ramp_branch);

    const double t_avg = 0.5 / cfg.switching_freq;
    const double k = k_factor(cfg.modulation_index, phi);
    const double demand = i_p * delta_a;
    w.upper = demand > 0.0 ? 2.0 * k * u_diff_max * t_avg / demand : std::numeric_limits<double>::infinity();
    w.feasible = w.lower <= w.upper;
    return w;
}

DesignReport make_design_report(const ConverterConfig& cfg, const DesignAssumptions& a) {
    const auto ip = phase_current(cfg);
    const auto& clamp = reference_clamp(cfg);
    const double c = mean_capacitance(cfg);

    DesignReport r;
    r.modules_per_arm = cfg.modules_per_arm;
    r.phase_current = ip.amplitude;
    r.load_angle = ip.angle;
    r.tolerance = a.tolerance;
    r.total_displacement = a.total_displacement;
    r.configured_inductance = clamp.inductance;
    r.effective_capacitance = series_capacitance(c, c);
    r.loop_resistance = clamp_loop_resistance(mean_esr(cfg), clamp.diode_resistance, cfg.sw.on_resistance,
                                              clamp.inductor_resistance);

    r.epsilon = epsilon_from_tolerance(cfg.modules_per_arm, a.tolerance);
    r.k_factor = k_factor(cfg.modulation_index, ip.angle);
    r.dc_arm_current = ip.amplitude / (2.0 * r.k_factor);
    r.imbalance_current = r.epsilon * r.dc_arm_current;
    const auto in = drift_inputs(cfg);
    r.drift_per_cycle = drift_per_cycle(in, r.epsilon);
    r.compensation_per_cycle = compensation_per_cycle(in, r.epsilon, a.total_displacement);
    r.min_displacement = min_displacement(cfg.modules_per_arm, r.epsilon);
    r.avg_on_time = 0.5 / cfg.switching_freq;
    r.avg_balancing_current = avg_balancing_current(ip.amplitude, ip.angle, cfg.modulation_index,
                                                    a.total_displacement);

    ClampTransientParams tp;
    tp.effective_capacitance = r.effective_capacitance;
    tp.loop_resistance = r.loop_resistance;
    tp.inductance = clamp.inductance;

    if (a.u_diff_max) {
        r.u_diff_max = *a.u_diff_max;
        r.u_diff_max_source = "assumption";
    } else if (clamp.max_diff_voltage > 0.0) {
        r.u_diff_max = clamp.max_diff_voltage;
        r.u_diff_max_source = "clamp.max_diff_voltage";
    } else {
        r.u_diff_max = 0.01 * nominal_module_voltage(cfg);
        r.u_diff_max_source = "default: 1% of nominal module voltage";
    }

    const bool underdamped = is_underdamped(tp);
    auto configured_peak = [&](double u) {
        const double ramp = u / (clamp.inductance * cfg.switching_freq);
        if (!underdamped) return ramp;
        return std::min(peak_current_free(u, tp), ramp);
    };
    r.peak_diode_current = configured_peak(r.u_diff_max);

    if (a.i_d_max) {
        r.i_d_max = *a.i_d_max;
        r.i_d_max_source = "assumption";
    } else if (clamp.diode_current_rating > 0.0) {
        r.i_d_max = clamp.diode_current_rating;
        r.i_d_max_source = "clamp.diode_current_rating";
    } else if (r.avg_balancing_current > 0.0) {
        r.i_d_max = 10.0 * r.avg_balancing_current;
        r.i_d_max_source = "default: 10x average balancing current";
    } else {
        r.i_d_max = r.peak_diode_current;
        r.i_d_max_source = "default: peak current of the configured clamp (no displacement)";
    }

    const auto w = inductor_window(cfg, r.u_diff_max, r.i_d_max, ip.amplitude, ip.angle, a.total_displacement);
    r.inductor_lower = w.lower;
    r.inductor_upper = w.upper;
    r.inductor_feasible = w.feasible;
    r.configured_inductance_in_window = clamp.inductance >= w.lower && clamp.inductance <= w.upper;

    r.notes.push_back("inductor upper bound is the direct inversion L <= 2k U_diff,max T_avg / (I_p delta_a)");
    r.notes.push_back("inductor lower bound is min(C_e [(U/I)^2 + R^2/4], U T_sw / I)");
    r.notes.push_back("drift per cycle uses I_imbalance = epsilon * I_dc");
    if (!w.feasible) {
        r.notes.push_back("infeasible inductor window: lower " + std::to_string(w.lower) + " H > upper " +
                          std::to_string(w.upper) + " H");
    }
    if (a.total_displacement < r.min_displacement) {
        r.notes.push_back("total displacement is below the minimum required for the assumed tolerance");
    }
    if (!underdamped) r.notes.push_back("configured clamp loop is not underdamped");
    return r;
}

}  // namespace dcmmc
