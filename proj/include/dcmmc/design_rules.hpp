#pragma once

// Analytic sizing of the displacement and the clamp inductor from the
// configuration alone.

#include <optional>
#include <string>
#include <vector>

#include "dcmmc/converter_model.hpp"

namespace dcmmc {

/// epsilon = 2 * tolerance / (N - 1): per-step capacitance spread across the arm.
double epsilon_from_tolerance(int n, double tolerance);

/// Inputs shared by the drift/compensation formulas.
struct DriftInputs {
    int modules_per_arm = 0;
    double phase_current = 0.0;    ///< A, peak
    double k = 0.0;                ///< 2 / (m_a cos phi)
    double fundamental_freq = 0.0; ///< Hz
    double capacitance = 0.0;      ///< F, rated module capacitance
};

DriftInputs drift_inputs(const ConverterConfig& cfg);

/// First-to-last module voltage divergence accumulated over one fundamental
/// period with I_imbalance = epsilon * I_dc. Throws std::domain_error when
/// (N-1) epsilon / 2 >= 1.
double drift_per_cycle(const DriftInputs& in, double epsilon);
double drift_per_cycle(const ConverterConfig& cfg, double epsilon);

/// Voltage difference restored per fundamental period by the displacement.
double compensation_per_cycle(const DriftInputs& in, double epsilon, double total_displacement);

/// (N - 1) epsilon^2 / 2.
double min_displacement(int n, double epsilon);

/// I_p * delta_a / (2k); throws std::domain_error when cos(phi) = 0.
double avg_balancing_current(double i_p, double phi, double m_a, double delta_a);

struct InductorWindow {
    double lower = 0.0;             ///< H
    double upper = 0.0;             ///< H, +inf when delta_a == 0
    double lower_peak_branch = 0.0; ///< H, C_e [(U/I)^2 + R^2/4]
    double lower_ramp_branch = 0.0; ///< H, U T_sw / I
    bool feasible = true;
};

/// Lower bound from the diode current rating, upper bound from the requirement
/// that the mean clamp current over the average on-time covers the
/// displacement-driven current: L <= 2k U T_avg / (I_p delta_a), T_avg = 0.5 / f_sw.
InductorWindow inductor_window(const ConverterConfig& cfg, double u_diff_max, double i_d_max,
                               double i_p, double phi, double delta_a);

struct DesignAssumptions {
    double tolerance = 0.15;              ///< +- capacitance tolerance
    double total_displacement = 0.0;
    std::optional<double> u_diff_max;     ///< default: clamp.max_diff_voltage, else 1% of V_m
    std::optional<double> i_d_max;        ///< default: clamp rating, else 10x the mean balancing current
};

struct DesignReport {
    // echoed inputs
    int modules_per_arm = 0;
    double phase_current = 0.0;
    double load_angle = 0.0;
    double tolerance = 0.0;
    double total_displacement = 0.0;
    double u_diff_max = 0.0;
    double i_d_max = 0.0;
    std::string u_diff_max_source;
    std::string i_d_max_source;
    double loop_resistance = 0.0;
    double effective_capacitance = 0.0;
    double configured_inductance = 0.0;

    double epsilon = 0.0;
    double k_factor = 0.0;
    double dc_arm_current = 0.0;
    double imbalance_current = 0.0;
    double drift_per_cycle = 0.0;
    double compensation_per_cycle = 0.0;
    double min_displacement = 0.0;
    double inductor_lower = 0.0;
    double inductor_upper = 0.0;
    bool inductor_feasible = true;
    bool configured_inductance_in_window = true;
    double avg_on_time = 0.0;
    double avg_balancing_current = 0.0;
    double peak_diode_current = 0.0;
    std::vector<std::string> notes;
};

DesignReport make_design_report(const ConverterConfig& cfg, const DesignAssumptions& assumptions);

}  // namespace dcmmc
