#pragma once

// Arm loss estimates from the lossless arm-current model, and the same
// quantities extracted from a simulation's energy tallies.

#include <string>
#include <vector>

#include "dcmmc/circuit_sim.hpp"
#include "dcmmc/converter_model.hpp"

namespace dcmmc {

struct ArmCurrentStats {
    double rms_arm = 0.0;  ///< A
    double avg_arm = 0.0;  ///< A
    double rms_cap = 0.0;  ///< A, one module under phase-shifted insertion
};

/// rms_arm = (I_p/2) sqrt(1/k^2 + 1/2), avg_arm = I_p/(2k),
/// rms_cap = (I_p/4) sqrt(1 - m_a^2 cos^2(phi) / 2).
/// Throws std::domain_error when cos(phi) = 0.
ArmCurrentStats arm_current_stats(double i_p, double m_a, double phi);

struct ArmLoss {
    double conduction = 0.0;  ///< W
    double switching = 0.0;   ///< W
    double total = 0.0;       ///< W
};

/// Loss of one arm: N I_avg V_0 + N r I_rms^2 + N r_c I_cap^2 + 2 N f_sw (V_m I_avg (t_on + t_off) / 2).
/// r_c is the mean module ESR of the upper arm.
ArmLoss arm_loss(const ConverterConfig& cfg, const ArmCurrentStats& stats, double v0, double r);

struct BalancingLoss {
    double total = 0.0;               ///< W, one arm
    std::vector<double> per_pair;     ///< W, j = 1..N
};

/// Pair j carries (rms_arm delta_a / (N-1)) |N - 2j + 1| and dissipates
/// I^2 (r_L + 2r) + I V_0; the arm total sums the pairs.
BalancingLoss balancing_loss(const ConverterConfig& cfg, double rms_arm, double delta_a, double v0, double r,
                             double r_l);

struct LossReport {
    double rms_cap_current = 0.0;
    double rms_arm_current = 0.0;
    double avg_arm_current = 0.0;
    double conduction_loss = 0.0;   ///< W, one arm
    double switching_loss = 0.0;    ///< W, one arm
    double total_arm_loss = 0.0;    ///< W, one arm
    double balancing_loss = 0.0;    ///< W, one arm
    std::vector<double> per_pair_balancing;

    // echoed device assumptions
    double v0 = 0.0;
    double r = 0.0;
    double r_c = 0.0;
    double r_l = 0.0;
    double delta_a = 0.0;
    std::vector<std::string> notes;
};

/// Analytic report from the configuration: V_0 = switch on_drop, r = switch
/// on_resistance, r_L from the first clamp, phase current from the load.
LossReport analytic_loss(const ConverterConfig& cfg, double delta_a);

/// Average powers over a window of whole fundamental cycles.
struct SimulatedLoss {
    double window_start = 0.0;
    double window_end = 0.0;
    double source = 0.0;            ///< W
    double load = 0.0;
    double arm_resistance = 0.0;
    double capacitor_esr = 0.0;
    double leak = 0.0;
    double switch_conduction = 0.0;
    double diode_conduction = 0.0;
    double clamp_inductor = 0.0;
    double clamp_turnoff = 0.0;
    double switching = 0.0;
    double total = 0.0;             ///< all dissipation, whole leg
    double throughput = 0.0;        ///< mean load power
    bool has_baseline = false;
    double baseline_total = 0.0;
    LossReport report;              ///< per-arm figures extracted from the trace
};

class InsufficientWindow : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// window_start < 0 selects the second half of the run (rounded to whole
/// cycles). With a baseline (the same scenario at delta_a = 0), the balancing
/// loss is the per-arm difference of total dissipation over the same window.
/// Throws InsufficientWindow when the window holds fewer than 2 cycles.
SimulatedLoss simulated_loss(const SimTrace& trace, double window_start = -1.0, const SimTrace* baseline = nullptr);

}  // namespace dcmmc
