#pragma once

// Physical description of one single-phase leg of a diode-clamped MMC:
// module, switch and clamp parameters, load and numerics settings, and the
// instantaneous state vector the simulator advances.

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcmmc {

inline constexpr double kPi = 3.14159265358979323846;

enum class Arm { Upper, Lower };

struct ModuleParams {
    double capacitance = 0.0;                 ///< F
    double esr = 0.0;                         ///< Ohm, series resistance of the capacitor
    std::optional<double> leak_resistance;    ///< Ohm, self-discharge path across the capacitor
    double initial_voltage = 0.0;             ///< V

    bool operator==(const ModuleParams&) const = default;
};

/// Main half-bridge switch. Each conducting device is a constant drop plus an
/// on-resistance; the drop follows the sign of the device current.
struct SwitchParams {
    double on_drop = 0.0;        ///< V
    double on_resistance = 0.0;  ///< Ohm
    double turn_on_time = 0.0;   ///< s
    double turn_off_time = 0.0;  ///< s

    bool operator==(const SwitchParams&) const = default;
};

struct ClampParams {
    double inductance = 0.0;            ///< H
    double inductor_resistance = 0.0;   ///< Ohm
    double diode_drop = 0.0;            ///< V
    double diode_resistance = 0.0;      ///< Ohm
    double diode_current_rating = 0.0;  ///< A, peak rating used by the sizing rules (0 = derive)
    double max_diff_voltage = 0.0;      ///< V, permissible clamp voltage difference (0 = derive)

    bool operator==(const ClampParams&) const = default;
};

enum class LoadKind { CurrentSource, SeriesRL };

struct LoadSpec {
    LoadKind kind = LoadKind::CurrentSource;
    double amplitude = 0.0;    ///< A, peak phase current (current-source kind)
    double load_angle = 0.0;   ///< rad, current lags the reference voltage by this angle
    double resistance = 0.0;   ///< Ohm (series R-L kind)
    double inductance = 0.0;   ///< H (series R-L kind)

    bool operator==(const LoadSpec&) const = default;
};

struct NumericsSpec {
    double time_step = 1e-6;
    double duration = 1.0;
    int diode_resolution_max_iters = 64;
    int record_decimation = 10;

    bool operator==(const NumericsSpec&) const = default;
};

struct ConverterConfig {
    int modules_per_arm = 0;
    double dc_voltage = 0.0;
    double fundamental_freq = 50.0;
    double switching_freq = 5000.0;
    double modulation_index = 0.95;
    double total_displacement = 0.0;
    std::vector<ModuleParams> upper_arm_modules;
    std::vector<ModuleParams> lower_arm_modules;
    /// One entry per clamp path, index j links module j and j+1 (0-based).
    std::vector<ClampParams> upper_clamps;
    std::vector<ClampParams> lower_clamps;
    SwitchParams sw;
    double arm_inductance = 0.0;  ///< H, per arm
    double arm_resistance = 0.0;  ///< Ohm, per arm
    LoadSpec load;
    NumericsSpec numerics;

    const std::vector<ModuleParams>& modules(Arm arm) const {
        return arm == Arm::Upper ? upper_arm_modules : lower_arm_modules;
    }
    const std::vector<ClampParams>& clamps(Arm arm) const {
        return arm == Arm::Upper ? upper_clamps : lower_clamps;
    }

    bool operator==(const ConverterConfig&) const = default;
};

struct ArmState {
    std::vector<double> cap_voltages;   ///< N entries, module 1 where positive arm current enters (+ rail for the upper arm, ac node for the lower)
    std::vector<double> clamp_currents; ///< N-1 entries, always >= 0
    std::vector<bool> gate_series;      ///< N entries, true = inserted

    bool operator==(const ArmState&) const = default;
};

struct ConverterState {
    double time = 0.0;
    ArmState upper;
    ArmState lower;
    double arm_current_upper = 0.0;  ///< A, positive from the + rail toward the ac node
    double arm_current_lower = 0.0;  ///< A, positive from the ac node toward the - rail
    double output_current = 0.0;     ///< A, leaving the ac node into the load

    const ArmState& arm(Arm a) const { return a == Arm::Upper ? upper : lower; }
    ArmState& arm(Arm a) { return a == Arm::Upper ? upper : lower; }
};

struct ConfigViolation {
    std::string field;
    std::string message;

    bool operator==(const ConfigViolation&) const = default;
};

class InvalidConfig : public std::runtime_error {
public:
    explicit InvalidConfig(std::vector<ConfigViolation> violations);
    const std::vector<ConfigViolation>& violations() const noexcept { return violations_; }

private:
    std::vector<ConfigViolation> violations_;
};

/// Every violated invariant, in field order. Empty means the config is valid.
std::vector<ConfigViolation> validate_config(const ConverterConfig& cfg);

/// Returns cfg unchanged when valid, throws InvalidConfig listing all violations otherwise.
ConverterConfig checked_config(ConverterConfig cfg);

/// Capacitance/ESR spread used for the mismatched-module scenarios. Module j
/// (1-based) gets C_j = (1 + t - 2t (N-j)/(N-1)) C and
/// r_j = (1 - t + 2t (N-j)/(N-1)) r; t = 0.3 is the published spread.
std::vector<ModuleParams> synthesize_mismatched_modules(int n, double base_capacitance,
                                                        double base_esr,
                                                        double tolerance = 0.3);

double nominal_module_voltage(const ConverterConfig& cfg);

/// k = 2 / (m_a cos(phi)); throws std::domain_error when cos(phi) == 0.
double k_factor(double modulation_index, double load_angle);

/// Peak phase current and load angle implied by the load spec (current source:
/// as given; R-L: steady-state phasor of the fundamental output voltage).
struct PhaseCurrent {
    double amplitude = 0.0;
    double angle = 0.0;
};
PhaseCurrent phase_current(const ConverterConfig& cfg);

/// Initial state: capacitors at their initial voltages, clamps idle, arm
/// currents at the lossless steady-state values for t = 0.
ConverterState initial_state(const ConverterConfig& cfg);

}  // namespace dcmmc
