#pragma once

// Scenario files: a compact description of a leg (uniform module defaults,
// optional capacitance spread, per-module overrides), the displacement
// schedule and the requested outputs. Named presets are built in code and
// can be written out as YAML.

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcmmc/circuit_sim.hpp"
#include "dcmmc/converter_model.hpp"
#include "dcmmc/design_rules.hpp"
#include "dcmmc/loss_model.hpp"
#include "dcmmc/metrics.hpp"

namespace dcmmc {

struct ModuleOverride {
    Arm arm = Arm::Upper;
    int index = 1;  ///< 1-based, module 1 where positive arm current enters
    std::optional<double> capacitance;
    std::optional<double> esr;
    std::optional<double> leak_resistance;
    std::optional<double> initial_voltage;

    bool operator==(const ModuleOverride&) const = default;
};

struct LegDescription {
    int modules_per_arm = 0;
    double dc_voltage = 0.0;
    double fundamental_freq = 50.0;
    double switching_freq = 5000.0;
    double modulation_index = 0.95;
    double total_displacement = 0.0;
    ModuleParams module;                       ///< applied to every module of both arms
    std::optional<double> mismatch_tolerance;  ///< capacitance/ESR spread across each arm
    std::vector<ModuleOverride> overrides;
    ClampParams clamp;                         ///< applied to every clamp path
    SwitchParams sw;
    double arm_inductance = 0.0;
    double arm_resistance = 0.0;
    LoadSpec load;
    NumericsSpec numerics;

    bool operator==(const LegDescription&) const = default;

    /// Expanded configuration (not validated).
    ConverterConfig build() const;
};

struct ScenarioOutputs {
    bool trace = true;
    bool clamp_currents = false;
    int thd_cycles = 5;                    ///< full-rate v_out capture at the end of the run
    std::optional<double> thd_bandwidth;   ///< Hz, default 5 f_sw N / 2
    double band = 0.03;
    int hold_cycles = 5;
    std::optional<double> loss_window_start;  ///< s, default after the last schedule step or mid-run
    bool paired_baseline = false;          ///< rerun at delta_a = 0 for the simulated balancing loss

    bool operator==(const ScenarioOutputs&) const = default;
};

struct DesignInputs {
    double tolerance = 0.15;
    std::optional<double> total_displacement;  ///< default: largest scheduled or configured value
    std::optional<double> u_diff_max;
    std::optional<double> i_d_max;

    bool operator==(const DesignInputs&) const = default;
};

struct ScenarioSpec {
    std::string name;
    std::string preset;   ///< base preset the file was merged onto, empty if none
    LegDescription leg;
    DisplacementSchedule schedule;
    DelayModel delay = DelayModel::ZeroOrderHold;
    ScenarioOutputs outputs;
    DesignInputs design;

    bool operator==(const ScenarioSpec&) const = default;
};

/// Parse failure with a 1-based source position (0 when unknown).
class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& message, int line = 0, int column = 0);
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

std::vector<std::string> preset_names();
/// Throws ScenarioError for an unknown name.
ScenarioSpec preset(const std::string& name);

ScenarioSpec parse_scenario_text(const std::string& text);
ScenarioSpec parse_scenario_file(const std::filesystem::path& path);
/// A path to an existing file, or a preset name.
ScenarioSpec load_scenario(const std::string& file_or_preset);

std::string emit_scenario(const ScenarioSpec& spec);

/// Expanded and validated configuration (throws InvalidConfig), plus
/// schedule checks (throws ScenarioError).
ConverterConfig scenario_config(const ScenarioSpec& spec);

/// Replaces the displacement: every schedule step takes delta_a, or the
/// constant displacement when there is no schedule.
void set_displacement(ScenarioSpec& spec, double delta_a);

/// Largest displacement the scenario ever applies.
double peak_displacement(const ScenarioSpec& spec);

DesignReport scenario_design_report(const ScenarioSpec& spec);

struct RunOptions {
    std::optional<std::filesystem::path> out_dir;  ///< files are written only when set
    std::function<void(double)> progress;
    bool quiet_baseline = true;
};

struct RunResult {
    ScenarioSpec scenario;
    ConverterConfig config;
    SimTrace trace;
    MetricsReport metrics;
    LossReport analytic;
    std::optional<SimulatedLoss> simulated;
    std::vector<std::string> notes;
    double elapsed = 0.0;  ///< wall-clock seconds (not written to reports)
};

/// Simulates, evaluates metrics and losses, and writes trace.csv,
/// metrics.yaml, loss.yaml and scenario.yaml into out_dir when requested.
RunResult run_scenario(const ScenarioSpec& spec, const RunOptions& options = {});

enum class SweepAxis { DeltaA, PhaseCurrent, Tolerance, SwitchingFreq, ClampInductance };

SweepAxis parse_sweep_axis(const std::string& name);
std::string sweep_axis_name(SweepAxis axis);

/// Scenario with one axis value applied.
ScenarioSpec apply_axis(const ScenarioSpec& base, SweepAxis axis, double value);

struct SweepRow {
    double value = 0.0;
    bool ok = false;
    std::string error;
    double spread_final = 0.0;
    double deviation_final = 0.0;
    std::optional<double> convergence_time;
    double total_loss = 0.0;               ///< W, simulated leg dissipation over the loss window
    double balancing_loss_analytic = 0.0;  ///< W, one arm
    double throughput = 0.0;               ///< W
};

/// Runs one scenario per value on up to `workers` threads (0 = hardware
/// concurrency). Failures are recorded per row. Rows are sorted by value.
std::vector<SweepRow> sweep(const ScenarioSpec& base, SweepAxis axis, const std::vector<double>& values,
                            unsigned workers = 0);

}  // namespace dcmmc
