#pragma once

// Fixed-step switched piecewise-linear simulation of one leg. Each step is a
// backward-Euler update of the network selected by the gate pattern and the
// clamp-diode conduction pattern; the diode pattern is found by a
// complementarity sweep.
//
// Per arm the conducting clamp branches couple only to their neighbours, so
// the clamp currents solve a symmetric tridiagonal system whose right-hand
// side is affine in the arm current. The arm then reduces to
// V_arm = alpha + beta I, and the two arms plus the load give a scalar (or
// 2x2) equation for the arm currents.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcmmc/converter_model.hpp"
#include "dcmmc/modulator.hpp"

namespace dcmmc {

/// Per-device-class energies in joules, accumulated at full step rate.
struct EnergyTally {
    double source = 0.0;              ///< delivered by the dc rails
    double load = 0.0;                ///< absorbed by the load (v_out * i_out)
    double arm_resistance = 0.0;
    double capacitor_esr = 0.0;
    double leak = 0.0;                ///< self-discharge resistors
    double switch_conduction = 0.0;
    double diode_conduction = 0.0;    ///< V_fd and r_d terms of the clamp diodes
    double clamp_inductor = 0.0;      ///< r_L term
    double clamp_turnoff = 0.0;       ///< magnetic energy dropped when a clamp current is zero-clamped
    double switching = 0.0;

    double dissipation() const;
    /// Dissipation inside the clamp paths (diode, inductor resistance, turn-off residual).
    double balancing_path() const { return diode_conduction + clamp_inductor + clamp_turnoff; }
    EnergyTally& operator+=(const EnergyTally& o);
    EnergyTally operator-(const EnergyTally& o) const;
};

/// Energy stored in capacitors, clamp inductors and arm inductors.
double stored_energy(const ConverterConfig& cfg, const ConverterState& s);

using DiodePattern = std::vector<std::uint8_t>;  ///< 1 = conducting, one entry per clamp

/// Backward-Euler system of one arm for a fixed gate and diode pattern.
/// Clamp currents satisfy A x = rhs - coupling * I (A symmetric tridiagonal,
/// identity rows for blocking clamps) and the arm voltage is
/// alpha0 + beta0 I + sum(coupling * x).
struct ArmSystem {
    std::vector<double> diag;
    std::vector<double> off;       ///< A(j, j+1) = A(j+1, j), size N-2
    std::vector<double> rhs;
    std::vector<double> coupling;
    double alpha0 = 0.0;
    double beta0 = 0.0;
};

struct TopologyMatrices {
    ArmSystem upper;
    ArmSystem lower;
    double arm_impedance = 0.0;    ///< L_arm/dt + R_arm
    double load_impedance = 0.0;   ///< L_load/dt + R_load (R-L load only)
};

/// Assembles the step system for state s, gates and diode states. Switch drops
/// take their sign from the device currents in s.
TopologyMatrices assemble(const ConverterConfig& cfg, const ConverterState& s, const GateFrame& upper_gates,
                          const GateFrame& lower_gates, const DiodePattern& upper_diodes,
                          const DiodePattern& lower_diodes, double dt);

struct StepFlags {
    int diode_turn_on = 0;
    int diode_turn_off = 0;
    int zero_clamped = 0;   ///< conducting clamps whose current was forced to zero
    int halvings = 0;       ///< sub-steps taken because the diode sweep did not settle
};

struct StepResult {
    ConverterState next_state;
    int diode_iterations = 0;
    StepFlags flags;
};

class DiodeResolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Carries the state at the last fundamental-cycle boundary before the failure.
class SimulationDiverged : public std::runtime_error {
public:
    SimulationDiverged(const std::string& what, ConverterState last_valid);
    const ConverterState& last_valid() const noexcept { return last_valid_; }

private:
    ConverterState last_valid_;
};

/// Reusable stepping engine; holds the per-dt constants and scratch buffers of
/// one leg. Not thread-safe; use one engine per run.
class LegEngine {
public:
    explicit LegEngine(const ConverterConfig& cfg, double dt);

    const ConverterConfig& config() const { return cfg_; }
    double dt() const { return dt_; }

    /// Advances s by dt with the given gate masks (1 = inserted). Energies are
    /// added to tally when non-null. Throws DiodeResolutionError when the
    /// diode sweep fails even after step halving.
    int step(ConverterState& s, std::span<const std::uint8_t> upper_gates,
             std::span<const std::uint8_t> lower_gates, EnergyTally* tally, StepFlags* flags = nullptr);

    /// Diode pattern the next step would settle on, without advancing s.
    std::pair<DiodePattern, DiodePattern> resolve(const ConverterState& s,
                                                  std::span<const std::uint8_t> upper_gates,
                                                  std::span<const std::uint8_t> lower_gates);

    /// Output voltage (ac node to dc midpoint) of the last step.
    double last_output_voltage() const { return v_out_; }

    /// Capacitor currents of the last step.
    std::span<const double> last_cap_currents(Arm arm) const { return arm == Arm::Upper ? wu_.ic : wl_.ic; }

    /// Load current at time t for the current-source load.
    double load_current(double t) const;

protected:
    struct ArmCoeffs {
        std::vector<double> a, b, z, cap;   ///< per module: u' = a u + b i_C, u_term = a u + z i_C
        std::vector<double> leak_g;         ///< 1/R_leak or 0
        std::vector<double> esr;
        std::vector<double> l_dt, r_loop, l;  ///< per clamp
        std::vector<double> v_fd, r_d, r_l;
    };
    struct ArmWork {
        std::vector<std::uint8_t> s;      ///< gates used for this step
        std::vector<double> sigma;        ///< switch-drop sign per module
        std::vector<std::uint8_t> cond;
        std::vector<int> list;            ///< conducting clamp indices
        std::vector<double> dg, rb, cf, of;  ///< per clamp, as if every clamp conducted
        std::vector<double> diag, off, rhs, coup, p, q, cp;  ///< compressed over the conducting clamps
        std::vector<double> x, ic;
        double alpha = 0.0, beta = 0.0, alpha0 = 0.0, beta0 = 0.0;
    };

    void set_dt(double dt);
    void build_coeffs(Arm arm, ArmCoeffs& c) const;
    void prepare_arm(const ArmState& st, const ArmCoeffs& c, double i_arm_old, ArmWork& w) const;
    void solve_arm(const ArmState& st, const ArmCoeffs& c, ArmWork& w) const;
    void solve_leg(const ConverterState& s, double t_next, double& i_u, double& i_l, double& i_o) const;
    int check_arm(const ArmState& st, const ArmCoeffs& c, ArmWork& w, double i_arm, bool flip_all,
                  double& worst, int& worst_index) const;
    int substep(ConverterState& s, std::span<const std::uint8_t> ug, std::span<const std::uint8_t> lg,
                double dt, int depth, EnergyTally* tally, StepFlags* flags);
    bool try_step(ConverterState& s, double dt, EnergyTally* tally, StepFlags* flags, int& iterations);
    void apply_switching(ConverterState& s, std::span<const std::uint8_t> ug, std::span<const std::uint8_t> lg,
                         EnergyTally* tally);

    ConverterConfig cfg_;
    int n_;
    double dt_;
    double base_dt_;
    double arm_l_dt_ = 0.0, arm_z_ = 0.0;
    double load_l_dt_ = 0.0, load_z_ = 0.0;
    double omega_ = 0.0;
    PhaseCurrent load_current_;
    ArmCoeffs cu_, cl_;
    ArmWork wu_, wl_;
    double v_out_ = 0.0;
    const ConverterState* synced_ = nullptr;  ///< state whose gate flags w.s mirrors
};

/// Diode pattern for the next step from the state and gates.
std::pair<DiodePattern, DiodePattern> resolve_diodes(const ConverterConfig& cfg, const ConverterState& s,
                                                     const GateFrame& upper_gates, const GateFrame& lower_gates);

/// One backward-Euler step of length dt (a throwaway engine; use LegEngine in loops).
StepResult step(const ConverterConfig& cfg, const ConverterState& s, const GateFrame& upper_gates,
                const GateFrame& lower_gates, double dt);

/// Piecewise-constant displacement: value of the last entry with time <= t,
/// cfg.total_displacement before the first.
struct DisplacementStep {
    double time = 0.0;
    double delta_a = 0.0;

    bool operator==(const DisplacementStep&) const = default;
};
using DisplacementSchedule = std::vector<DisplacementStep>;

double displacement_at(const DisplacementSchedule& schedule, double initial, double t);

/// Receives decimated state rows.
class TraceSink {
public:
    virtual ~TraceSink() = default;
    virtual void begin(const ConverterConfig& cfg, bool clamp_currents) = 0;
    virtual void row(const ConverterState& s, double v_out) = 0;
    virtual void end() {}
};

/// Keeps decimated rows in memory.
class MemoryTraceSink : public TraceSink {
public:
    struct Row {
        double time = 0.0;
        std::vector<double> u_upper, u_lower;
        double i_arm_upper = 0.0, i_arm_lower = 0.0, v_out = 0.0, i_out = 0.0;
        std::vector<double> clamp_upper, clamp_lower;
    };

    void begin(const ConverterConfig& cfg, bool clamp_currents) override;
    void row(const ConverterState& s, double v_out) override;
    const std::vector<Row>& rows() const { return rows_; }

private:
    bool clamps_ = false;
    std::vector<Row> rows_;
};

/// Averages over one fundamental period [t_start, t_start + 1/f_1).
struct CycleRecord {
    double t_start = 0.0;
    std::vector<double> mean_u_upper, mean_u_lower;
    std::vector<double> ms_cap_current_upper, ms_cap_current_lower;  ///< mean square of i_C
    double mean_i_upper = 0.0, ms_i_upper = 0.0;
    double mean_i_lower = 0.0, ms_i_lower = 0.0;
    double mean_abs_i_upper = 0.0;
    double total_displacement = 0.0;
    EnergyTally energy_end;     ///< cumulative at the end of the cycle
    double stored_end = 0.0;    ///< stored energy at the end of the cycle
};

struct SimulationPlan {
    DisplacementSchedule schedule;
    DelayModel delay = DelayModel::ZeroOrderHold;
    TraceSink* sink = nullptr;
    bool record_clamp_currents = false;
    int capture_cycles = 0;          ///< full-rate v_out capture over the last K fundamental cycles
    std::function<void(double)> progress;  ///< called once per fundamental cycle with the time
};

struct SimTrace {
    double dt = 0.0;
    double fundamental_freq = 0.0;
    long long steps = 0;
    std::vector<CycleRecord> cycles;
    std::vector<double> vout_capture;
    double capture_start = 0.0;
    EnergyTally energy;
    double stored_initial = 0.0;
    double stored_final = 0.0;
    ConverterState final_state;
    int max_diode_iterations = 0;
    long long halvings = 0;
    long long complementarity_violations = 0;
    long long diode_turn_ons = 0;

    /// source - load - dissipation - delta stored.
    double audit_residual() const;
};

/// Runs gate generation and stepping for cfg.numerics.duration.
SimTrace simulate(const ConverterConfig& cfg, const SimulationPlan& plan);

}  // namespace dcmmc
