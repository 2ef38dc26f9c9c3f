#pragma once

// Level-adjusted phase-shifted carrier modulation. Each module compares the
// arm reference, shifted down by its own displacement, against a triangular
// carrier with its own phase.

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dcmmc/converter_model.hpp"

namespace dcmmc {

enum class DelayModel { None, ZeroOrderHold };

struct CarrierSet {
    std::vector<double> phases;         ///< rad, one per module
    std::vector<double> displacements;  ///< one per module, non-increasing, summing to zero
    double carrier_freq = 0.0;          ///< Hz

    std::size_t size() const { return phases.size(); }
};

struct GateFrame {
    double time = 0.0;
    std::vector<bool> series_flags;  ///< true = module inserted (S_j1 on, S_j2 off)
};

/// delta_j = total * (1/2 - (j-1)/(N-1)), j = 1..N.
std::vector<double> displacement_vector(int n, double total_displacement);

/// Upper-arm carriers spaced uniformly by 2 pi / N starting at 0; the lower arm
/// uses the same phases in reverse order.
std::pair<std::vector<double>, std::vector<double>> carrier_phase_vectors(int n);

/// Carrier set of one arm for the configured displacement and switching frequency.
CarrierSet make_carrier_set(const ConverterConfig& cfg, Arm arm, double total_displacement);

/// Throws std::invalid_argument if the displacements break ordering or zero sum.
void check_carrier_set(const CarrierSet& carriers);

/// Arm reference before displacement: (1 -/+ m_a sin(wt)) / 2 for upper/lower.
double arm_reference(double t, Arm arm, const ConverterConfig& cfg);

/// Reference of module j (1-based): arm reference minus delta_j.
double module_reference(double t, int j, Arm arm, const ConverterConfig& cfg,
                        const CarrierSet& carriers);

/// Mean of the module references over the arm.
double effective_arm_modulation(double t, const ConverterConfig& cfg, const CarrierSet& carriers,
                                Arm arm = Arm::Upper);

/// Unit symmetric triangle on [0, 1]; value 1 at phase 0, 0 at phase pi.
double triangle_carrier(double t, double phase, double freq);

/// Time at which a zero-order-hold sampler running at 2 f_sw (first sample at
/// t = 0) last sampled the reference.
double zoh_sample_time(double t, double switching_freq);

std::pair<GateFrame, GateFrame> gate_signals(double t, const ConverterConfig& cfg,
                                             const CarrierSet& carriers_upper,
                                             const CarrierSet& carriers_lower,
                                             DelayModel delay);

/// Fast gate evaluation for the simulator: keeps the carrier tables flat and
/// fills byte masks through the dispatched comparison kernel.
class GateGenerator {
public:
    GateGenerator(const ConverterConfig& cfg, DelayModel delay, double total_displacement);

    void set_total_displacement(double total_displacement);
    double total_displacement() const { return total_displacement_; }
    DelayModel delay() const { return delay_; }

    void evaluate(double t, std::span<std::uint8_t> upper, std::span<std::uint8_t> lower) const;

private:
    int n_;
    double f_sw_;
    double omega_;
    double m_a_;
    DelayModel delay_;
    double total_displacement_ = 0.0;
    std::vector<double> upper_phase_frac_;
    std::vector<double> lower_phase_frac_;
    std::vector<double> displacement_;
};

}  // namespace dcmmc
