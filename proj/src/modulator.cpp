#include "dcmmc/modulator.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dcmmc/kernels/kernels.hpp"

namespace dcmmc {

std::vector<double> displacement_vector(int n, double total_displacement) {
    if (n < 2) throw std::invalid_argument("displacement_vector: N >= 2 required");
    std::vector<double> d(static_cast<std::size_t>(n));
    const double step = 1.0 / static_cast<double>(n - 1);
    for (int j = 0; j < n; ++j) {
        d[static_cast<std::size_t>(j)] = total_displacement * (0.5 - static_cast<double>(j) * step);
    }
    // Mirror the upper half onto the lower half so the sum cancels exactly.
    for (int j = 0; j < n / 2; ++j) {
        d[static_cast<std::size_t>(n - 1 - j)] = -d[static_cast<std::size_t>(j)];
    }
    if (n % 2 == 1) d[static_cast<std::size_t>(n / 2)] = 0.0;
    return d;
}

std::pair<std::vector<double>, std::vector<double>> carrier_phase_vectors(int n) {
    if (n < 2) throw std::invalid_argument("carrier_phase_vectors: N >= 2 required");
    std::vector<double> upper(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        upper[static_cast<std::size_t>(j)] = 2.0 * kPi * static_cast<double>(j) / static_cast<double>(n);
    }
    return {upper, std::vector<double>(upper.rbegin(), upper.rend())};
}

CarrierSet make_carrier_set(const ConverterConfig& cfg, Arm arm, double total_displacement) {
    auto [upper, lower] = carrier_phase_vectors(cfg.modules_per_arm);
    CarrierSet c;
    c.phases = arm == Arm::Upper ? std::move(upper) : std::move(lower);
    c.displacements = displacement_vector(cfg.modules_per_arm, total_displacement);
    c.carrier_freq = cfg.switching_freq;
    return c;
}

void check_carrier_set(const CarrierSet& carriers) {
    if (carriers.phases.size() != carriers.displacements.size()) {
        throw std::invalid_argument("carrier set: phase and displacement lengths differ");
    }
    for (std::size_t j = 1; j < carriers.displacements.size(); ++j) {
        if (carriers.displacements[j] > carriers.displacements[j - 1]) {
            throw std::invalid_argument("carrier set: displacements must be non-increasing");
        }
    }
    const double sum = std::accumulate(carriers.displacements.begin(), carriers.displacements.end(), 0.0);
    if (std::abs(sum) > 1e-12) throw std::invalid_argument("carrier set: displacements must sum to zero");
    if (!(carriers.carrier_freq > 0.0)) throw std::invalid_argument("carrier set: carrier_freq must be > 0");
}

double arm_reference(double t, Arm arm, const ConverterConfig& cfg) {
    const double s = cfg.modulation_index * std::sin(2.0 * kPi * cfg.fundamental_freq * t);
    return arm == Arm::Upper ? 0.5 * (1.0 - s) : 0.5 * (1.0 + s);
}

double module_reference(double t, int j, Arm arm, const ConverterConfig& cfg,
                        const CarrierSet& carriers) {
    if (j < 1 || j > static_cast<int>(carriers.displacements.size())) {
        throw std::out_of_range("module_reference: module index out of range");
    }
    return arm_reference(t, arm, cfg) - carriers.displacements[static_cast<std::size_t>(j - 1)];
}

double effective_arm_modulation(double t, const ConverterConfig& cfg, const CarrierSet& carriers,
                                Arm arm) {
    const double base = arm_reference(t, arm, cfg);
    double acc = 0.0;
    for (double d : carriers.displacements) acc += base - d;
    return acc / static_cast<double>(carriers.displacements.size());
}

double triangle_carrier(double t, double phase, double freq) {
    const double x = freq * t + phase / (2.0 * kPi);
    const double frac = x - std::floor(x);
    return std::abs(2.0 * frac - 1.0);
}

double zoh_sample_time(double t, double switching_freq) {
    const double rate = 2.0 * switching_freq;
    return std::floor(t * rate) / rate;
}

std::pair<GateFrame, GateFrame> gate_signals(double t, const ConverterConfig& cfg,
                                             const CarrierSet& carriers_upper,
                                             const CarrierSet& carriers_lower, DelayModel delay) {
    const double t_ref = delay == DelayModel::ZeroOrderHold ? zoh_sample_time(t, cfg.switching_freq) : t;
    auto frame = [&](const CarrierSet& c, Arm arm) {
        GateFrame f;
        f.time = t;
        f.series_flags.resize(c.size());
        const double ref = arm_reference(t_ref, arm, cfg);
        for (std::size_t j = 0; j < c.size(); ++j) {
            f.series_flags[j] = ref - c.displacements[j] >= triangle_carrier(t, c.phases[j], c.carrier_freq);
        }
        return f;
    };
    return {frame(carriers_upper, Arm::Upper), frame(carriers_lower, Arm::Lower)};
}

GateGenerator::GateGenerator(const ConverterConfig& cfg, DelayModel delay, double total_displacement)
    : n_(cfg.modules_per_arm),
      f_sw_(cfg.switching_freq),
      omega_(2.0 * kPi * cfg.fundamental_freq),
      m_a_(cfg.modulation_index),
      delay_(delay) {
    auto [upper, lower] = carrier_phase_vectors(n_);
    upper_phase_frac_.resize(upper.size());
    lower_phase_frac_.resize(lower.size());
    for (std::size_t j = 0; j < upper.size(); ++j) {
        upper_phase_frac_[j] = upper[j] / (2.0 * kPi);
        lower_phase_frac_[j] = lower[j] / (2.0 * kPi);
    }
    set_total_displacement(total_displacement);
}

void GateGenerator::set_total_displacement(double total_displacement) {
    total_displacement_ = total_displacement;
    displacement_ = displacement_vector(n_, total_displacement);
}

void GateGenerator::evaluate(double t, std::span<std::uint8_t> upper, std::span<std::uint8_t> lower) const {
    const double t_ref = delay_ == DelayModel::ZeroOrderHold ? zoh_sample_time(t, f_sw_) : t;
    const double s = m_a_ * std::sin(omega_ * t_ref);
    const double cycles = f_sw_ * t;
    kernels::compare_carriers(cycles, 0.5 * (1.0 - s), upper_phase_frac_, displacement_, upper);
    kernels::compare_carriers(cycles, 0.5 * (1.0 + s), lower_phase_frac_, displacement_, lower);
}

}  // namespace dcmmc
