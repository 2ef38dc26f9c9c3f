#pragma once

// Waveform distortion and module-voltage balancing metrics.

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dcmmc/circuit_sim.hpp"

namespace dcmmc {

class MetricsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct ThdResult {
    double thd = 0.0;                    ///< fraction
    double fundamental_amplitude = 0.0;  ///< peak
    double bandwidth = 0.0;              ///< Hz, highest harmonic included
    int highest_harmonic = 0;
    int cycles = 0;
};

/// Harmonic distortion of a uniformly sampled record spanning an integer
/// number (>= 5) of fundamental cycles, rectangular window, harmonics 2..H
/// with H f_1 <= min(max_harmonic_freq, Nyquist). The record is folded onto
/// one period first, which keeps exactly the bins at harmonic indices.
/// Throws MetricsError for a non-integer window or a vanishing fundamental.
ThdResult thd_analysis(std::span<const double> signal, double fundamental_freq, double dt,
                       double max_harmonic_freq);

double thd(std::span<const double> signal, double fundamental_freq, double dt, double max_harmonic_freq);

/// Default THD bandwidth: 5 f_sw N / 2.
double default_thd_bandwidth(const ConverterConfig& cfg);

struct SpreadOptions {
    double band = 0.03;     ///< fraction of V_m
    int hold_cycles = 5;
};

struct SpreadMetrics {
    std::vector<double> cycle_times;   ///< start of each fundamental cycle
    std::vector<double> spread;        ///< (max - min) / V_m over all 2N cycle averages
    std::vector<double> deviation;     ///< max |u - V_m| / V_m
    double spread_final = 0.0;
    double deviation_final = 0.0;
    /// Start of the earliest cycle from which the spread stays inside the band
    /// to the end of the trace, provided at least hold_cycles cycles remain.
    std::optional<double> convergence_time;
    double drift_rate = 0.0;           ///< V/s, least-squares slope of the spread in volts
    std::vector<double> final_mean_upper, final_mean_lower;
};

SpreadMetrics spread_metrics(const std::vector<CycleRecord>& cycles, double v_m, const SpreadOptions& options = {});

struct MetricsReport {
    std::optional<double> thd_voltage;
    double thd_bandwidth = 0.0;
    int thd_cycles = 0;
    double spread_final = 0.0;
    double deviation_final = 0.0;
    std::optional<double> convergence_time;
    double drift_rate = 0.0;
    double band = 0.0;
    int hold_cycles = 0;
    std::vector<double> mean_upper, mean_lower;
    double audit_residual = 0.0;
    double audit_relative = 0.0;
};

/// THD of the captured output voltage (when present) plus spread metrics.
MetricsReport make_metrics_report(const ConverterConfig& cfg, const SimTrace& trace, const SpreadOptions& options = {},
                                  std::optional<double> thd_bandwidth = std::nullopt);

}  // namespace dcmmc
