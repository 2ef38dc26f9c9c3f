#include "dcmmc/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dcmmc/kernels/kernels.hpp"

namespace dcmmc {

ThdResult thd_analysis(std::span<const double> signal, double fundamental_freq, double dt,
                       double max_harmonic_freq) {
    if (!(fundamental_freq > 0.0) || !(dt > 0.0)) throw MetricsError("thd: frequency and dt must be positive");
    const double per_cycle = 1.0 / (fundamental_freq * dt);
    const auto p = static_cast<std::size_t>(std::llround(per_cycle));
    if (p < 3 || std::abs(per_cycle - static_cast<double>(p)) > 1e-6 * per_cycle) {
        throw MetricsError("thd: sampling period does not divide the fundamental period");
    }
    if (signal.size() % p != 0 || signal.size() / p < 5) {
        throw MetricsError("thd: record must span an integer number (>= 5) of fundamental cycles");
    }
    const std::size_t cycles = signal.size() / p;

    std::vector<double> folded(p, 0.0);
    for (std::size_t c = 0; c < cycles; ++c) {
        const double* x = signal.data() + c * p;
        for (std::size_t i = 0; i < p; ++i) folded[i] += x[i];
    }
    for (double& v : folded) v /= static_cast<double>(cycles);

    std::vector<double> ct(p), st(p);
    for (std::size_t i = 0; i < p; ++i) {
        const double a = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(p);
        ct[i] = std::cos(a);
        st[i] = std::sin(a);
    }
    const double scale = 2.0 / static_cast<double>(p);
    auto amplitude = [&](std::size_t h) {
        const auto b = kernels::project_harmonic(folded, h, ct, st);
        return scale * std::hypot(b.re, b.im);
    };

    ThdResult r;
    r.cycles = static_cast<int>(cycles);
    r.fundamental_amplitude = amplitude(1);
    double peak = 0.0;
    for (double v : signal) peak = std::max(peak, std::abs(v));
    if (!(r.fundamental_amplitude > 1e-12 * std::max(peak, 1e-300))) {
        throw MetricsError("thd: fundamental component below the detection floor");
    }

    const std::size_t nyquist = p / 2;
    const double by_freq = std::floor(max_harmonic_freq / fundamental_freq + 1e-9);
    const std::size_t h_max =
        by_freq >= static_cast<double>(nyquist) ? nyquist : static_cast<std::size_t>(std::max(by_freq, 1.0));
    r.highest_harmonic = static_cast<int>(h_max);
    r.bandwidth = static_cast<double>(h_max) * fundamental_freq;

    const double fund_power = 0.5 * r.fundamental_amplitude * r.fundamental_amplitude;
    double harm_power = 0.0;
    if (h_max == nyquist) {
        // Parseval over the folded period, on the residual after removing the
        // mean and the fundamental so a clean sine does not cancel to rounding noise
        const auto b1 = kernels::project_harmonic(folded, 1, ct, st);
        double mean = 0.0;
        for (double v : folded) mean += v;
        mean /= static_cast<double>(p);
        for (std::size_t i = 0; i < p; ++i) {
            const double e = folded[i] - mean - scale * (b1.re * ct[i] - b1.im * st[i]);
            harm_power += e * e;
        }
        harm_power /= static_cast<double>(p);
    } else {
        for (std::size_t h = 2; h <= h_max; ++h) {
            const double a = amplitude(h);
            harm_power += 0.5 * a * a;
        }
    }
    r.thd = std::sqrt(harm_power / fund_power);
    return r;
}

double thd(std::span<const double> signal, double fundamental_freq, double dt, double max_harmonic_freq) {
    return thd_analysis(signal, fundamental_freq, dt, max_harmonic_freq).thd;
}

double default_thd_bandwidth(const ConverterConfig& cfg) {
    return 5.0 * cfg.switching_freq * cfg.modules_per_arm / 2.0;
}

SpreadMetrics spread_metrics(const std::vector<CycleRecord>& cycles, double v_m, const SpreadOptions& options) {
    SpreadMetrics m;
    if (cycles.empty()) return m;
    const std::size_t count = cycles.size();
    m.cycle_times.reserve(count);
    m.spread.reserve(count);
    m.deviation.reserve(count);
    for (const auto& c : cycles) {
        double lo = INFINITY, hi = -INFINITY, dev = 0.0;
        for (const auto* v : {&c.mean_u_upper, &c.mean_u_lower}) {
            for (double u : *v) {
                lo = std::min(lo, u);
                hi = std::max(hi, u);
                dev = std::max(dev, std::abs(u - v_m));
            }
        }
        m.cycle_times.push_back(c.t_start);
        m.spread.push_back(hi >= lo ? (hi - lo) / v_m : 0.0);
        m.deviation.push_back(dev / v_m);
    }
    m.spread_final = m.spread.back();
    m.deviation_final = m.deviation.back();
    m.final_mean_upper = cycles.back().mean_u_upper;
    m.final_mean_lower = cycles.back().mean_u_lower;

    std::size_t first = count;
    while (first > 0 && m.spread[first - 1] <= options.band) --first;
    if (first < count && count - first >= static_cast<std::size_t>(std::max(options.hold_cycles, 1))) {
        m.convergence_time = m.cycle_times[first];
    }

    if (count >= 2) {
        double st = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            st += m.cycle_times[i];
            ss += m.spread[i];
        }
        st /= static_cast<double>(count);
        ss /= static_cast<double>(count);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < count; ++i) {
            const double dt = m.cycle_times[i] - st;
            num += dt * (m.spread[i] - ss);
            den += dt * dt;
        }
        m.drift_rate = den > 0.0 ? v_m * num / den : 0.0;
    }
    return m;
}

MetricsReport make_metrics_report(const ConverterConfig& cfg, const SimTrace& trace, const SpreadOptions& options,
                                  std::optional<double> thd_bandwidth) {
    MetricsReport r;
    r.thd_bandwidth = thd_bandwidth.value_or(default_thd_bandwidth(cfg));
    if (!trace.vout_capture.empty()) {
        const auto t = thd_analysis(trace.vout_capture, trace.fundamental_freq, trace.dt, r.thd_bandwidth);
        r.thd_voltage = t.thd;
        r.thd_bandwidth = t.bandwidth;
        r.thd_cycles = t.cycles;
    }
    const auto s = spread_metrics(trace.cycles, nominal_module_voltage(cfg), options);
    r.spread_final = s.spread_final;
    r.deviation_final = s.deviation_final;
    r.convergence_time = s.convergence_time;
    r.drift_rate = s.drift_rate;
    r.band = options.band;
    r.hold_cycles = options.hold_cycles;
    r.mean_upper = s.final_mean_upper;
    r.mean_lower = s.final_mean_lower;
    r.audit_residual = trace.audit_residual();
    r.audit_relative = trace.energy.source != 0.0 ? std::abs(r.audit_residual) / std::abs(trace.energy.source) : 0.0;
    return r;
}

}  // namespace dcmmc
