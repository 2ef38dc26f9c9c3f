#include "dcmmc/loss_model.hpp"

#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace dcmmc {

ArmCurrentStats arm_current_stats(double i_p, double m_a, double phi) {
    const double k = k_factor(m_a, phi);
    ArmCurrentStats s;
    s.rms_arm = 0.5 * i_p * std::sqrt(1.0 / (k * k) + 0.5);
    s.avg_arm = i_p / (2.0 * k);
    const double mc = m_a * std::cos(phi);
    s.rms_cap = 0.25 * i_p * std::sqrt(std::max(0.0, 1.0 - 0.5 * mc * mc));
    return s;
}

ArmLoss arm_loss(const ConverterConfig& cfg, const ArmCurrentStats& stats, double v0, double r) {
    const double n = static_cast<double>(cfg.modules_per_arm);
    double r_c = 0.0;
    for (const auto& m : cfg.upper_arm_modules) r_c += m.esr;
    if (!cfg.upper_arm_modules.empty()) r_c /= static_cast<double>(cfg.upper_arm_modules.size());
    const double v_m = nominal_module_voltage(cfg);
    ArmLoss l;
    l.conduction = n * stats.avg_arm * v0 + n * r * stats.rms_arm * stats.rms_arm +
                   n * r_c * stats.rms_cap * stats.rms_cap;
    l.switching = 2.0 * n * cfg.switching_freq *
                  (0.5 * v_m * stats.avg_arm * (cfg.sw.turn_on_time + cfg.sw.turn_off_time));
    l.total = l.conduction + l.switching;
    return l;
}

BalancingLoss balancing_loss(const ConverterConfig& cfg, double rms_arm, double delta_a, double v0, double r,
                             double r_l) {
    const int n = cfg.modules_per_arm;
    if (n < 2) throw std::invalid_argument("balancing_loss: N >= 2 required");
    BalancingLoss b;
    b.per_pair.resize(static_cast<std::size_t>(n));
    const double unit = rms_arm * delta_a / static_cast<double>(n - 1);
    for (int j = 1; j <= n; ++j) {
        const double i = unit * std::abs(n - 2 * j + 1);
        b.per_pair[static_cast<std::size_t>(j - 1)] = i * i * (r_l + 2.0 * r) + i * v0;
    }
    b.total = std::accumulate(b.per_pair.begin(), b.per_pair.end(), 0.0);
    return b;
}

LossReport analytic_loss(const ConverterConfig& cfg, double delta_a) {
    const auto pc = phase_current(cfg);
    const auto stats = arm_current_stats(pc.amplitude, cfg.modulation_index, pc.angle);
    LossReport rep;
    rep.v0 = cfg.sw.on_drop;
    rep.r = cfg.sw.on_resistance;
    rep.r_l = cfg.upper_clamps.empty() ? 0.0 : cfg.upper_clamps.front().inductor_resistance;
    for (const auto& m : cfg.upper_arm_modules) rep.r_c += m.esr;
    if (!cfg.upper_arm_modules.empty()) rep.r_c /= static_cast<double>(cfg.upper_arm_modules.size());
    rep.delta_a = delta_a;
    rep.rms_arm_current = stats.rms_arm;
    rep.avg_arm_current = stats.avg_arm;
    rep.rms_cap_current = stats.rms_cap;
    const auto arm = arm_loss(cfg, stats, rep.v0, rep.r);
    rep.conduction_loss = arm.conduction;
    rep.switching_loss = arm.switching;
    rep.total_arm_loss = arm.total;
    const auto bal = balancing_loss(cfg, stats.rms_arm, delta_a, rep.v0, rep.r, rep.r_l);
    rep.balancing_loss = bal.total;
    rep.per_pair_balancing = bal.per_pair;
    rep.notes.push_back("switching term uses the average arm current as the average switched current");
    rep.notes.push_back("balancing loss sums |N - 2j + 1| weighted pair currents; the signed sum is identically zero");
    rep.notes.push_back("capacitor rms current uses (I_p/4) sqrt(1 - m_a^2 cos^2(phi) / 2), checked against numeric integration");
    return rep;
}

namespace {

struct WindowIndex {
    std::size_t first = 0;  // first cycle inside the window
    std::size_t last = 0;   // one past the last cycle
};

WindowIndex window_cycles(const SimTrace& trace, double window_start) {
    const std::size_t count = trace.cycles.size();
    WindowIndex w;
    w.last = count;
    if (window_start < 0.0) {
        w.first = count / 2;
    } else {
        w.first = count;
        for (std::size_t i = 0; i < count; ++i) {
            if (trace.cycles[i].t_start >= window_start - 1e-9) {
                w.first = i;
                break;
            }
        }
    }
    if (w.last < w.first + 2) {
        throw InsufficientWindow("simulated_loss: window must contain at least 2 fundamental cycles");
    }
    return w;
}

EnergyTally energy_before(const SimTrace& trace, std::size_t cycle) {
    return cycle == 0 ? EnergyTally{} : trace.cycles[cycle - 1].energy_end;
}

}  // namespace

SimulatedLoss simulated_loss(const SimTrace& trace, double window_start, const SimTrace* baseline) {
    const auto w = window_cycles(trace, window_start);
    const double period = 1.0 / trace.fundamental_freq;
    const double duration = static_cast<double>(w.last - w.first) * period;
    const EnergyTally e = trace.cycles[w.last - 1].energy_end - energy_before(trace, w.first);

    SimulatedLoss s;
    s.window_start = trace.cycles[w.first].t_start;
    s.window_end = s.window_start + duration;
    s.source = e.source / duration;
    s.load = e.load / duration;
    s.arm_resistance = e.arm_resistance / duration;
    s.capacitor_esr = e.capacitor_esr / duration;
    s.leak = e.leak / duration;
    s.switch_conduction = e.switch_conduction / duration;
    s.diode_conduction = e.diode_conduction / duration;
    s.clamp_inductor = e.clamp_inductor / duration;
    s.clamp_turnoff = e.clamp_turnoff / duration;
    s.switching = e.switching / duration;
    s.total = e.dissipation() / duration;
    s.throughput = s.load;

    double ms_arm = 0.0, mean_arm = 0.0, ms_cap = 0.0;
    for (std::size_t i = w.first; i < w.last; ++i) {
        const auto& c = trace.cycles[i];
        ms_arm += 0.5 * (c.ms_i_upper + c.ms_i_lower);
        mean_arm += 0.5 * (c.mean_i_upper + c.mean_i_lower);
        double cap = 0.0;
        for (double v : c.ms_cap_current_upper) cap += v;
        for (double v : c.ms_cap_current_lower) cap += v;
        ms_cap += cap / static_cast<double>(c.ms_cap_current_upper.size() + c.ms_cap_current_lower.size());
    }
    const double cycles = static_cast<double>(w.last - w.first);
    auto& r = s.report;
    r.rms_arm_current = std::sqrt(ms_arm / cycles);
    r.avg_arm_current = mean_arm / cycles;
    r.rms_cap_current = std::sqrt(ms_cap / cycles);
    r.conduction_loss = 0.5 * (s.switch_conduction + s.capacitor_esr);
    r.switching_loss = 0.5 * s.switching;
    r.total_arm_loss = r.conduction_loss + r.switching_loss;
    r.delta_a = trace.cycles[w.last - 1].total_displacement;
    r.notes.push_back("per-arm figures are half of the leg totals");

    if (baseline) {
        const auto bw = window_cycles(*baseline, s.window_start);
        const double bduration = static_cast<double>(bw.last - bw.first) * (1.0 / baseline->fundamental_freq);
        const EnergyTally be = baseline->cycles[bw.last - 1].energy_end - energy_before(*baseline, bw.first);
        s.has_baseline = true;
        s.baseline_total = be.dissipation() / bduration;
        r.balancing_loss = 0.5 * (s.total - s.baseline_total);
        r.notes.push_back("balancing loss is half the leg dissipation difference against the baseline run");
    }
    return s;
}

}  // namespace dcmmc
