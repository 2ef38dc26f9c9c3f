#include "dcmmc/clamp_analytics.hpp"

#include <cmath>
#include <string>

#include "dcmmc/converter_model.hpp"

namespace dcmmc {

double diode_voltage(double u_cj, double u_cj1, bool lower_switch_on) {
    return lower_switch_on ? u_cj1 - u_cj : -u_cj;
}

double clamp_loop_resistance(double esr, double diode_resistance, double switch_resistance,
                             double inductor_resistance) {
    return 2.0 * esr + diode_resistance + switch_resistance + inductor_resistance;
}

double series_capacitance(double c1, double c2) {
    return c1 * c2 / (c1 + c2);
}

bool is_underdamped(const ClampTransientParams& p) {
    return p.inductance > 0.0 && p.effective_capacitance > 0.0 &&
           p.loop_resistance < 2.0 * std::sqrt(p.inductance / p.effective_capacitance);
}

TransientSolution transient_solution(const ClampTransientParams& p) {
    if (!(p.inductance > 0.0) || !(p.effective_capacitance > 0.0)) {
        throw std::invalid_argument("transient_solution: inductance and capacitance must be > 0");
    }
    if (!is_underdamped(p)) {
        throw OverdampedClamp("clamp loop is not underdamped: R = " + std::to_string(p.loop_resistance) +
                              " >= 2 sqrt(L/C_e) = " +
                              std::to_string(2.0 * std::sqrt(p.inductance / p.effective_capacitance)));
    }
    TransientSolution s;
    s.alpha = p.loop_resistance / (2.0 * p.inductance);
    s.omega0 = 1.0 / std::sqrt(p.inductance * p.effective_capacitance);
    s.omega_d = std::sqrt(s.omega0 * s.omega0 - s.alpha * s.alpha);
    s.amplitude = p.initial_diff /
                  std::sqrt(p.inductance / p.effective_capacitance -
                            p.loop_resistance * p.loop_resistance / 4.0);
    s.roots = {{-s.alpha, s.omega_d}, {-s.alpha, -s.omega_d}};
    return s;
}

double TransientSolution::current(double t) const {
    if (t < 0.0 || omega_d * t > kPi) return 0.0;
    return amplitude * std::exp(-alpha * t) * std::sin(omega_d * t);
}

double TransientSolution::peak_time() const {
    return std::atan2(omega_d, alpha) / omega_d;
}

double peak_current_free(double u_diff_max, const ClampTransientParams& p) {
    auto q = p;
    q.initial_diff = u_diff_max;
    return transient_solution(q).amplitude;
}

double peak_current_truncated(double u_diff_max, const ClampTransientParams& p, double duty,
                              double t_sw) {
    if (duty < 0.0 || duty > 1.0) throw std::invalid_argument("peak_current_truncated: duty must lie in [0, 1]");
    auto q = p;
    q.initial_diff = u_diff_max;
    const auto s = transient_solution(q);
    const double window = duty * t_sw;
    if (window >= s.peak_time()) return s.amplitude;
    const double value = s.amplitude * std::exp(-s.alpha * window) * std::sin(s.omega_d * window);
    return std::min(value, s.amplitude);
}

}  // namespace dcmmc
