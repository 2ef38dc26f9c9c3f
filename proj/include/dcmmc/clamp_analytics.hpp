#pragma once

// Closed-form treatment of one conducting clamp path. With the lower switch of
// module j+1 on, capacitors j and j+1 form a series RLC loop with the clamp
// inductor; the diode truncates the response after the first half-sine.

#include <complex>
#include <stdexcept>
#include <utility>

namespace dcmmc {

class OverdampedClamp : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Voltage across clamp diode j: -u_cj when the lower switch of module j+1 is
/// off, u_c(j+1) - u_cj when it is on.
double diode_voltage(double u_cj, double u_cj1, bool lower_switch_on);

struct ClampTransientParams {
    double effective_capacitance = 0.0;  ///< F, C_j C_j+1 / (C_j + C_j+1)
    double loop_resistance = 0.0;        ///< Ohm
    double inductance = 0.0;             ///< H
    double initial_diff = 0.0;           ///< V, u_c(j+1) - u_cj - V_fd - V_sw
};

/// Loop resistance 2 r_c + r_d + r_s + r_L. The single switch in the loop is
/// the conducting lower switch of module j+1, so r_s is its on-resistance.
double clamp_loop_resistance(double esr, double diode_resistance, double switch_resistance,
                             double inductor_resistance);

/// Series combination of two module capacitances.
double series_capacitance(double c1, double c2);

struct TransientSolution {
    double alpha = 0.0;      ///< 1/s
    double omega0 = 0.0;     ///< rad/s
    double omega_d = 0.0;    ///< rad/s
    double amplitude = 0.0;  ///< A
    std::pair<std::complex<double>, std::complex<double>> roots;

    /// Clamp current: A e^(-alpha t) sin(omega_d t) for omega_d t in [0, pi], else 0.
    double current(double t) const;
    /// Time of the current maximum inside the conduction interval.
    double peak_time() const;
};

bool is_underdamped(const ClampTransientParams& p);

/// Throws OverdampedClamp when R >= 2 sqrt(L / C_e).
TransientSolution transient_solution(const ClampTransientParams& p);

/// U_diff,max / sqrt(L/C_e - R^2/4).
double peak_current_free(double u_diff_max, const ClampTransientParams& p);

/// Peak current when the on-window D T_sw ends before the half-sine peak;
/// never exceeds peak_current_free.
double peak_current_truncated(double u_diff_max, const ClampTransientParams& p, double duty,
                              double t_sw);

}  // namespace dcmmc
