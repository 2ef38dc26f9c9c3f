#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "dcmmc/clamp_analytics.hpp"
#include "oracles.hpp"

using namespace dcmmc;
using Catch::Approx;

namespace {

ClampTransientParams table2_loop(double r = 0.0, double u = 1.0) {
    ClampTransientParams p;
    p.effective_capacitance = series_capacitance(15e-3, 15e-3);
    p.loop_resistance = r;
    p.inductance = 10e-6;
    p.initial_diff = u;
    return p;
}

}  // namespace

TEST_CASE("diode bias voltage", "[clamp]") {
    CHECK(diode_voltage(600.0, 605.0, true) == 5.0);
    CHECK(diode_voltage(600.0, 605.0, false) == -600.0);
    CHECK(diode_voltage(600.0, 123.0, false) == -600.0);
    CHECK(diode_voltage(600.0, 600.0, true) == 0.0);
}

TEST_CASE("loop resistance and series capacitance", "[clamp]") {
    CHECK(clamp_loop_resistance(1e-3, 2e-3, 3e-3, 4e-3) == Approx(2e-3 + 2e-3 + 3e-3 + 4e-3));
    CHECK(series_capacitance(15e-3, 15e-3) == Approx(7.5e-3));
    CHECK(series_capacitance(2.0, 3.0) == Approx(1.2));
}

TEST_CASE("reference clamp frequencies", "[clamp]") {
    const auto s = transient_solution(table2_loop());
    CHECK(s.alpha == 0.0);
    CHECK(s.omega0 == Approx(3651.5).epsilon(1e-4));
    CHECK(s.omega_d == Approx(s.omega0));
    CHECK(s.roots.first.real() == 0.0);
    CHECK(s.roots.first.imag() == Approx(s.omega_d));
    CHECK(s.roots.second == std::conj(s.roots.first));
}

TEST_CASE("zero difference gives no current", "[clamp]") {
    const auto s = transient_solution(table2_loop(1e-3, 0.0));
    for (double t : {0.0, 1e-5, 1e-4, 5e-4, 1e-3}) CHECK(s.current(t) == 0.0);
}

TEST_CASE("closed form against RK4 of the loop equation", "[clamp]") {
    for (double r : {0.0, 5e-3, 0.02}) {
        const auto p = table2_loop(r, 1.0);
        const auto s = transient_solution(p);
        const double t_end = 1.5 * oracle::pi / s.omega_d;
        const auto ref = oracle::rk4_clamp(1.0, p.inductance, p.effective_capacitance, r, t_end, t_end / 200000);
        double worst = 0.0, peak = 0.0;
        for (const auto& x : ref) {
            worst = std::max(worst, std::fabs(s.current(x.t) - x.i));
            peak = std::max(peak, x.i);
        }
        CHECK(worst <= 1e-3 * peak);
    }
}

TEST_CASE("initial slope equals u_diff / L", "[clamp]") {
    const auto p = table2_loop(0.01, 3.0);
    const auto s = transient_solution(p);
    const double h = 1e-10;
    CHECK(s.current(0.0) == 0.0);
    CHECK(s.current(h) / h == Approx(3.0 / p.inductance).epsilon(1e-5));
}

TEST_CASE("lossless limit", "[clamp][property]") {
    const auto p = table2_loop(1e-9, 2.0);
    const auto s = transient_solution(p);
    const double l = p.inductance, c = p.effective_capacitance;
    for (int k = 0; k <= 100; ++k) {
        const double t = k * 0.01 * oracle::pi * std::sqrt(l * c);
        CHECK(s.current(t) == Approx(2.0 * std::sqrt(c / l) * std::sin(t / std::sqrt(l * c))).margin(1e-9));
    }
}

TEST_CASE("current is a single non-negative half-sine", "[clamp][property]") {
    oracle::Gen g(41);
    for (int trial = 0; trial < 300; ++trial) {
        ClampTransientParams p;
        p.effective_capacitance = g.log_uniform(1e-4, 1e-1);
        p.inductance = g.log_uniform(1e-7, 1e-3);
        p.loop_resistance = g.uniform(0.0, 1.9) * std::sqrt(p.inductance / p.effective_capacitance);
        p.initial_diff = g.uniform(0.0, 20.0);
        const auto s = transient_solution(p);
        const double half = oracle::pi / s.omega_d;
        for (int k = 0; k <= 300; ++k) {
            const double t = k * half / 100.0;
            CHECK(s.current(t) >= 0.0);
            if (t > half * (1 + 1e-12)) CHECK(s.current(t) == 0.0);
        }
        CHECK(s.current(s.peak_time()) >= s.current(0.9 * s.peak_time()));
        CHECK(s.current(s.peak_time()) >= s.current(std::min(1.1 * s.peak_time(), half)));
    }
}

TEST_CASE("overdamped loops are rejected", "[clamp]") {
    auto p = table2_loop(1.0);
    CHECK_FALSE(is_underdamped(p));
    CHECK_THROWS_AS(transient_solution(p), OverdampedClamp);
    CHECK_THROWS_AS(peak_current_free(1.0, p), OverdampedClamp);
}

TEST_CASE("free peak current", "[clamp]") {
    const auto p = table2_loop();
    CHECK(peak_current_free(6.0, p) == Approx(164.3).epsilon(1e-3));
    CHECK(peak_current_free(0.0, p) == 0.0);
    auto q = p;
    q.inductance *= 2.0;
    CHECK(peak_current_free(6.0, q) == Approx(peak_current_free(6.0, p) / std::sqrt(2.0)));
}

TEST_CASE("truncated peak current", "[clamp]") {
    const auto p = table2_loop(1e-9);
    const double t_sw = 1.0 / 5000.0;
    const double a = peak_current_free(6.0, p);
    CHECK(peak_current_truncated(6.0, p, 0.0, t_sw) == 0.0);
    const auto s = transient_solution(p);
    CHECK(s.omega_d * t_sw == Approx(0.7303).epsilon(1e-4));
    CHECK(peak_current_truncated(6.0, p, 1.0, t_sw) == Approx(0.667 * a).epsilon(1e-3));
    CHECK(peak_current_truncated(6.0, p, 1.0, 10 * t_sw) == Approx(a));
}

TEST_CASE("truncated never exceeds free", "[clamp][property]") {
    oracle::Gen g(42);
    for (int trial = 0; trial < 1000; ++trial) {
        ClampTransientParams p;
        p.effective_capacitance = g.log_uniform(1e-4, 1e-1);
        p.inductance = g.log_uniform(1e-7, 1e-3);
        p.loop_resistance = g.uniform(0.0, 1.9) * std::sqrt(p.inductance / p.effective_capacitance);
        const double u = g.uniform(0.0, 10.0);
        const double duty = g.uniform(0.0, 1.0);
        const double t_sw = g.log_uniform(1e-5, 1e-2);
        CHECK(peak_current_truncated(u, p, duty, t_sw) <= peak_current_free(u, p) * (1 + 1e-12));
    }
}
