#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "dcmmc/circuit_sim.hpp"
#include "dcmmc/clamp_analytics.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dcmmc;
using Catch::Approx;

namespace {

SimTrace short_run(const ConverterConfig& cfg, double delta_a, MemoryTraceSink* sink = nullptr) {
    SimulationPlan p;
    p.delay = DelayModel::ZeroOrderHold;
    p.schedule = {{0.0, delta_a}};
    p.sink = sink;
    p.record_clamp_currents = sink != nullptr;
    return simulate(cfg, p);
}

}  // namespace

TEST_CASE("isolated clamp discharge follows the closed form", "[sim]") {
    for (double r_l : {0.0, 1e-3}) {
        auto cfg = fixture::isolated_pair(100.0, 101.0);
        cfg.upper_clamps[0].inductor_resistance = r_l;
        ClampTransientParams p{series_capacitance(15e-3, 15e-3), r_l, 10e-6, 1.0};
        const auto sol = transient_solution(p);
        const double dt = 2 * oracle::pi / sol.omega0 / 2000.0;
        cfg.numerics.time_step = dt;
        LegEngine e(cfg, dt);
        auto s = initial_state(cfg);
        std::vector<std::uint8_t> g(2, 0);
        double worst = 0.0;
        for (int k = 1; k <= 1500; ++k) {
            e.step(s, g, g, nullptr);
            worst = std::max(worst, std::fabs(s.upper.clamp_currents[0] - sol.current(k * dt)));
            REQUIRE(s.upper.clamp_currents[0] >= 0.0);
        }
        CHECK(worst <= 5e-3 * sol.amplitude);
        // diode blocked after the half-sine, charge moved from module 2 to module 1
        CHECK(s.upper.clamp_currents[0] == 0.0);
        CHECK(s.upper.cap_voltages[0] > 100.0);
        CHECK(s.upper.cap_voltages[1] < 101.0);
    }
}

TEST_CASE("clamp current decays linearly once the switch opens", "[sim]") {
    auto cfg = fixture::isolated_pair(100.0, 100.0);
    cfg.upper_clamps[0].diode_drop = 0.7;
    const double dt = 1e-9;
    cfg.numerics.time_step = dt;
    LegEngine e(cfg, dt);
    auto s = initial_state(cfg);
    s.upper.clamp_currents[0] = 10.0;
    const std::vector<std::uint8_t> ug{0, 1}, lg{0, 0};
    auto first = s;
    e.step(first, ug, lg, nullptr);
    const double slope = (first.upper.clamp_currents[0] - 10.0) / dt;
    CHECK(slope == Approx(-(100.0 + 0.7) / 10e-6).epsilon(1e-2));
    int k = 0;
    while (s.upper.clamp_currents[0] > 0.0 && k < 100000) {
        e.step(s, ug, lg, nullptr);
        ++k;
    }
    CHECK(k * dt == Approx(10e-6 * 10.0 / (100.0 + 0.7)).epsilon(1e-2));
    CHECK(s.upper.clamp_currents[0] == 0.0);
}

TEST_CASE("forward-biased diode turns on", "[sim]") {
    auto cfg = fixture::isolated_pair(600.0, 605.0);
    cfg.upper_clamps[0].diode_drop = 0.7;
    const auto s = initial_state(cfg);
    GateFrame bypassed{0.0, {false, false}};
    GateFrame inserted{0.0, {false, true}};
    const auto on = resolve_diodes(cfg, s, bypassed, bypassed);
    CHECK(on.first[0] == 1);
    CHECK(on.second[0] == 0);
    const auto off = resolve_diodes(cfg, s, inserted, bypassed);
    CHECK(off.first[0] == 0);
}

TEST_CASE("equal voltages leave every diode blocking", "[sim][property]") {
    auto cfg = fixture::small_leg(8);
    const auto s = initial_state(cfg);
    oracle::Gen g(61);
    for (int trial = 0; trial < 200; ++trial) {
        GateFrame u{0.0, std::vector<bool>(8)}, l{0.0, std::vector<bool>(8)};
        for (int j = 0; j < 8; ++j) {
            u.series_flags[j] = g.coin();
            l.series_flags[j] = g.coin();
        }
        const auto [du, dl] = resolve_diodes(cfg, s, u, l);
        CHECK(std::all_of(du.begin(), du.end(), [](auto x) { return x == 0; }));
        CHECK(std::all_of(dl.begin(), dl.end(), [](auto x) { return x == 0; }));
        const auto r = step(cfg, s, u, l, 1e-6);
        for (double i : r.next_state.upper.clamp_currents) CHECK(i == 0.0);
        for (double i : r.next_state.lower.clamp_currents) CHECK(i == 0.0);
    }
}

TEST_CASE("no sources and no current leaves the state alone except for leaks", "[sim]") {
    auto cfg = fixture::isolated_pair(100.0, 100.0);
    cfg.upper_arm_modules[1].leak_resistance = 1000.0;
    const double dt = 1e-5;
    LegEngine e(cfg, dt);
    auto s = initial_state(cfg);
    std::vector<std::uint8_t> g(2, 0);
    const int steps = 1000;
    for (int k = 0; k < steps; ++k) e.step(s, g, g, nullptr);
    const double tau = 1000.0 * 15e-3;
    CHECK(s.upper.cap_voltages[0] == Approx(100.0).epsilon(1e-9));
    CHECK(s.lower.cap_voltages[0] == Approx(100.0).epsilon(1e-9));
    // backward Euler decay factor, and the continuous one within first order
    CHECK(s.upper.cap_voltages[1] == Approx(100.0 * std::pow(1.0 + dt / tau, -steps)).epsilon(1e-6));
    CHECK(s.upper.cap_voltages[1] == Approx(100.0 * std::exp(-steps * dt / tau)).epsilon(1e-5));
    CHECK(std::fabs(s.arm_current_upper) < 1e-6);
}

TEST_CASE("an inserted module carries the arm current", "[sim]") {
    auto cfg = fixture::small_leg(4);
    auto s = initial_state(cfg);
    s.arm_current_upper = 20.0;
    s.arm_current_lower = 20.0;
    s.output_current = 0.0;
    cfg.load.amplitude = 0.0;
    LegEngine e(cfg, 1e-6);
    const std::vector<std::uint8_t> ug{1, 0, 0, 0}, lg{0, 1, 1, 1};
    const auto before = s;
    e.step(s, ug, lg, nullptr);
    const double rise = s.upper.cap_voltages[0] - before.upper.cap_voltages[0];
    CHECK(rise == Approx(s.arm_current_upper * 1e-6 / 15e-3).epsilon(1e-6));
    CHECK(s.upper.cap_voltages[1] == before.upper.cap_voltages[1]);
    CHECK(s.lower.cap_voltages[1] > before.lower.cap_voltages[1]);
}

TEST_CASE("two-module arm with a conducting clamp assembles to a series RLC loop", "[sim]") {
    auto cfg = fixture::isolated_pair(100.0, 101.0);
    cfg.upper_arm_modules[0].esr = 1e-3;
    cfg.upper_arm_modules[1].esr = 1e-3;
    cfg.upper_clamps[0].diode_resistance = 2e-3;
    cfg.upper_clamps[0].inductor_resistance = 3e-3;
    cfg.upper_clamps[0].diode_drop = 0.2;
    cfg.sw.on_resistance = 4e-3;
    cfg.sw.on_drop = 0.1;
    const auto s = initial_state(cfg);
    const double dt = 1e-6;
    GateFrame g{0.0, {false, false}};
    const auto m = assemble(cfg, s, g, g, {1}, {0}, dt);
    REQUIRE(m.upper.diag.size() == 1);
    // L/dt + R_loop + dt/C_e with R_loop = 2 r_c + r_d + r_s + r_L
    const double r_loop = 2e-3 + 2e-3 + 4e-3 + 3e-3;
    CHECK(m.upper.diag[0] == Approx(10e-6 / dt + r_loop + dt / 15e-3 * 2.0).epsilon(1e-9));
    // drive: previous current term plus the voltage difference less both drops
    CHECK(m.upper.rhs[0] == Approx(1.0 - 0.2 - 0.1).epsilon(1e-9));
}

TEST_CASE("energy audit closes at the default step", "[sim]") {
    auto s = preset("table2-sim");
    s.leg.numerics.duration = 0.2;
    set_displacement(s, 0.02);
    const auto cfg = scenario_config(s);
    const auto trace = short_run(cfg, 0.02);
    CHECK(std::fabs(trace.audit_residual()) <= 1e-3 * trace.energy.source);
    CHECK(trace.energy.dissipation() > 0.0);
}

TEST_CASE("ideal devices dissipate nothing", "[sim]") {
    auto s = preset("table2-sim");
    s.leg.numerics.duration = 0.1;
    s.leg.module.esr = 0.0;
    s.leg.clamp.inductor_resistance = 0.0;
    s.leg.clamp.diode_drop = 0.0;
    s.leg.clamp.diode_resistance = 0.0;
    s.leg.sw.on_drop = 0.0;
    s.leg.sw.on_resistance = 0.0;
    s.leg.arm_resistance = 0.0;
    const auto cfg = scenario_config(s);
    const auto trace = short_run(cfg, 0.0);
    const auto& e = trace.energy;
    CHECK(e.arm_resistance == 0.0);
    CHECK(e.capacitor_esr == 0.0);
    CHECK(e.switch_conduction == 0.0);
    CHECK(e.diode_conduction == 0.0);
    CHECK(e.clamp_inductor == 0.0);
    CHECK(std::fabs(trace.audit_residual()) <= 1e-3 * std::fabs(e.source) + 1e-6);
}

TEST_CASE("clamp currents stay non-negative at every recorded step", "[sim]") {
    auto s = preset("mismatch-step");
    s.leg.modules_per_arm = 10;
    s.leg.dc_voltage = 6000.0;
    s.leg.numerics.duration = 0.3;
    s.leg.numerics.record_decimation = 7;
    s.schedule = {{0.1, 0.02}};
    const auto cfg = scenario_config(s);
    MemoryTraceSink sink;
    const auto trace = short_run(cfg, 0.02, &sink);
    REQUIRE(sink.rows().size() > 100);
    double peak = 0.0;
    for (const auto& r : sink.rows()) {
        for (double i : r.clamp_upper) {
            CHECK(i >= 0.0);
            peak = std::max(peak, i);
        }
        for (double i : r.clamp_lower) CHECK(i >= 0.0);
    }
    CHECK(peak > 0.0);
    CHECK(trace.complementarity_violations == 0);
}

TEST_CASE("recorded times strictly increase", "[sim]") {
    auto cfg = fixture::small_leg(4);
    cfg.numerics.duration = 0.05;
    cfg.numerics.record_decimation = 13;
    MemoryTraceSink sink;
    short_run(cfg, 0.0, &sink);
    const auto& rows = sink.rows();
    for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k].time > rows[k - 1].time);
}

TEST_CASE("reruns are identical", "[sim]") {
    auto cfg = fixture::small_leg(6);
    cfg.numerics.duration = 0.1;
    MemoryTraceSink a, b;
    const auto ta = short_run(cfg, 0.02, &a);
    const auto tb = short_run(cfg, 0.02, &b);
    REQUIRE(a.rows().size() == b.rows().size());
    for (std::size_t k = 0; k < a.rows().size(); ++k) {
        CHECK(a.rows()[k].u_upper == b.rows()[k].u_upper);
        CHECK(a.rows()[k].i_arm_lower == b.rows()[k].i_arm_lower);
    }
    CHECK(ta.energy.dissipation() == tb.energy.dissipation());
}

TEST_CASE("integrator converges at first order", "[sim]") {
    CHECK(fixture::observed_order() >= 0.9);
}

TEST_CASE("displacement schedule lookup", "[sim]") {
    const DisplacementSchedule sched{{5.0, 0.02}, {8.0, 0.01}};
    CHECK(displacement_at(sched, 0.0, 0.0) == 0.0);
    CHECK(displacement_at(sched, 0.0, 4.999) == 0.0);
    CHECK(displacement_at(sched, 0.0, 5.0) == 0.02);
    CHECK(displacement_at(sched, 0.0, 9.0) == 0.01);
    CHECK(displacement_at({}, 0.005, 3.0) == 0.005);
}
