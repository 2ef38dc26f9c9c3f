#include <catch_amalgamated.hpp>

#include <algorithm>
#include <numeric>

#include "dcmmc/converter_model.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace dcmmc;
using Catch::Approx;

namespace {

bool has_field(const std::vector<ConfigViolation>& v, const std::string& field) {
    return std::any_of(v.begin(), v.end(), [&](const ConfigViolation& x) { return x.field == field; });
}

}  // namespace

TEST_CASE("reference simulation leg validates", "[model]") {
    const auto cfg = fixture::table2_sim();
    CHECK(validate_config(cfg).empty());
    CHECK(cfg.modules_per_arm == 40);
    CHECK(cfg.dc_voltage == 24000.0);
    CHECK(cfg.upper_arm_modules.front().capacitance == 15e-3);
    CHECK(cfg.upper_clamps.front().inductance == 10e-6);
    CHECK(cfg.arm_inductance == 10e-3);
    CHECK(nominal_module_voltage(cfg) == Approx(600.0));
}

TEST_CASE("single module arm is rejected", "[model]") {
    auto cfg = fixture::table2_sim();
    cfg.modules_per_arm = 1;
    const auto v = validate_config(cfg);
    REQUIRE(has_field(v, "modules_per_arm"));
    const auto it = std::find_if(v.begin(), v.end(), [](auto& x) { return x.field == "modules_per_arm"; });
    CHECK(it->message.find("modules_per_arm >= 2 required") != std::string::npos);
    CHECK_THROWS_AS(checked_config(cfg), InvalidConfig);
}

TEST_CASE("coarse time step is rejected", "[model]") {
    auto cfg = fixture::table2_sim();
    cfg.numerics.time_step = 1.0 / (10.0 * cfg.switching_freq);
    const auto v = validate_config(cfg);
    REQUIRE(has_field(v, "numerics.time_step"));
    CHECK(v.front().message.find("time_step too coarse") != std::string::npos);
}

TEST_CASE("every violation is reported", "[model]") {
    auto cfg = fixture::table2_sim();
    cfg.dc_voltage = 0.0;
    cfg.modulation_index = 1.5;
    cfg.upper_arm_modules[3].capacitance = -1.0;
    cfg.lower_clamps[0].inductance = 0.0;
    const auto v = validate_config(cfg);
    CHECK(has_field(v, "dc_voltage"));
    CHECK(has_field(v, "modulation_index"));
    CHECK(has_field(v, "upper_arm_modules[3].capacitance"));
    CHECK(has_field(v, "lower_clamps[0].inductance"));
    CHECK(validate_config(cfg) == v);
}

TEST_CASE("mismatch endpoints", "[model]") {
    const auto m = synthesize_mismatched_modules(40, 15e-3, 1e-3);
    REQUIRE(m.size() == 40);
    CHECK(m.back().capacitance == Approx(1.3 * 15e-3).epsilon(1e-14));
    CHECK(m.front().capacitance == Approx(0.7 * 15e-3).epsilon(1e-14));
    CHECK(m[19].capacitance == Approx((1.3 - 0.6 * 20.0 / 39.0) * 15e-3).epsilon(1e-14));
    CHECK(m[19].capacitance == Approx(14.8846e-3).epsilon(1e-5));
    CHECK(m.front().esr == Approx(1.3e-3));
    CHECK(m.back().esr == Approx(0.7e-3));
}

TEST_CASE("mismatch spread is monotone and centred", "[model][property]") {
    oracle::Gen g(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = g.integer(2, 120);
        const double c = g.log_uniform(1e-4, 1e-1);
        const double r = g.log_uniform(1e-5, 1e-1);
        const double t = g.uniform(0.0, 0.9);
        const auto m = synthesize_mismatched_modules(n, c, r, t);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            sum += m[j].capacitance;
            if (j) {
                CHECK(m[j].capacitance >= m[j - 1].capacitance);
                CHECK(m[j].esr <= m[j - 1].esr);
            }
        }
        CHECK(sum / n == Approx(c).epsilon(1e-13));
    }
}

TEST_CASE("nominal module voltage", "[model]") {
    CHECK(nominal_module_voltage(fixture::table2_sim()) == Approx(600.0));
    CHECK(nominal_module_voltage(scenario_config(preset("table2-exp"))) == Approx(15.0));
}

TEST_CASE("k factor", "[model]") {
    CHECK(k_factor(0.95, 0.0) == Approx(2.1053).epsilon(1e-4));
    CHECK_THROWS_AS(k_factor(0.95, oracle::pi / 2), std::domain_error);
}

TEST_CASE("initial state matches the configuration", "[model]") {
    const auto cfg = fixture::table2_sim();
    const auto s = initial_state(cfg);
    CHECK(s.upper.cap_voltages.size() == 40);
    CHECK(s.lower.clamp_currents.size() == 39);
    CHECK(std::all_of(s.upper.clamp_currents.begin(), s.upper.clamp_currents.end(), [](double x) { return x == 0.0; }));
    // Kirchhoff at the ac node
    CHECK(s.arm_current_upper - s.arm_current_lower == Approx(s.output_current).margin(1e-12));
}
