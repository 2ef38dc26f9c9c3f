#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcmmc/reports.hpp"
#include "dcmmc/scenario.hpp"

using namespace dcmmc;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("dcmmc-test-" + name);
    fs::remove_all(d);
    return d;
}

ScenarioSpec small_run() {
    auto s = preset("table2-sim");
    s.leg.modules_per_arm = 6;
    s.leg.dc_voltage = 3600.0;
    s.leg.mismatch_tolerance = 0.3;
    s.leg.numerics.duration = 0.2;
    s.leg.numerics.record_decimation = 50;
    s.schedule = {{0.1, 0.02}};
    return s;
}

}  // namespace

TEST_CASE("reference preset carries the listed values", "[scenario]") {
    const auto cfg = scenario_config(preset("table2-sim"));
    CHECK(cfg.modules_per_arm == 40);
    CHECK(cfg.dc_voltage == 24000.0);
    CHECK(cfg.switching_freq == 5000.0);
    CHECK(cfg.fundamental_freq == 50.0);
    CHECK(cfg.modulation_index == 0.95);
    CHECK(cfg.load.amplitude == 40.0);
    CHECK(cfg.arm_inductance == 10e-3);
    for (const auto& m : cfg.upper_arm_modules) {
        CHECK(m.capacitance == 15e-3);
        CHECK(m.initial_voltage == 600.0);
    }
    for (const auto& c : cfg.lower_clamps) CHECK(c.inductance == 10e-6);
}

TEST_CASE("leaky preset places the resistors", "[scenario]") {
    const auto cfg = scenario_config(preset("table3-leaky"));
    const std::pair<int, double> upper[] = {{4, 32e3}, {9, 28e3}, {14, 24e3}, {19, 20e3}};
    const std::pair<int, double> lower[] = {{4, 16e3}, {9, 12e3}, {14, 8e3}, {19, 4e3}};
    int leaky = 0;
    for (const auto& m : cfg.upper_arm_modules) leaky += m.leak_resistance.has_value();
    for (const auto& m : cfg.lower_arm_modules) leaky += m.leak_resistance.has_value();
    CHECK(leaky == 8);
    for (auto [j, r] : upper) CHECK(cfg.upper_arm_modules[j - 1].leak_resistance == r);
    for (auto [j, r] : lower) CHECK(cfg.lower_arm_modules[j - 1].leak_resistance == r);
}

TEST_CASE("unknown keys are reported with their position", "[scenario]") {
    const std::string text = "preset: table2-sim\nconfig:\n  modules_per_am: 40\n";
    try {
        parse_scenario_text(text);
        FAIL("expected a parse error");
    } catch (const ScenarioError& e) {
        CHECK(std::string(e.what()).find("modules_per_am") != std::string::npos);
        CHECK(e.line() == 3);
        CHECK(e.column() == 3);
    }
}

TEST_CASE("malformed values are rejected", "[scenario]") {
    CHECK_THROWS_AS(parse_scenario_text("preset: table2-sim\nconfig:\n  dc_voltage: lots\n"), ScenarioError);
    CHECK_THROWS_AS(parse_scenario_text("preset: nope\n"), ScenarioError);
    CHECK_THROWS_AS(parse_scenario_text("delay_model: late\n"), ScenarioError);
    CHECK_THROWS_AS(parse_scenario_text("displacement_schedule:\n  - {time: 1, delta_a: -0.1}\n"),
                    ScenarioError);
    CHECK_THROWS_AS(parse_scenario_text("a: [1, 2\n"), ScenarioError);
    CHECK_THROWS_AS(load_scenario("no-such-thing"), ScenarioError);
}

TEST_CASE("schedule must fit the run", "[scenario]") {
    auto s = preset("mismatch-step");
    s.leg.numerics.duration = 4.0;
    CHECK_THROWS_AS(scenario_config(s), ScenarioError);
    s.leg.numerics.duration = 10.0;
    s.schedule[0].delta_a = -0.01;
    CHECK_THROWS_AS(scenario_config(s), ScenarioError);
}

TEST_CASE("invalid leg parameters surface as configuration errors", "[scenario]") {
    auto s = preset("table2-sim");
    s.leg.modules_per_arm = 1;
    CHECK_THROWS_AS(scenario_config(s), InvalidConfig);
}

TEST_CASE("presets survive a write and read back", "[scenario]") {
    for (const auto& name : preset_names()) {
        const auto s = preset(name);
        const auto back = parse_scenario_text(emit_scenario(s));
        CHECK(back.leg == s.leg);
        CHECK(back.schedule == s.schedule);
        CHECK(back.delay == s.delay);
        CHECK(back.outputs == s.outputs);
        CHECK(back.design == s.design);
        CHECK(back.name == s.name);
        CHECK(emit_scenario(back) == emit_scenario(s));
    }
}

TEST_CASE("a file on top of a preset only changes what it names", "[scenario]") {
    const auto s = parse_scenario_text("preset: table2-sim\nconfig:\n  modules_per_arm: 10\n  dc_voltage: 6000\n");
    auto expect = preset("table2-sim");
    expect.leg.modules_per_arm = 10;
    expect.leg.dc_voltage = 6000.0;
    CHECK(s.leg == expect.leg);
    CHECK(s.preset == "table2-sim");
}

TEST_CASE("setting the displacement", "[scenario]") {
    auto a = preset("table2-sim");
    set_displacement(a, 0.01);
    CHECK(a.leg.total_displacement == 0.01);
    CHECK(peak_displacement(a) == 0.01);
    auto b = preset("mismatch-step");
    set_displacement(b, 0.005);
    CHECK(b.schedule[0].delta_a == 0.005);
    CHECK(peak_displacement(b) == 0.005);
}

TEST_CASE("sweep axes", "[scenario]") {
    const auto base = preset("table2-sim");
    CHECK(apply_axis(base, SweepAxis::PhaseCurrent, 80.0).leg.load.amplitude == 80.0);
    CHECK(apply_axis(base, SweepAxis::ClampInductance, 5e-6).leg.clamp.inductance == 5e-6);
    CHECK(apply_axis(base, SweepAxis::Tolerance, 0.1).leg.mismatch_tolerance == 0.1);
    CHECK(parse_sweep_axis(sweep_axis_name(SweepAxis::SwitchingFreq)) == SweepAxis::SwitchingFreq);
    CHECK_THROWS_AS(parse_sweep_axis("speed"), ScenarioError);
}

TEST_CASE("an empty sweep is a header only", "[scenario]") {
    const auto rows = sweep(preset("table2-sim"), SweepAxis::DeltaA, {});
    CHECK(rows.empty());
    const auto csv = sweep_csv(SweepAxis::DeltaA, rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1);
    CHECK(csv.rfind("delta_a,", 0) == 0);
}

TEST_CASE("sweep failures stay in their row", "[scenario]") {
    auto s = small_run();
    s.leg.numerics.duration = 0.12;
    const auto rows = sweep(s, SweepAxis::PhaseCurrent, {20.0, -1.0}, 1);
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].ok);
    CHECK_FALSE(rows[0].error.empty());
    CHECK(rows[1].ok);
}

TEST_CASE("reruns write byte-identical files", "[scenario]") {
    const auto a = fresh_dir("rerun-a"), b = fresh_dir("rerun-b");
    RunOptions oa, ob;
    oa.out_dir = a;
    ob.out_dir = b;
    run_scenario(small_run(), oa);
    run_scenario(small_run(), ob);
    for (const char* f : {"trace.csv", "metrics.yaml", "loss.yaml", "scenario.yaml"}) {
        INFO(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK_FALSE(slurp(a / f).empty());
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("shipped scenario files match the presets", "[scenario]") {
    for (const auto& name : preset_names()) {
        INFO(name);
        const auto s = parse_scenario_file(fs::path(DCMMC_SCENARIO_DIR) / (name + ".yaml"));
        const auto p = preset(name);
        CHECK(s.leg == p.leg);
        CHECK(s.schedule == p.schedule);
        CHECK(s.outputs == p.outputs);
        CHECK(s.design == p.design);
    }
}
