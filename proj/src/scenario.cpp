#include "dcmmc/scenario.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "dcmmc/reports.hpp"

namespace dcmmc {

ScenarioError::ScenarioError(const std::string& message, int line, int column)
    : std::runtime_error(line > 0 ? message + " (line " + std::to_string(line) + ", column " +
                                        std::to_string(column) + ")"
                                  : message),
      line_(line),
      column_(column) {}

ConverterConfig LegDescription::build() const {
    ConverterConfig cfg;
    cfg.modules_per_arm = modules_per_arm;
    cfg.dc_voltage = dc_voltage;
    cfg.fundamental_freq = fundamental_freq;
    cfg.switching_freq = switching_freq;
    cfg.modulation_index = modulation_index;
    cfg.total_displacement = total_displacement;
    const int n = std::max(modules_per_arm, 0);
    std::vector<ModuleParams> arm(static_cast<std::size_t>(n), module);
    if (mismatch_tolerance && n >= 2) {
        arm = synthesize_mismatched_modules(n, module.capacitance, module.esr, *mismatch_tolerance);
        for (auto& m : arm) {
            m.leak_resistance = module.leak_resistance;
            m.initial_voltage = module.initial_voltage;
        }
    }
    cfg.upper_arm_modules = arm;
    cfg.lower_arm_modules = arm;
    for (const auto& o : overrides) {
        if (o.index < 1 || o.index > n) {
            throw ScenarioError("module override index " + std::to_string(o.index) + " outside 1.." +
                                std::to_string(n));
        }
        auto& m = (o.arm == Arm::Upper ? cfg.upper_arm_modules : cfg.lower_arm_modules)[o.index - 1];
        if (o.capacitance) m.capacitance = *o.capacitance;
        if (o.esr) m.esr = *o.esr;
        if (o.leak_resistance) m.leak_resistance = *o.leak_resistance;
        if (o.initial_voltage) m.initial_voltage = *o.initial_voltage;
    }
    cfg.upper_clamps.assign(static_cast<std::size_t>(std::max(n - 1, 0)), clamp);
    cfg.lower_clamps = cfg.upper_clamps;
    cfg.sw = sw;
    cfg.arm_inductance = arm_inductance;
    cfg.arm_resistance = arm_resistance;
    cfg.load = load;
    cfg.numerics = numerics;
    return cfg;
}

// ---------------------------------------------------------------- presets

namespace {

ScenarioSpec table2_sim() {
    ScenarioSpec s;
    s.name = "table2-sim";
    auto& l = s.leg;
    l.modules_per_arm = 40;
    l.dc_voltage = 24000.0;
    l.fundamental_freq = 50.0;
    l.switching_freq = 5000.0;
    l.modulation_index = 0.95;
    l.total_displacement = 0.0;
    l.module.capacitance = 15e-3;
    l.module.esr = 1e-3;
    l.module.initial_voltage = 600.0;
    l.clamp.inductance = 10e-6;
    l.clamp.inductor_resistance = 1e-3;
    l.clamp.diode_drop = 0.03;
    l.clamp.diode_resistance = 2e-3;
    l.sw.on_drop = 0.03;
    l.sw.on_resistance = 2e-3;
    l.arm_inductance = 10e-3;
    l.arm_resistance = 0.1;
    l.load.kind = LoadKind::CurrentSource;
    l.load.amplitude = 40.0;
    l.load.load_angle = 0.0;
    l.numerics.time_step = 1e-6;
    l.numerics.duration = 10.0;
    l.numerics.diode_resolution_max_iters = 64;
    l.numerics.record_decimation = 500;
    s.delay = DelayModel::ZeroOrderHold;
    return s;
}

ScenarioSpec mismatch_step() {
    auto s = table2_sim();
    s.name = "mismatch-step";
    s.leg.mismatch_tolerance = 0.3;
    s.schedule = {{5.0, 0.02}};
    s.outputs.loss_window_start = 8.0;
    return s;
}

ScenarioSpec table3_leaky() {
    auto s = table2_sim();
    s.name = "table3-leaky";
    const int idx[] = {4, 9, 14, 19};
    const double upper[] = {32e3, 28e3, 24e3, 20e3};
    const double lower[] = {16e3, 12e3, 8e3, 4e3};
    for (int k = 0; k < 4; ++k) {
        ModuleOverride o;
        o.arm = Arm::Upper;
        o.index = idx[k];
        o.leak_resistance = upper[k];
        s.leg.overrides.push_back(o);
    }
    for (int k = 0; k < 4; ++k) {
        ModuleOverride o;
        o.arm = Arm::Lower;
        o.index = idx[k];
        o.leak_resistance = lower[k];
        s.leg.overrides.push_back(o);
    }
    s.schedule = {{7.0, 0.02}};
    s.leg.numerics.duration = 12.0;
    s.outputs.loss_window_start = 10.0;
    return s;
}

ScenarioSpec table2_exp() {
    auto s = table2_sim();
    s.name = "table2-exp";
    auto& l = s.leg;
    l.modules_per_arm = 8;
    l.dc_voltage = 120.0;
    l.switching_freq = 10000.0;
    l.module.capacitance = 4.9e-3;
    l.module.initial_voltage = 15.0;
    l.clamp.inductance = 7.5e-6;
    l.arm_inductance = 2e-3;
    l.load.amplitude = 20.0;
    l.total_displacement = 0.02;
    l.numerics.time_step = 0.5e-6;
    l.numerics.duration = 1.0;
    s.design.total_displacement = 0.02;
    s.design.u_diff_max = 0.02;
    s.design.i_d_max = 0.55;
    return s;
}

ScenarioSpec table2_sim_rl() {
    auto s = table2_sim();
    s.name = "table2-sim-rl";
    s.leg.load.kind = LoadKind::SeriesRL;
    s.leg.load.amplitude = 0.0;
    s.leg.load.resistance = 270.0;
    s.leg.load.inductance = 0.29;
    return s;
}

}  // namespace

std::vector<std::string> preset_names() {
    return {"table2-sim", "mismatch-step", "table3-leaky", "table2-exp", "table2-sim-rl"};
}

ScenarioSpec preset(const std::string& name) {
    if (name == "table2-sim") return table2_sim();
    if (name == "mismatch-step") return mismatch_step();
    if (name == "table3-leaky") return table3_leaky();
    if (name == "table2-exp") return table2_exp();
    if (name == "table2-sim-rl") return table2_sim_rl();
    throw ScenarioError("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------- parsing

namespace {

[[noreturn]] void fail_at(const YAML::Node& n, const std::string& message) {
    const auto m = n.Mark();
    if (m.is_null()) throw ScenarioError(message);
    throw ScenarioError(message, m.line + 1, m.column + 1);
}

/// Map with a fixed key set; unknown keys are rejected with their position.
class Fields {
public:
    Fields(const YAML::Node& node, std::string where, std::initializer_list<const char*> allowed)
        : node_(node), where_(std::move(where)) {
        if (!node.IsMap()) fail_at(node, where_ + ": expected a mapping");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (auto it = node.begin(); it != node.end(); ++it) {
            const auto key = it->first.as<std::string>();
            if (!ok.count(key)) fail_at(it->first, "unknown key '" + key + "' in " + where_);
        }
    }
    YAML::Node operator[](const char* key) const { return node_[key]; }
    const std::string& where() const { return where_; }

private:
    YAML::Node node_;
    std::string where_;
};

double to_double(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) fail_at(n, what + ": expected a number");
    const std::string& text = n.Scalar();
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first != last && *first == '+') ++first;
    const auto r = std::from_chars(first, last, v);
    if (r.ec != std::errc() || r.ptr != last) fail_at(n, what + ": '" + text + "' is not a number");
    return v;
}

int to_int(const YAML::Node& n, const std::string& what) {
    const double v = to_double(n, what);
    if (v != std::floor(v) || std::abs(v) > 1e9) fail_at(n, what + ": expected an integer");
    return static_cast<int>(v);
}

bool to_bool(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) fail_at(n, what + ": expected true or false");
    const auto& t = n.Scalar();
    if (t == "true") return true;
    if (t == "false") return false;
    fail_at(n, what + ": expected true or false");
}

std::string to_string(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) fail_at(n, what + ": expected a string");
    return n.Scalar();
}

void read(const Fields& f, const char* key, double& out) {
    if (auto v = f[key]) out = to_double(v, f.where() + "." + key);
}
void read(const Fields& f, const char* key, int& out) {
    if (auto v = f[key]) out = to_int(v, f.where() + "." + key);
}
void read(const Fields& f, const char* key, bool& out) {
    if (auto v = f[key]) out = to_bool(v, f.where() + "." + key);
}
void read(const Fields& f, const char* key, std::optional<double>& out) {
    if (auto v = f[key]) {
        if (v.IsNull()) {
            out.reset();
        } else {
            out = to_double(v, f.where() + "." + key);
        }
    }
}

Arm parse_arm(const YAML::Node& n) {
    const auto t = to_string(n, "arm");
    if (t == "upper") return Arm::Upper;
    if (t == "lower") return Arm::Lower;
    fail_at(n, "arm: expected 'upper' or 'lower', got '" + t + "'");
}

void parse_module(const YAML::Node& n, ModuleParams& m) {
    Fields f(n, "config.module", {"capacitance", "esr", "leak_resistance", "initial_voltage"});
    read(f, "capacitance", m.capacitance);
    read(f, "esr", m.esr);
    read(f, "leak_resistance", m.leak_resistance);
    read(f, "initial_voltage", m.initial_voltage);
}

std::vector<ModuleOverride> parse_overrides(const YAML::Node& n) {
    std::vector<ModuleOverride> out;
    if (n.IsNull()) return out;
    if (!n.IsSequence()) fail_at(n, "config.module_overrides: expected a list");
    for (const auto& item : n) {
        Fields f(item, "config.module_overrides[]",
                 {"arm", "index", "capacitance", "esr", "leak_resistance", "initial_voltage"});
        ModuleOverride o;
        if (!f["arm"] || !f["index"]) fail_at(item, "module override needs 'arm' and 'index'");
        o.arm = parse_arm(f["arm"]);
        read(f, "index", o.index);
        read(f, "capacitance", o.capacitance);
        read(f, "esr", o.esr);
        read(f, "leak_resistance", o.leak_resistance);
        read(f, "initial_voltage", o.initial_voltage);
        out.push_back(o);
    }
    return out;
}

void parse_clamp(const YAML::Node& n, ClampParams& c) {
    Fields f(n, "config.clamp", {"inductance", "inductor_resistance", "diode_drop", "diode_resistance",
                                 "diode_current_rating", "max_diff_voltage"});
    read(f, "inductance", c.inductance);
    read(f, "inductor_resistance", c.inductor_resistance);
    read(f, "diode_drop", c.diode_drop);
    read(f, "diode_resistance", c.diode_resistance);
    read(f, "diode_current_rating", c.diode_current_rating);
    read(f, "max_diff_voltage", c.max_diff_voltage);
}

void parse_switch(const YAML::Node& n, SwitchParams& s) {
    Fields f(n, "config.switch", {"on_drop", "on_resistance", "turn_on_time", "turn_off_time"});
    read(f, "on_drop", s.on_drop);
    read(f, "on_resistance", s.on_resistance);
    read(f, "turn_on_time", s.turn_on_time);
    read(f, "turn_off_time", s.turn_off_time);
}

void parse_load(const YAML::Node& n, LoadSpec& l) {
    Fields f(n, "config.load", {"kind", "amplitude", "load_angle", "resistance", "inductance"});
    if (auto k = f["kind"]) {
        const auto t = to_string(k, "config.load.kind");
        if (t == "current_source") {
            l.kind = LoadKind::CurrentSource;
        } else if (t == "series_rl") {
            l.kind = LoadKind::SeriesRL;
        } else {
            fail_at(k, "config.load.kind: expected 'current_source' or 'series_rl', got '" + t + "'");
        }
    }
    read(f, "amplitude", l.amplitude);
    read(f, "load_angle", l.load_angle);
    read(f, "resistance", l.resistance);
    read(f, "inductance", l.inductance);
}

void parse_numerics(const YAML::Node& n, NumericsSpec& s) {
    Fields f(n, "config.numerics", {"time_step", "duration", "diode_resolution_max_iters", "record_decimation"});
    read(f, "time_step", s.time_step);
    read(f, "duration", s.duration);
    read(f, "diode_resolution_max_iters", s.diode_resolution_max_iters);
    read(f, "record_decimation", s.record_decimation);
}

void parse_config(const YAML::Node& n, LegDescription& l) {
    Fields f(n, "config",
             {"modules_per_arm", "dc_voltage", "fundamental_freq", "switching_freq", "modulation_index",
              "total_displacement", "module", "mismatch_tolerance", "module_overrides", "clamp", "switch",
              "arm_inductance", "arm_resistance", "load", "numerics"});
    read(f, "modules_per_arm", l.modules_per_arm);
    read(f, "dc_voltage", l.dc_voltage);
    read(f, "fundamental_freq", l.fundamental_freq);
    read(f, "switching_freq", l.switching_freq);
    read(f, "modulation_index", l.modulation_index);
    read(f, "total_displacement", l.total_displacement);
    if (auto v = f["module"]) parse_module(v, l.module);
    read(f, "mismatch_tolerance", l.mismatch_tolerance);
    if (auto v = f["module_overrides"]) l.overrides = parse_overrides(v);
    if (auto v = f["clamp"]) parse_clamp(v, l.clamp);
    if (auto v = f["switch"]) parse_switch(v, l.sw);
    read(f, "arm_inductance", l.arm_inductance);
    read(f, "arm_resistance", l.arm_resistance);
    if (auto v = f["load"]) parse_load(v, l.load);
    if (auto v = f["numerics"]) parse_numerics(v, l.numerics);
}

DisplacementSchedule parse_schedule(const YAML::Node& n) {
    DisplacementSchedule out;
    if (n.IsNull()) return out;
    if (!n.IsSequence()) fail_at(n, "displacement_schedule: expected a list");
    for (const auto& item : n) {
        Fields f(item, "displacement_schedule[]", {"time", "delta_a"});
        if (!f["time"] || !f["delta_a"]) fail_at(item, "displacement_schedule entries need 'time' and 'delta_a'");
        DisplacementStep s;
        read(f, "time", s.time);
        read(f, "delta_a", s.delta_a);
        if (s.delta_a < 0.0) fail_at(f["delta_a"], "displacement_schedule: delta_a must be >= 0");
        out.push_back(s);
    }
    return out;
}

void parse_outputs(const YAML::Node& n, ScenarioOutputs& o) {
    Fields f(n, "outputs", {"trace", "clamp_currents", "thd_cycles", "thd_bandwidth", "band", "hold_cycles",
                            "loss_window_start", "paired_baseline"});
    read(f, "trace", o.trace);
    read(f, "clamp_currents", o.clamp_currents);
    read(f, "thd_cycles", o.thd_cycles);
    read(f, "thd_bandwidth", o.thd_bandwidth);
    read(f, "band", o.band);
    read(f, "hold_cycles", o.hold_cycles);
    read(f, "loss_window_start", o.loss_window_start);
    read(f, "paired_baseline", o.paired_baseline);
}

void parse_design(const YAML::Node& n, DesignInputs& d) {
    Fields f(n, "design", {"tolerance", "total_displacement", "u_diff_max", "i_d_max"});
    read(f, "tolerance", d.tolerance);
    read(f, "total_displacement", d.total_displacement);
    read(f, "u_diff_max", d.u_diff_max);
    read(f, "i_d_max", d.i_d_max);
}

ScenarioSpec parse_root(const YAML::Node& root, const std::string& default_name) {
    if (!root || root.IsNull()) throw ScenarioError("empty scenario");
    Fields f(root, "scenario",
             {"name", "preset", "delay_model", "displacement_schedule", "config", "outputs", "design"});
    ScenarioSpec s;
    if (auto p = f["preset"]) {
        const auto name = to_string(p, "preset");
        try {
            s = preset(name);
        } catch (const ScenarioError& e) {
            fail_at(p, e.what());
        }
        s.preset = name;
    } else {
        s.name = default_name;
    }
    if (auto v = f["name"]) s.name = to_string(v, "name");
    if (auto v = f["delay_model"]) {
        const auto t = to_string(v, "delay_model");
        if (t == "none") {
            s.delay = DelayModel::None;
        } else if (t == "zero_order_hold") {
            s.delay = DelayModel::ZeroOrderHold;
        } else {
            fail_at(v, "delay_model: expected 'none' or 'zero_order_hold', got '" + t + "'");
        }
    }
    if (auto v = f["displacement_schedule"]) s.schedule = parse_schedule(v);
    if (auto v = f["config"]) parse_config(v, s.leg);
    if (auto v = f["outputs"]) parse_outputs(v, s.outputs);
    if (auto v = f["design"]) parse_design(v, s.design);
    return s;
}

ScenarioSpec parse_with_errors(const std::string& text, const std::string& default_name) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ScenarioError("YAML parse error: " + e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    return parse_root(root, default_name);
}

}  // namespace

ScenarioSpec parse_scenario_text(const std::string& text) { return parse_with_errors(text, "scenario"); }

ScenarioSpec parse_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ScenarioError("cannot open scenario file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_with_errors(ss.str(), path.stem().string());
    } catch (const ScenarioError& e) {
        throw ScenarioError(path.string() + ": " + e.what());
    }
}

ScenarioSpec load_scenario(const std::string& file_or_preset) {
    std::error_code ec;
    if (std::filesystem::is_regular_file(file_or_preset, ec)) return parse_scenario_file(file_or_preset);
    const auto names = preset_names();
    if (std::find(names.begin(), names.end(), file_or_preset) != names.end()) return preset(file_or_preset);
    throw ScenarioError("'" + file_or_preset + "' is neither a scenario file nor a preset name");
}

// ---------------------------------------------------------------- emitting

namespace {

void num(YAML::Emitter& e, const char* key, double v) { e << YAML::Key << key << YAML::Value << format_number(v); }

void opt(YAML::Emitter& e, const char* key, const std::optional<double>& v) {
    e << YAML::Key << key << YAML::Value;
    if (v) {
        e << format_number(*v);
    } else {
        e << YAML::Null;
    }
}

}  // namespace

std::string emit_scenario(const ScenarioSpec& s) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "name" << YAML::Value << s.name;
    if (!s.preset.empty()) e << YAML::Key << "preset" << YAML::Value << s.preset;
    e << YAML::Key << "delay_model" << YAML::Value
      << (s.delay == DelayModel::None ? "none" : "zero_order_hold");
    e << YAML::Key << "displacement_schedule" << YAML::Value << YAML::BeginSeq;
    for (const auto& st : s.schedule) {
        e << YAML::Flow << YAML::BeginMap;
        num(e, "time", st.time);
        num(e, "delta_a", st.delta_a);
        e << YAML::EndMap;
    }
    e << YAML::EndSeq;

    const auto& l = s.leg;
    e << YAML::Key << "config" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "modules_per_arm" << YAML::Value << l.modules_per_arm;
    num(e, "dc_voltage", l.dc_voltage);
    num(e, "fundamental_freq", l.fundamental_freq);
    num(e, "switching_freq", l.switching_freq);
    num(e, "modulation_index", l.modulation_index);
    num(e, "total_displacement", l.total_displacement);
    e << YAML::Key << "module" << YAML::Value << YAML::BeginMap;
    num(e, "capacitance", l.module.capacitance);
    num(e, "esr", l.module.esr);
    opt(e, "leak_resistance", l.module.leak_resistance);
    num(e, "initial_voltage", l.module.initial_voltage);
    e << YAML::EndMap;
    opt(e, "mismatch_tolerance", l.mismatch_tolerance);
    e << YAML::Key << "module_overrides" << YAML::Value << YAML::BeginSeq;
    for (const auto& o : l.overrides) {
        e << YAML::Flow << YAML::BeginMap;
        e << YAML::Key << "arm" << YAML::Value << (o.arm == Arm::Upper ? "upper" : "lower");
        e << YAML::Key << "index" << YAML::Value << o.index;
        if (o.capacitance) num(e, "capacitance", *o.capacitance);
        if (o.esr) num(e, "esr", *o.esr);
        if (o.leak_resistance) num(e, "leak_resistance", *o.leak_resistance);
        if (o.initial_voltage) num(e, "initial_voltage", *o.initial_voltage);
        e << YAML::EndMap;
    }
    e << YAML::EndSeq;
    e << YAML::Key << "clamp" << YAML::Value << YAML::BeginMap;
    num(e, "inductance", l.clamp.inductance);
    num(e, "inductor_resistance", l.clamp.inductor_resistance);
    num(e, "diode_drop", l.clamp.diode_drop);
    num(e, "diode_resistance", l.clamp.diode_resistance);
    num(e, "diode_current_rating", l.clamp.diode_current_rating);
    num(e, "max_diff_voltage", l.clamp.max_diff_voltage);
    e << YAML::EndMap;
    e << YAML::Key << "switch" << YAML::Value << YAML::BeginMap;
    num(e, "on_drop", l.sw.on_drop);
    num(e, "on_resistance", l.sw.on_resistance);
    num(e, "turn_on_time", l.sw.turn_on_time);
    num(e, "turn_off_time", l.sw.turn_off_time);
    e << YAML::EndMap;
    num(e, "arm_inductance", l.arm_inductance);
    num(e, "arm_resistance", l.arm_resistance);
    e << YAML::Key << "load" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "kind" << YAML::Value
      << (l.load.kind == LoadKind::CurrentSource ? "current_source" : "series_rl");
    num(e, "amplitude", l.load.amplitude);
    num(e, "load_angle", l.load.load_angle);
    num(e, "resistance", l.load.resistance);
    num(e, "inductance", l.load.inductance);
    e << YAML::EndMap;
    e << YAML::Key << "numerics" << YAML::Value << YAML::BeginMap;
    num(e, "time_step", l.numerics.time_step);
    num(e, "duration", l.numerics.duration);
    e << YAML::Key << "diode_resolution_max_iters" << YAML::Value << l.numerics.diode_resolution_max_iters;
    e << YAML::Key << "record_decimation" << YAML::Value << l.numerics.record_decimation;
    e << YAML::EndMap;
    e << YAML::EndMap;

    const auto& o = s.outputs;
    e << YAML::Key << "outputs" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "trace" << YAML::Value << o.trace;
    e << YAML::Key << "clamp_currents" << YAML::Value << o.clamp_currents;
    e << YAML::Key << "thd_cycles" << YAML::Value << o.thd_cycles;
    opt(e, "thd_bandwidth", o.thd_bandwidth);
    num(e, "band", o.band);
    e << YAML::Key << "hold_cycles" << YAML::Value << o.hold_cycles;
    opt(e, "loss_window_start", o.loss_window_start);
    e << YAML::Key << "paired_baseline" << YAML::Value << o.paired_baseline;
    e << YAML::EndMap;

    e << YAML::Key << "design" << YAML::Value << YAML::BeginMap;
    num(e, "tolerance", s.design.tolerance);
    opt(e, "total_displacement", s.design.total_displacement);
    opt(e, "u_diff_max", s.design.u_diff_max);
    opt(e, "i_d_max", s.design.i_d_max);
    e << YAML::EndMap;

    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

// ---------------------------------------------------------------- helpers

ConverterConfig scenario_config(const ScenarioSpec& spec) {
    auto cfg = checked_config(spec.leg.build());
    for (const auto& st : spec.schedule) {
        if (st.delta_a < 0.0) throw ScenarioError("displacement_schedule: delta_a must be >= 0");
        if (st.time < 0.0 || st.time > cfg.numerics.duration) {
            throw ScenarioError("displacement_schedule: time " + format_number(st.time) +
                                " outside the simulated duration");
        }
    }
    const auto& o = spec.outputs;
    if (o.thd_cycles < 0) throw ScenarioError("outputs.thd_cycles must be >= 0");
    if (!(o.band > 0.0)) throw ScenarioError("outputs.band must be positive");
    if (o.hold_cycles < 1) throw ScenarioError("outputs.hold_cycles must be >= 1");
    return cfg;
}

void set_displacement(ScenarioSpec& spec, double delta_a) {
    if (spec.schedule.empty()) {
        spec.leg.total_displacement = delta_a;
    } else {
        for (auto& st : spec.schedule) st.delta_a = delta_a;
    }
}

double peak_displacement(const ScenarioSpec& spec) {
    double d = spec.leg.total_displacement;
    for (const auto& st : spec.schedule) d = std::max(d, st.delta_a);
    return d;
}

DesignReport scenario_design_report(const ScenarioSpec& spec) {
    const auto cfg = scenario_config(spec);
    DesignAssumptions a;
    a.tolerance = spec.design.tolerance;
    a.total_displacement = spec.design.total_displacement.value_or(peak_displacement(spec));
    a.u_diff_max = spec.design.u_diff_max;
    a.i_d_max = spec.design.i_d_max;
    return make_design_report(cfg, a);
}

// ---------------------------------------------------------------- run

namespace {

double default_loss_window(const ScenarioSpec& spec, const ConverterConfig& cfg) {
    if (spec.outputs.loss_window_start) return *spec.outputs.loss_window_start;
    double t = 0.5 * cfg.numerics.duration;
    for (const auto& st : spec.schedule) t = std::max(t, st.time);
    return t;
}

SimulationPlan base_plan(const ScenarioSpec& spec) {
    SimulationPlan plan;
    plan.schedule = spec.schedule;
    plan.delay = spec.delay;
    plan.capture_cycles = spec.outputs.thd_cycles;
    return plan;
}

}  // namespace

RunResult run_scenario(const ScenarioSpec& spec, const RunOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    RunResult r;
    r.scenario = spec;
    r.config = scenario_config(spec);

    std::unique_ptr<CsvTraceSink> sink;
    if (options.out_dir) {
        std::filesystem::create_directories(*options.out_dir);
        if (spec.outputs.trace) sink = std::make_unique<CsvTraceSink>(*options.out_dir / "trace.csv");
    }
    auto plan = base_plan(spec);
    plan.sink = sink.get();
    plan.record_clamp_currents = spec.outputs.clamp_currents;
    plan.progress = options.progress;
    r.trace = simulate(r.config, plan);
    sink.reset();

    SpreadOptions so;
    so.band = spec.outputs.band;
    so.hold_cycles = spec.outputs.hold_cycles;
    try {
        r.metrics = make_metrics_report(r.config, r.trace, so, spec.outputs.thd_bandwidth);
    } catch (const MetricsError& e) {
        r.notes.push_back(std::string("thd not evaluated: ") + e.what());
        auto no_thd = r.trace;
        no_thd.vout_capture.clear();
        r.metrics = make_metrics_report(r.config, no_thd, so, spec.outputs.thd_bandwidth);
    }

    r.analytic = analytic_loss(r.config, peak_displacement(spec));
    const double window = default_loss_window(spec, r.config);
    try {
        if (spec.outputs.paired_baseline) {
            auto twin = spec;
            set_displacement(twin, 0.0);
            twin.leg.total_displacement = 0.0;
            auto bplan = base_plan(twin);
            bplan.capture_cycles = 0;
            const auto base = simulate(scenario_config(twin), bplan);
            r.simulated = simulated_loss(r.trace, window, &base);
        } else {
            r.simulated = simulated_loss(r.trace, window);
        }
    } catch (const InsufficientWindow& e) {
        r.notes.push_back(std::string("simulated loss not evaluated: ") + e.what());
    }

    if (options.out_dir) {
        const auto& dir = *options.out_dir;
        write_text_file(dir / "scenario.yaml", emit_scenario(spec));
        write_text_file(dir / "metrics.yaml", metrics_yaml(spec, r.metrics));
        write_text_file(dir / "loss.yaml", loss_yaml(r.analytic, r.simulated));
    }
    r.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

// ---------------------------------------------------------------- sweep

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "delta_a") return SweepAxis::DeltaA;
    if (name == "i_p") return SweepAxis::PhaseCurrent;
    if (name == "tolerance") return SweepAxis::Tolerance;
    if (name == "f_sw") return SweepAxis::SwitchingFreq;
    if (name == "clamp_l") return SweepAxis::ClampInductance;
    throw ScenarioError("unknown sweep axis '" + name + "' (delta_a, i_p, tolerance, f_sw, clamp_l)");
}

std::string sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::DeltaA: return "delta_a";
        case SweepAxis::PhaseCurrent: return "i_p";
        case SweepAxis::Tolerance: return "tolerance";
        case SweepAxis::SwitchingFreq: return "f_sw";
        case SweepAxis::ClampInductance: return "clamp_l";
    }
    return "?";
}

ScenarioSpec apply_axis(const ScenarioSpec& base, SweepAxis axis, double value) {
    auto s = base;
    switch (axis) {
        case SweepAxis::DeltaA:
            set_displacement(s, value);
            break;
        case SweepAxis::PhaseCurrent:
            if (s.leg.load.kind != LoadKind::CurrentSource) {
                throw ScenarioError("axis i_p needs a current-source load");
            }
            s.leg.load.amplitude = value;
            break;
        case SweepAxis::Tolerance:
            s.leg.mismatch_tolerance = value;
            break;
        case SweepAxis::SwitchingFreq:
            s.leg.switching_freq = value;
            break;
        case SweepAxis::ClampInductance:
            s.leg.clamp.inductance = value;
            break;
    }
    s.name = base.name + "@" + sweep_axis_name(axis) + "=" + format_number(value);
    return s;
}

std::vector<SweepRow> sweep(const ScenarioSpec& base, SweepAxis axis, const std::vector<double>& values,
                            unsigned workers) {
    std::vector<SweepRow> rows(values.size());
    if (values.empty()) return rows;
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(values.size()));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            SweepRow& row = rows[i];
            row.value = values[i];
            try {
                auto spec = apply_axis(base, axis, values[i]);
                spec.outputs.trace = false;
                spec.outputs.paired_baseline = false;
                const auto res = run_scenario(spec);
                row.spread_final = res.metrics.spread_final;
                row.deviation_final = res.metrics.deviation_final;
                row.convergence_time = res.metrics.convergence_time;
                row.balancing_loss_analytic = res.analytic.balancing_loss;
                if (res.simulated) {
                    row.total_loss = res.simulated->total;
                    row.throughput = res.simulated->throughput;
                }
                row.ok = true;
            } catch (const std::exception& e) {
                row.ok = false;
                row.error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.value < b.value; });
    return rows;
}

}  // namespace dcmmc
