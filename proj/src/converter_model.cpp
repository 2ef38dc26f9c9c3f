#include "dcmmc/converter_model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dcmmc {

namespace {

std::string describe(const std::vector<ConfigViolation>& violations) {
    std::ostringstream os;
    os << "invalid converter config:";
    for (const auto& v : violations) {
        os << "\n  " << v.field << ": " << v.message;
    }
    return os.str();
}

void check_modules(const std::vector<ModuleParams>& modules, const std::string& prefix, int n,
                   std::vector<ConfigViolation>& out) {
    if (static_cast<int>(modules.size()) != n) {
        out.push_back({prefix, "expected " + std::to_string(n) + " modules, got " +
                                   std::to_string(modules.size())});
    }
    for (std::size_t j = 0; j < modules.size(); ++j) {
        const auto& m = modules[j];
        const std::string f = prefix + "[" + std::to_string(j) + "]";
        if (!(m.capacitance > 0.0)) out.push_back({f + ".capacitance", "must be > 0"});
        if (!(m.esr >= 0.0)) out.push_back({f + ".esr", "must be >= 0"});
        if (m.leak_resistance && !(*m.leak_resistance > 0.0)) {
            out.push_back({f + ".leak_resistance", "must be > 0 when present"});
        }
        if (!(m.initial_voltage >= 0.0)) out.push_back({f + ".initial_voltage", "must be >= 0"});
    }
}

void check_clamps(const std::vector<ClampParams>& clamps, const std::string& prefix, int n,
                  std::vector<ConfigViolation>& out) {
    if (n >= 2 && static_cast<int>(clamps.size()) != n - 1) {
        out.push_back({prefix, "expected " + std::to_string(n - 1) + " clamp paths, got " +
                                   std::to_string(clamps.size())});
    }
    for (std::size_t j = 0; j < clamps.size(); ++j) {
        const auto& c = clamps[j];
        const std::string f = prefix + "[" + std::to_string(j) + "]";
        if (!(c.inductance > 0.0)) out.push_back({f + ".inductance", "must be > 0"});
        if (!(c.inductor_resistance >= 0.0)) out.push_back({f + ".inductor_resistance", "must be >= 0"});
        if (!(c.diode_drop >= 0.0)) out.push_back({f + ".diode_drop", "must be >= 0"});
        if (!(c.diode_resistance >= 0.0)) out.push_back({f + ".diode_resistance", "must be >= 0"});
        if (!(c.diode_current_rating >= 0.0)) out.push_back({f + ".diode_current_rating", "must be >= 0"});
        if (!(c.max_diff_voltage >= 0.0)) out.push_back({f + ".max_diff_voltage", "must be >= 0"});
    }
}

}  // namespace

InvalidConfig::InvalidConfig(std::vector<ConfigViolation> violations)
    : std::runtime_error(describe(violations)), violations_(std::move(violations)) {}

std::vector<ConfigViolation> validate_config(const ConverterConfig& cfg) {
    std::vector<ConfigViolation> out;
    const int n = cfg.modules_per_arm;
    if (n < 2) out.push_back({"modules_per_arm", "modules_per_arm >= 2 required"});
    if (!(cfg.dc_voltage > 0.0)) out.push_back({"dc_voltage", "must be > 0"});
    if (!(cfg.fundamental_freq > 0.0)) out.push_back({"fundamental_freq", "must be > 0"});
    if (!(cfg.switching_freq > 0.0)) out.push_back({"switching_freq", "must be > 0"});
    if (!(cfg.modulation_index > 0.0 && cfg.modulation_index <= 1.0)) {
        out.push_back({"modulation_index", "must lie in (0, 1]"});
    }
    if (!(cfg.total_displacement >= 0.0)) out.push_back({"total_displacement", "must be >= 0"});

    check_modules(cfg.upper_arm_modules, "upper_arm_modules", n, out);
    check_modules(cfg.lower_arm_modules, "lower_arm_modules", n, out);
    check_clamps(cfg.upper_clamps, "upper_clamps", n, out);
    check_clamps(cfg.lower_clamps, "lower_clamps", n, out);

    const auto& s = cfg.sw;
    if (!(s.on_drop >= 0.0)) out.push_back({"switch.on_drop", "must be >= 0"});
    if (!(s.on_resistance >= 0.0)) out.push_back({"switch.on_resistance", "must be >= 0"});
    if (!(s.turn_on_time >= 0.0)) out.push_back({"switch.turn_on_time", "must be >= 0"});
    if (!(s.turn_off_time >= 0.0)) out.push_back({"switch.turn_off_time", "must be >= 0"});

    if (!(cfg.arm_inductance > 0.0)) out.push_back({"arm_inductance", "must be > 0"});
    if (!(cfg.arm_resistance >= 0.0)) out.push_back({"arm_resistance", "must be >= 0"});

    const auto& l = cfg.load;
    if (!(l.amplitude >= 0.0)) out.push_back({"load.amplitude", "must be >= 0"});
    if (!(l.resistance >= 0.0)) out.push_back({"load.resistance", "must be >= 0"});
    if (!(l.inductance >= 0.0)) out.push_back({"load.inductance", "must be >= 0"});
    if (l.kind == LoadKind::SeriesRL && !(l.resistance > 0.0 || l.inductance > 0.0)) {
        out.push_back({"load", "series R-L load needs resistance or inductance > 0"});
    }

    const auto& num = cfg.numerics;
    if (!(num.time_step > 0.0)) {
        out.push_back({"numerics.time_step", "must be > 0"});
    } else if (cfg.switching_freq > 0.0 && num.time_step > 1.0 / (20.0 * cfg.switching_freq) * (1.0 + 1e-12)) {
        out.push_back({"numerics.time_step", "time_step too coarse: must be <= 1/(20 f_sw)"});
    }
    if (!(num.duration > 0.0)) out.push_back({"numerics.duration", "must be > 0"});
    if (num.diode_resolution_max_iters < 1) {
        out.push_back({"numerics.diode_resolution_max_iters", "must be >= 1"});
    }
    if (num.record_decimation < 1) out.push_back({"numerics.record_decimation", "must be >= 1"});
    return out;
}

ConverterConfig checked_config(ConverterConfig cfg) {
    auto violations = validate_config(cfg);
    if (!violations.empty()) throw InvalidConfig(std::move(violations));
    return cfg;
}

std::vector<ModuleParams> synthesize_mismatched_modules(int n, double base_capacitance,
                                                        double base_esr, double tolerance) {
    if (n < 2) throw std::invalid_argument("synthesize_mismatched_modules: N >= 2 required");
    std::vector<ModuleParams> out(static_cast<std::size_t>(n));
    for (int j = 1; j <= n; ++j) {
        const double frac = static_cast<double>(n - j) / static_cast<double>(n - 1);
        auto& m = out[static_cast<std::size_t>(j - 1)];
        m.capacitance = (1.0 + tolerance - 2.0 * tolerance * frac) * base_capacitance;
        m.esr = (1.0 - tolerance + 2.0 * tolerance * frac) * base_esr;
    }
    return out;
}

double nominal_module_voltage(const ConverterConfig& cfg) {
    return cfg.dc_voltage / static_cast<double>(cfg.modules_per_arm);
}

double k_factor(double modulation_index, double load_angle) {
    const double c = modulation_index * std::cos(load_angle);
    if (std::abs(c) < 1e-12) {
        throw std::domain_error("zero real power, no dc arm component (cos(phi) = 0 or m_a = 0)");
    }
    return 2.0 / c;
}

PhaseCurrent phase_current(const ConverterConfig& cfg) {
    const auto& l = cfg.load;
    if (l.kind == LoadKind::CurrentSource) return {l.amplitude, l.load_angle};
    const double w = 2.0 * kPi * cfg.fundamental_freq;
    const double x = w * l.inductance;
    const double z = std::hypot(l.resistance, x);
    const double v = cfg.modulation_index * cfg.dc_voltage / 2.0;
    return {z > 0.0 ? v / z : 0.0, std::atan2(x, l.resistance)};
}

ConverterState initial_state(const ConverterConfig& cfg) {
    ConverterState s;
    const auto n = static_cast<std::size_t>(cfg.modules_per_arm);
    for (Arm a : {Arm::Upper, Arm::Lower}) {
        auto& arm = s.arm(a);
        arm.cap_voltages.resize(n);
        for (std::size_t j = 0; j < n; ++j) arm.cap_voltages[j] = cfg.modules(a)[j].initial_voltage;
        arm.clamp_currents.assign(n > 0 ? n - 1 : 0, 0.0);
        arm.gate_series.assign(n, false);
    }
    const auto pc = phase_current(cfg);
    const double i_dc = pc.amplitude * cfg.modulation_index * std::cos(pc.angle) / 4.0;
    const double i_out = pc.amplitude * std::sin(-pc.angle);
    s.output_current = i_out;
    s.arm_current_upper = i_dc + 0.5 * i_out;
    s.arm_current_lower = i_dc - 0.5 * i_out;
    return s;
}

}  // namespace dcmmc
