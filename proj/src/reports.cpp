#include "dcmmc/reports.hpp"

#include <yaml-cpp/yaml.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dcmmc/kernels/kernels.hpp"

namespace dcmmc {

std::string format_number(double v) {
    if (std::isnan(v)) return ".nan";
    if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

std::vector<std::string> trace_columns(int n, bool clamp_currents) {
    std::vector<std::string> c{"time"};
    for (int j = 1; j <= n; ++j) c.push_back("u_c_u_" + std::to_string(j));
    for (int j = 1; j <= n; ++j) c.push_back("u_c_l_" + std::to_string(j));
    for (const char* s : {"i_arm_u", "i_arm_l", "v_out", "i_out"}) c.emplace_back(s);
    if (clamp_currents) {
        for (int j = 1; j < n; ++j) c.push_back("i_clamp_u_" + std::to_string(j));
        for (int j = 1; j < n; ++j) c.push_back("i_clamp_l_" + std::to_string(j));
    }
    return c;
}

CsvTraceSink::CsvTraceSink(const std::filesystem::path& path) : path_(path) {
    file_ = std::fopen(path.string().c_str(), "wb");
    if (!file_) throw std::runtime_error("cannot open trace file '" + path.string() + "'");
}

CsvTraceSink::~CsvTraceSink() {
    if (file_) std::fclose(file_);
}

void CsvTraceSink::begin(const ConverterConfig& cfg, bool clamp_currents) {
    clamps_ = clamp_currents;
    const auto cols = trace_columns(cfg.modules_per_arm, clamp_currents);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) std::fputc(',', file_);
        std::fputs(cols[i].c_str(), file_);
    }
    std::fputc('\n', file_);
}

void CsvTraceSink::put(double v, bool first) {
    std::array<char, 32> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    if (!first) std::fputc(',', file_);
    std::fwrite(buf.data(), 1, static_cast<std::size_t>(r.ptr - buf.data()), file_);
}

void CsvTraceSink::row(const ConverterState& s, double v_out) {
    put(s.time, true);
    for (double u : s.upper.cap_voltages) put(u);
    for (double u : s.lower.cap_voltages) put(u);
    put(s.arm_current_upper);
    put(s.arm_current_lower);
    put(v_out);
    put(s.output_current);
    if (clamps_) {
        for (double x : s.upper.clamp_currents) put(x);
        for (double x : s.lower.clamp_currents) put(x);
    }
    std::fputc('\n', file_);
}

void CsvTraceSink::end() {
    if (file_ && std::fflush(file_) != 0) throw std::runtime_error("write failed for '" + path_.string() + "'");
}

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

void seq(YAML::Emitter& e, const char* key, const std::vector<double>& v) {
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (double x : v) e << format_number(x);
    e << YAML::EndSeq;
}

void notes(YAML::Emitter& e, const std::vector<std::string>& n) {
    e << YAML::Key << "notes" << YAML::Value << YAML::BeginSeq;
    for (const auto& s : n) e << s;
    e << YAML::EndSeq;
}

std::string finish(YAML::Emitter& e) {
    if (!e.good()) throw std::logic_error("yaml emitter: " + e.GetLastError());
    return std::string(e.c_str()) + "\n";
}

void loss_body(YAML::Emitter& e, const LossReport& r) {
    num(e, "rms_cap_current", r.rms_cap_current);
    num(e, "rms_arm_current", r.rms_arm_current);
    num(e, "avg_arm_current", r.avg_arm_current);
    num(e, "conduction_loss", r.conduction_loss);
    num(e, "switching_loss", r.switching_loss);
    num(e, "total_arm_loss", r.total_arm_loss);
    num(e, "balancing_loss", r.balancing_loss);
    seq(e, "per_pair_balancing", r.per_pair_balancing);
    num(e, "delta_a", r.delta_a);
    notes(e, r.notes);
}

}  // namespace

std::string metrics_yaml(const ScenarioSpec& spec, const MetricsReport& m) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "scenario" << YAML::Value << spec.name;
    opt(e, "thd_voltage", m.thd_voltage);
    num(e, "spread_final", m.spread_final);
    num(e, "deviation_final", m.deviation_final);
    opt(e, "convergence_time", m.convergence_time);
    num(e, "drift_rate", m.drift_rate);
    seq(e, "mean_voltage_upper", m.mean_upper);
    seq(e, "mean_voltage_lower", m.mean_lower);
    num(e, "energy_audit_residual", m.audit_residual);
    num(e, "energy_audit_relative", m.audit_relative);
    e << YAML::Key << "defaults" << YAML::Value << YAML::BeginMap;
    num(e, "thd_bandwidth", m.thd_bandwidth);
    e << YAML::Key << "thd_cycles" << YAML::Value << m.thd_cycles;
    num(e, "band", m.band);
    e << YAML::Key << "hold_cycles" << YAML::Value << m.hold_cycles;
    e << YAML::Key << "delay_model" << YAML::Value
      << (spec.delay == DelayModel::None ? "none" : "zero_order_hold");
    e << YAML::Key << "kernel_isa" << YAML::Value << std::string(kernels::isa_name(kernels::active_isa()));
    e << YAML::EndMap;
    e << YAML::EndMap;
    return finish(e);
}

std::string loss_yaml(const LossReport& a, const std::optional<SimulatedLoss>& s) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "analytic" << YAML::Value << YAML::BeginMap;
    loss_body(e, a);
    e << YAML::Key << "assumptions" << YAML::Value << YAML::BeginMap;
    num(e, "v0", a.v0);
    num(e, "r", a.r);
    num(e, "r_c", a.r_c);
    num(e, "r_l", a.r_l);
    e << YAML::EndMap;
    e << YAML::EndMap;
    e << YAML::Key << "simulated" << YAML::Value;
    if (!s) {
        e << YAML::Null;
    } else {
        e << YAML::BeginMap;
        num(e, "window_start", s->window_start);
        num(e, "window_end", s->window_end);
        e << YAML::Key << "power" << YAML::Value << YAML::BeginMap;
        num(e, "source", s->source);
        num(e, "load", s->load);
        num(e, "arm_resistance", s->arm_resistance);
        num(e, "capacitor_esr", s->capacitor_esr);
        num(e, "leak", s->leak);
        num(e, "switch_conduction", s->switch_conduction);
        num(e, "diode_conduction", s->diode_conduction);
        num(e, "clamp_inductor", s->clamp_inductor);
        num(e, "clamp_turnoff", s->clamp_turnoff);
        num(e, "switching", s->switching);
        num(e, "total", s->total);
        e << YAML::EndMap;
        num(e, "throughput", s->throughput);
        e << YAML::Key << "baseline_total" << YAML::Value;
        if (s->has_baseline) {
            e << format_number(s->baseline_total);
        } else {
            e << YAML::Null;
        }
        e << YAML::Key << "per_arm" << YAML::Value << YAML::BeginMap;
        loss_body(e, s->report);
        e << YAML::EndMap;
        e << YAML::EndMap;
    }
    e << YAML::EndMap;
    return finish(e);
}

std::string design_yaml(const DesignReport& d) {
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "inputs" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "modules_per_arm" << YAML::Value << d.modules_per_arm;
    num(e, "phase_current", d.phase_current);
    num(e, "load_angle", d.load_angle);
    num(e, "tolerance", d.tolerance);
    num(e, "total_displacement", d.total_displacement);
    num(e, "u_diff_max", d.u_diff_max);
    e << YAML::Key << "u_diff_max_source" << YAML::Value << d.u_diff_max_source;
    num(e, "i_d_max", d.i_d_max);
    e << YAML::Key << "i_d_max_source" << YAML::Value << d.i_d_max_source;
    num(e, "loop_resistance", d.loop_resistance);
    num(e, "effective_capacitance", d.effective_capacitance);
    num(e, "configured_inductance", d.configured_inductance);
    e << YAML::EndMap;
    num(e, "epsilon", d.epsilon);
    num(e, "k_factor", d.k_factor);
    num(e, "dc_arm_current", d.dc_arm_current);
    num(e, "imbalance_current", d.imbalance_current);
    num(e, "drift_per_cycle", d.drift_per_cycle);
    num(e, "compensation_per_cycle", d.compensation_per_cycle);
    num(e, "min_displacement", d.min_displacement);
    num(e, "inductor_lower", d.inductor_lower);
    num(e, "inductor_upper", d.inductor_upper);
    e << YAML::Key << "inductor_feasible" << YAML::Value << d.inductor_feasible;
    e << YAML::Key << "configured_inductance_in_window" << YAML::Value << d.configured_inductance_in_window;
    num(e, "avg_on_time", d.avg_on_time);
    num(e, "avg_balancing_current", d.avg_balancing_current);
    num(e, "peak_diode_current", d.peak_diode_current);
    notes(e, d.notes);
    e << YAML::EndMap;
    return finish(e);
}

std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
    std::string out = sweep_axis_name(axis) +
                      ",ok,spread_final,deviation_final,convergence_time,total_loss,balancing_loss_analytic,"
                      "throughput,error\n";
    for (const auto& r : rows) {
        out += format_number(r.value);
        out += r.ok ? ",true," : ",false,";
        out += format_number(r.spread_final) + "," + format_number(r.deviation_final) + ",";
        out += r.convergence_time ? format_number(*r.convergence_time) : std::string();
        out += "," + format_number(r.total_loss) + "," + format_number(r.balancing_loss_analytic) + "," +
               format_number(r.throughput) + ",";
        std::string err = r.error;
        for (char& c : err) {
            if (c == ',' || c == '\n' || c == '"') c = ' ';
        }
        out += err + "\n";
    }
    return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

}  // namespace dcmmc
