// Command-line front end: simulate, design, loss, sweep and preset export.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "dcmmc/circuit_sim.hpp"
#include "dcmmc/reports.hpp"
#include "dcmmc/scenario.hpp"

namespace fs = std::filesystem;
using namespace dcmmc;

namespace {

std::vector<double> parse_values(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw std::invalid_argument("bad value '" + item + "' in --values");
        out.push_back(v);
    }
    return out;
}

void print_summary(const RunResult& r) {
    const auto& m = r.metrics;
    std::printf("scenario        %s\n", r.scenario.name.c_str());
    std::printf("steps           %lld (%.1f s wall)\n", r.trace.steps, r.elapsed);
    if (m.thd_voltage) std::printf("thd_voltage     %.4f %%\n", 100.0 * *m.thd_voltage);
    std::printf("spread_final    %.4f %%\n", 100.0 * m.spread_final);
    std::printf("deviation_final %.4f %%\n", 100.0 * m.deviation_final);
    if (m.convergence_time) {
        std::printf("convergence     %.3f s\n", *m.convergence_time);
    } else {
        std::printf("convergence     none (drift %.4g V/s)\n", m.drift_rate);
    }
    std::printf("energy audit    %.3g relative\n", m.audit_relative);
    if (r.simulated) std::printf("leg dissipation %.2f W\n", r.simulated->total);
    for (const auto& n : r.notes) std::printf("note: %s\n", n.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diode-clamped MMC leg simulator with displaced phase-shifted carriers"};
    app.require_subcommand(1);

    std::string input;
    std::optional<double> delta_a, duration;
    std::string out_dir;
    bool clamp_currents = false, quiet = false, paired = false;

    auto* sim = app.add_subcommand("simulate", "Run a scenario and write trace and reports");
    sim->alias("run");
    sim->add_option("scenario", input, "Scenario file or preset name")->required();
    sim->add_option("--delta-a", delta_a, "Displacement (replaces every scheduled value)");
    sim->add_option("--duration", duration, "Simulated time in seconds");
    sim->add_option("--out", out_dir, "Output directory (default out/<name>)");
    sim->add_flag("--clamp-currents", clamp_currents, "Add clamp currents to the trace");
    sim->add_flag("--paired-baseline", paired, "Rerun at zero displacement for the balancing loss");
    sim->add_flag("-q,--quiet", quiet, "No progress output");

    std::string design_out;
    auto* design = app.add_subcommand("design", "Sizing rules for a scenario");
    design->add_option("scenario", input, "Scenario file or preset name")->required();
    design->add_option("--out", design_out, "Write the report to this file");

    std::string loss_out;
    auto* loss = app.add_subcommand("loss", "Analytic loss estimate for a scenario");
    loss->add_option("scenario", input, "Scenario file or preset name")->required();
    loss->add_option("--delta-a", delta_a, "Displacement");
    loss->add_option("--out", loss_out, "Write the report to this file");

    std::string axis_name, values_text, sweep_out;
    unsigned workers = 0;
    auto* sw = app.add_subcommand("sweep", "Run a scenario over a parameter axis");
    sw->add_option("scenario", input, "Scenario file or preset name")->required();
    sw->add_option("--axis", axis_name, "delta_a, i_p, tolerance, f_sw or clamp_l")->required();
    sw->add_option("--values", values_text, "Comma-separated values")->required();
    sw->add_option("--duration", duration, "Simulated time in seconds");
    sw->add_option("--workers", workers, "Parallel runs (0 = all cores)");
    sw->add_option("--out", sweep_out, "Write the summary table to this file");

    std::string preset_dir;
    auto* presets = app.add_subcommand("presets", "List presets or write them as scenario files");
    presets->add_option("--write", preset_dir, "Directory to write <preset>.yaml files into");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*presets) {
            for (const auto& name : preset_names()) {
                if (preset_dir.empty()) {
                    std::printf("%s\n", name.c_str());
                } else {
                    fs::create_directories(preset_dir);
                    write_text_file(fs::path(preset_dir) / (name + ".yaml"), emit_scenario(preset(name)));
                }
            }
            return 0;
        }

        auto spec = load_scenario(input);
        if (duration) spec.leg.numerics.duration = *duration;

        if (*sim) {
            if (delta_a) set_displacement(spec, *delta_a);
            if (clamp_currents) spec.outputs.clamp_currents = true;
            if (paired) spec.outputs.paired_baseline = true;
            RunOptions opts;
            opts.out_dir = out_dir.empty() ? fs::path("out") / spec.name : fs::path(out_dir);
            if (!quiet) {
                const double total = spec.leg.numerics.duration;
                opts.progress = [total](double t) {
                    std::fprintf(stderr, "\r%6.2f / %.2f s", t, total);
                    std::fflush(stderr);
                };
            }
            const auto r = run_scenario(spec, opts);
            if (!quiet) std::fprintf(stderr, "\n");
            print_summary(r);
            std::printf("written to %s\n", opts.out_dir->string().c_str());
            return 0;
        }
        if (*design) {
            const auto text = design_yaml(scenario_design_report(spec));
            if (design_out.empty()) {
                std::cout << text;
            } else {
                write_text_file(design_out, text);
            }
            return 0;
        }
        if (*loss) {
            const auto cfg = scenario_config(spec);
            const auto text = loss_yaml(analytic_loss(cfg, delta_a.value_or(peak_displacement(spec))), std::nullopt);
            if (loss_out.empty()) {
                std::cout << text;
            } else {
                write_text_file(loss_out, text);
            }
            return 0;
        }
        if (*sw) {
            const auto axis = parse_sweep_axis(axis_name);
            const auto rows = sweep(spec, axis, parse_values(values_text), workers);
            const auto text = sweep_csv(axis, rows);
            if (sweep_out.empty()) {
                std::cout << text;
            } else {
                write_text_file(sweep_out, text);
            }
            return 0;
        }
    } catch (const SimulationDiverged& e) {
        std::fprintf(stderr, "error: simulation diverged: %s (last valid state at t = %g s)\n", e.what(),
                     e.last_valid().time);
        return 3;
    } catch (const InvalidConfig& e) {
        std::fprintf(stderr, "error: invalid configuration\n");
        for (const auto& v : e.violations()) std::fprintf(stderr, "  %s: %s\n", v.field.c_str(), v.message.c_str());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
