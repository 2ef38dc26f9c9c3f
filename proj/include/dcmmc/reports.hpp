#pragma once

// Trace and report writers. Numbers use the shortest round-trip decimal
// form so reruns produce identical bytes.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dcmmc/circuit_sim.hpp"
#include "dcmmc/design_rules.hpp"
#include "dcmmc/loss_model.hpp"
#include "dcmmc/metrics.hpp"
#include "dcmmc/scenario.hpp"

namespace dcmmc {

/// Shortest decimal string that parses back to v.
std::string format_number(double v);

/// Header columns of a trace file.
std::vector<std::string> trace_columns(int modules_per_arm, bool clamp_currents);

/// Comma-separated trace with one row per recorded state.
class CsvTraceSink : public TraceSink {
public:
    explicit CsvTraceSink(const std::filesystem::path& path);
    ~CsvTraceSink() override;
    CsvTraceSink(const CsvTraceSink&) = delete;
    CsvTraceSink& operator=(const CsvTraceSink&) = delete;

    void begin(const ConverterConfig& cfg, bool clamp_currents) override;
    void row(const ConverterState& s, double v_out) override;
    void end() override;

private:
    void put(double v, bool first = false);

    std::FILE* file_ = nullptr;
    std::filesystem::path path_;
    bool clamps_ = false;
};

std::string metrics_yaml(const ScenarioSpec& spec, const MetricsReport& m);
std::string loss_yaml(const LossReport& analytic, const std::optional<SimulatedLoss>& simulated);
std::string design_yaml(const DesignReport& d);
std::string sweep_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dcmmc
