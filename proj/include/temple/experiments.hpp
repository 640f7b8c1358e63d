#pragma once

#include "temple/chart.hpp"
#include "temple/null_distance.hpp"
#include "temple/report.hpp"
#include "temple/sampling.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace temple {

struct Resolution {
    std::optional<double> h;     // absolute spacing; default h_factor * region size
    double h_factor = 0.025;
    int refinements = 2;
    int samples = 500;
    int directions = 0;          // 0: experiment default
};

struct ExperimentConfig {
    std::string experiment;
    json metric_spec;
    json time_function = "coordinate";
    std::uint64_t seed = 42;
    Resolution resolution;
    Vec p;                          // frame center
    double frame_radius = 0.5;      // requested R_p
    std::optional<Vec> q;           // chart center, default p
    std::optional<double> r;        // chart radius, default: uniform Temple radius
    std::string output_dir = "out";
    json extra = json::object();    // experiment-specific keys
    json echo;                      // the config as read
};

ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::string& path);

// Metric, frame and uniform radius shared by the chart-based experiments.
struct Setup {
    MetricPtr metric;
    std::unique_ptr<FrameField> frame;
    UniformRadius uniform;
    double r = 0.0;          // chart radius
    double up_radius = 0.0;  // U_p = coordinate ball of this radius about p
    TimeFunction tau;
};
Setup make_setup(const ExperimentConfig& cfg);
// Coordinate box of U_p padded by pad on every side.
Box up_box(const Setup& s, double pad);
// Uniform samples in U_p.
std::vector<Vec> up_points(const Setup& s, int count, Rng& rng);

EstimateReport run_bilipschitz(const ExperimentConfig& cfg);
EstimateReport run_causality_encoding(const ExperimentConfig& cfg);
EstimateReport run_gradient_scaling(const ExperimentConfig& cfg);
EstimateReport run_isometry_check(const ExperimentConfig& cfg);
EstimateReport run_nulldist(const ExperimentConfig& cfg);
EstimateReport run_chart_dump(const ExperimentConfig& cfg);
EstimateReport run_axis_identities(const ExperimentConfig& cfg);
EstimateReport run_optical_lipschitz(const ExperimentConfig& cfg);
EstimateReport run_jacobi(const ExperimentConfig& cfg);
EstimateReport run_anti_lipschitz(const ExperimentConfig& cfg);
EstimateReport run_closed_form(const ExperimentConfig& cfg);

EstimateReport run_experiment(const std::string& name, const ExperimentConfig& cfg);
const std::vector<std::string>& experiment_names();

// report.json without the timestamp, used for determinism checks.
json report_json(const EstimateReport& report, const ExperimentConfig& cfg);
// Writes report.json (with timestamp), table.csv and report.files into cfg.output_dir.
std::vector<std::string> emit_report(const EstimateReport& report, const ExperimentConfig& cfg);
int exit_code(const EstimateReport& report);

}  // namespace temple
