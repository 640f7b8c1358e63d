#include <doctest.h>

#include "temple/errors.hpp"
#include "temple/experiments.hpp"
#include "temple/parallel.hpp"

#include <filesystem>
#include <fstream>

using namespace temple;

namespace {

json load(const std::string& name) {
    std::ifstream in(std::string(TEMPLE_SOURCE_DIR) + "/configs/" + name + ".json");
    REQUIRE(in);
    return json::parse(in);
}

}  // namespace

TEST_CASE("config parsing") {
    json j = load("causality_minkowski");
    ExperimentConfig c = config_from_json(j);
    CHECK(c.experiment == "causality");
    CHECK(c.seed == 42u);
    CHECK(c.resolution.samples == 500);
    CHECK(!c.r);
    CHECK(c.p.size() == 3);

    json bad = j;
    bad.erase("metric_spec");
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["chart"]["r"] = "large";
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    bad = j;
    bad["p"] = {0, 0};
    CHECK_THROWS_AS(config_from_json(bad), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
    CHECK_THROWS_AS(run_experiment("teleport", c), ConfigError);
}

TEST_CASE("gradient rejects centers outside U_p") {
    json j = load("gradient_minkowski");
    j["options"] = {{"centers", {{0.4, 0.0, 0.0, 0.0}}}};
    CHECK_THROWS_AS(run_gradient_scaling(config_from_json(j)), DomainError);
}

TEST_CASE("gradient on minkowski is flat everywhere") {
    EstimateReport r = run_gradient_scaling(config_from_json(load("gradient_minkowski")));
    CHECK(r.verdict == "pass");
    CHECK(r.metrics["max_dev"].get<double>() < 1e-6);
    CHECK(r.metrics["C_hat_spread"].get<double>() == 1.0);
}

TEST_CASE("isometry eikonal gate") {
    CHECK_THROWS_AS(run_isometry_check(config_from_json(load("isometry_rescaled"))), PreconditionError);
    json j = load("isometry_translation");
    j["options"]["region"] = {{-3, 0}, {-0.5, 0.5}, {-0.5, 0.5}};
    CHECK_THROWS_AS(run_isometry_check(config_from_json(j)), DomainError);
}

TEST_CASE("report schema and determinism") {
    json j = load("causality_minkowski");
    j["resolution"]["samples"] = 40;
    ExperimentConfig c = config_from_json(j);
    c.output_dir = (std::filesystem::temp_directory_path() / "temple_unit_report").string();

    set_threads(1);
    EstimateReport a = run_experiment("causality", c);
    set_threads(4);
    EstimateReport b = run_experiment("causality", c);
    set_threads(0);
    CHECK(report_json(a, c).dump() == report_json(b, c).dump());

    auto files = emit_report(a, c);
    CHECK(files.size() == 2u);
    std::ifstream in(c.output_dir + "/report.json");
    json rep = json::parse(in);
    for (const char* key : {"experiment", "config_echo", "verdict", "metrics", "table", "anomalies", "timestamp"})
        CHECK(rep.contains(key));
    CHECK((rep["verdict"] == "pass" || rep["verdict"] == "fail" || rep["verdict"] == "inconclusive"));
    CHECK(rep["config_echo"]["metric_spec"]["catalog_id"] == "minkowski");

    EstimateReport empty;
    empty.experiment = "empty";
    ExperimentConfig ce = c;
    ce.output_dir += "_empty";
    emit_report(empty, ce);
    std::ifstream in2(ce.output_dir + "/report.json");
    json rep2 = json::parse(in2);
    CHECK(rep2["table"] == json::array());
    CHECK(rep2["verdict"] == "inconclusive");
    CHECK(exit_code(empty) == 2);
}

TEST_CASE("closed form and chart dump") {
    json j = load("closed-form_minkowski");
    j["resolution"]["samples"] = 100;
    EstimateReport r = run_closed_form(config_from_json(j));
    CHECK(r.verdict == "pass");
    EstimateReport d = run_chart_dump(config_from_json(load("chart-dump_minkowski")));
    REQUIRE(d.files.size() == 2u);
    CHECK(d.files[0].second.rfind("t,x1,x2,x3,z0", 0) == 0);
    CHECK(d.metrics["chart_points"].get<int>() > 0);
}
