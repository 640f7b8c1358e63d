// Acceptance checks: one PASS/FAIL line per criterion.
//   acceptance                 all criteria
//   acceptance --criterion N   only N; exit status 0 iff it passes

#include "temple/errors.hpp"
#include "temple/experiments.hpp"
#include "temple/parallel.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

using namespace temple;

namespace {

namespace fs = std::filesystem;

json load(const std::string& name) {
    std::ifstream in(std::string(TEMPLE_SOURCE_DIR) + "/configs/" + name + ".json");
    if (!in) throw ConfigError("missing config " + name);
    return json::parse(in);
}

ExperimentConfig config(const std::string& name) {
    ExperimentConfig c = config_from_json(load(name));
    c.output_dir = (fs::temp_directory_path() / "temple_acceptance" / name).string();
    return c;
}

double num(const json& j) {
    if (j.is_number()) return j.get<double>();
    return std::numeric_limits<double>::infinity();
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

const std::vector<std::string> kCatalog{"minkowski", "flrw", "flrw_exp", "perturbed"};

Outcome closed_form() {
    Timer t;
    EstimateReport r = run_closed_form(config("closed-form_minkowski"));
    const double ew = num(r.metrics["max_omega_error"]), el = num(r.metrics["max_lambda_error"]);
    const int pts = r.metrics["points"].get<int>();
    const double s = t.seconds();
    // same sweep through integrated geodesics and finite-difference Christoffels
    EstimateReport rn = run_closed_form(config("closed-form_numerical"));
    const double nw = num(rn.metrics["max_omega_error"]), nl = num(rn.metrics["max_lambda_error"]);
    return {ew < 1e-8 && el < 1e-8 && nw < 1e-8 && nl < 1e-8 && pts == 1000 && s < 10,
            "omega err " + fmt(ew) + ", lambda err " + fmt(el) + " (< 1e-8) over " + std::to_string(pts) +
                " points, " + fmt(s) + " s (< 10 s); integrated path " + fmt(nw) + "/" + fmt(nl)};
}

Outcome gradient() {
    Timer t;
    EstimateReport flat = run_gradient_scaling(config("gradient_minkowski"));
    EstimateReport pert = run_gradient_scaling(config("gradient_perturbed"));
    bool ok = num(flat.metrics["max_dev"]) < 1e-6;
    double worst_spread = 0;
    bool decays = true;
    for (const auto& c : pert.metrics["centers"]) {
        worst_spread = std::max(worst_spread, num(c["ratio_spread"]));
        if (!(num(c["dev_smallest_shell"]) < num(c["dev_largest_shell"]))) decays = false;
    }
    ok = ok && worst_spread < 3 && decays;
    const double s = t.seconds();
    return {ok && s < 60, "minkowski max dev " + fmt(num(flat.metrics["max_dev"])) + " (< 1e-6); perturbed dev/lambda spread " +
                              fmt(worst_spread) + " (< 3) over " + std::to_string(pert.metrics["centers"].size()) +
                              " centers, dev(0.05r) < dev(0.4r): " + (decays ? "yes" : "no") + ", " + fmt(s) + " s (< 60 s)"};
}

Outcome axis() {
    Timer t;
    double worst = 0;
    int samples = 0;
    for (const auto& k : kCatalog) {
        EstimateReport r = run_axis_identities(config("axis_" + k));
        worst = std::max(worst, num(r.metrics["max_g_dt_dl_plus_1"]));
        samples = std::min(samples == 0 ? 1 << 30 : samples, r.metrics["samples"].get<int>());
    }
    const double s = t.seconds();
    return {worst < 1e-6 && samples >= 200 && s < 30, "max |g(d_t,d_lambda)+1| " + fmt(worst) + " (< 1e-6), " +
                                                            std::to_string(samples) + " samples per metric, " + fmt(s) +
                                                            " s (< 30 s)"};
}

Outcome optical() {
    Timer t;
    double worst = 0, flat = 0;
    for (const auto& k : kCatalog) {
        EstimateReport r = run_optical_lipschitz(config("optical-lipschitz_" + k));
        const double sup = num(r.metrics["sup_ratio"]);
        worst = std::max(worst, sup);
        if (k == "minkowski") flat = sup;
    }
    const double s = t.seconds();
    return {worst <= 2.05 && flat <= std::sqrt(2.0) + 0.02 && s < 120,
            "max sup ratio " + fmt(worst) + " (<= 2.05), minkowski " + fmt(flat) + " (<= sqrt2 + 0.02), " + fmt(s) +
                " s (< 120 s)"};
}

Outcome nulldist() {
    Timer t;
    ExperimentConfig c = config("nulldist_minkowski");
    EstimateReport r = run_nulldist(c);
    const double ce = num(r.metrics["max_causal_relative_error"]), se = num(r.metrics["max_spacelike_relative_error"]);
    const int nonmono = r.metrics["nonmonotone_pairs"].get<int>();
    const std::size_t pairs = r.metrics["pairs"].get<std::size_t>();
    const double s = t.seconds();
    const double budget = 180.0 * pairs / 50.0;
    const bool ok = ce <= 0.02 && se <= 0.05 && nonmono == 0 && r.metrics["lower_le_upper"].get<bool>() &&
                    num(r.metrics["max_causal_lower_error"]) < 1e-12 && c.resolution.refinements == 2 && s < budget;
    return {ok, "causal err " + fmt(100 * ce) + "% (<= 2%), spacelike err " + fmt(100 * se) + "% (<= 5%), nonmonotone " +
                    std::to_string(nonmono) + ", " + std::to_string(pairs) + " pairs in " + fmt(s) + " s (< " +
                    fmt(budget) + " s)"};
}

Outcome causality() {
    bool ok = true;
    std::string detail;
    for (const char* k : {"minkowski", "flrw", "perturbed"}) {
        Timer t;
        EstimateReport r = run_causality_encoding(config(std::string("causality_") + k));
        const int off = r.metrics["off_diagonal"].get<int>();
        const int n = r.metrics["pairs"].get<int>();
        const double s = t.seconds();
        ok = ok && off == 0 && n == 500 && s < 300;
        detail += std::string(detail.empty() ? "" : "; ") + k + ": off-diagonal " + std::to_string(off) + "/" +
                  std::to_string(n) + " (band " + std::to_string(r.metrics["boundary_band_excluded"].get<int>()) + "), " +
                  fmt(s) + " s";
    }
    return {ok, detail + " (0 off-diagonal, < 300 s each)"};
}

Outcome bilipschitz() {
    bool ok = true;
    double worst_drift = 0;
    std::string times;
    for (const auto& k : kCatalog) {
        Timer t;
        EstimateReport r = run_bilipschitz(config("bilipschitz_" + k));
        const double s = t.seconds();
        for (const char* env : {"max_dhat_over_dE", "max_dE_over_dhat", "max_dgR_over_dhat", "max_dhat_over_dgR"}) {
            const json& e = r.metrics["envelopes"][env];
            const double d = num(e["drift"]);
            worst_drift = std::max(worst_drift, d);
            if (!std::isfinite(num(e["full"])) || !(d < 0.25)) ok = false;
        }
        ok = ok && s < 300;
        times += (times.empty() ? "" : "/") + fmt(s);
    }
    return {ok, "all envelopes finite, worst drift " + fmt(100 * worst_drift) + "% (< 25%), runtimes " + times +
                    " s (< 300 s each)"};
}

Outcome jacobi() {
    Timer t;
    EstimateReport r = run_jacobi(config("jacobi_perturbed"));
    bool ok = true;
    std::string ratios;
    for (const auto& v : r.metrics["successive_ratios"]) {
        const double x = num(v);
        ratios += (ratios.empty() ? "" : ", ") + fmt(x);
        if (!(x >= 1.6 && x <= 2.4)) ok = false;
    }
    const double s = t.seconds();
    return {ok && s < 60, "successive ratios " + ratios + " (in [1.6, 2.4]), " + fmt(s) + " s (< 60 s)"};
}

Outcome isometry() {
    Timer t;
    EstimateReport tr = run_isometry_check(config("isometry_translation"));
    const double a = num(tr.metrics["stage_a_time_deviation"]), b = num(tr.metrics["stage_b_max_relative_gap"]),
                 c = num(tr.metrics["stage_c_pullback_deviation"]);
    const bool translation = a < 1e-6 && b < 1e-6 && c < 1e-6 && tr.verdict == "pass";

    EstimateReport st = run_isometry_check(config("isometry_stretch"));
    const double gap = num(st.metrics["stage_b_max_relative_gap"]);
    const bool stretch = st.metrics["stage_a_pass"].get<bool>() && !st.metrics["stage_b_pass"].get<bool>() && gap > 0.25 &&
                         !st.metrics["stage_c_pass"].get<bool>();

    bool rejected = false;
    try {
        run_isometry_check(config("isometry_rescaled"));
    } catch (const PreconditionError&) {
        rejected = true;
    }
    const double s = t.seconds();
    return {translation && stretch && rejected && s < 180,
            "translation stages " + fmt(a) + "/" + fmt(b) + "/" + fmt(c) + " (< 1e-6); stretch stage (b) gap " +
                fmt(100 * gap) + "% (> 25%); rescaled metric rejected: " + (rejected ? "yes" : "no") + ", " + fmt(s) +
                " s (< 180 s)"};
}

// report.json with the timestamp line removed
std::string report_without_timestamp(const std::string& dir) {
    std::ifstream in(dir + "/report.json");
    std::string line, out;
    while (std::getline(in, line))
        if (line.find("\"timestamp\"") == std::string::npos) out += line + "\n";
    return out;
}

Outcome determinism() {
    Timer t;
    // one reduced-size config per experiment; the property does not depend on sample counts
    struct Item {
        std::string experiment, config;
        int samples;
    };
    const std::vector<Item> items{
        {"bilipschitz", "bilipschitz_perturbed", 40}, {"causality", "causality_flrw", 60},
        {"gradient", "gradient_perturbed", 0},        {"isometry", "isometry_stretch", 10},
        {"nulldist", "nulldist_minkowski", 6},        {"chart-dump", "chart-dump_minkowski", 0},
        {"axis", "axis_perturbed", 50},               {"optical-lipschitz", "optical-lipschitz_perturbed", 100},
        {"jacobi", "jacobi_perturbed", 4},            {"anti-lipschitz", "anti-lipschitz_minkowski", 100},
        {"closed-form", "closed-form_minkowski", 200}};
    std::vector<std::string> differing;
    for (const auto& it : items) {
        json j = load(it.config);
        if (it.samples > 0) j["resolution"]["samples"] = it.samples;
        std::string dirs[2];
        for (int run = 0; run < 2; ++run) {
            ExperimentConfig c = config_from_json(j);
            c.output_dir = (fs::temp_directory_path() / "temple_acceptance" / "determinism" /
                            (it.config + (run == 0 ? "_serial" : "_threads")))
                               .string();
            set_threads(run == 0 ? 1 : 4);
            emit_report(run_experiment(it.experiment, c), c);
            dirs[run] = c.output_dir;
        }
        set_threads(0);
        const std::string a = report_without_timestamp(dirs[0]), b = report_without_timestamp(dirs[1]);
        if (a.empty() || a != b) differing.push_back(it.experiment);
    }
    std::string diff;
    for (const auto& d : differing) diff += " " + d;
    return {differing.empty(), std::to_string(items.size()) + " experiments, serial vs 4 threads, differing:" +
                                   (diff.empty() ? std::string(" none") : diff) + ", " + fmt(t.seconds()) + " s"};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {"flat-space chart closed form", closed_form},
    {"eikonal gradient estimate", gradient},
    {"axis identity g(d_t, d_lambda) = -1", axis},
    {"optical function Lipschitz bound", optical},
    {"null distance flat-space oracle", nulldist},
    {"local causality encoding", causality},
    {"bi-Lipschitz charts", bilipschitz},
    {"Jacobi estimate linear in eps", jacobi},
    {"isometry harness", isometry},
    {"determinism", determinism}};

bool run_one(int k) {
    const auto& [name, fn] = kCriteria[k - 1];
    Outcome o;
    try {
        o = fn();
    } catch (const std::exception& e) {
        o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d %s: %s  %s\n", k, name.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    return o.pass;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
            return 2;
        }
    }
    if (only < 0 || only > static_cast<int>(kCriteria.size())) {
        std::fprintf(stderr, "criterion must be in 1..%zu\n", kCriteria.size());
        return 2;
    }
    bool all = true;
    for (int k = 1; k <= static_cast<int>(kCriteria.size()); ++k)
        if (only == 0 || only == k) all = run_one(k) && all;
    return all ? 0 : 1;
}
