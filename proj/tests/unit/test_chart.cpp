#include <doctest.h>

#include "temple/chart.hpp"
#include "temple/errors.hpp"
#include "temple/null_distance.hpp"
#include "temple/sampling.hpp"

#include <cmath>

using namespace temple;

namespace {

MetricPtr perturbed() { return make_perturbed_minkowski(0.05, Bump{Vec::Zero(4), 1.0}, 3); }

}  // namespace

TEST_CASE("minkowski chart closed form") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.5);
    TempleChart c = build_chart(f, Vec::Zero(4), 0.3);
    CHECK((c.eta(0.0) - Vec::Zero(4)).norm() < 1e-12);
    CHECK((c.forward(0.2, make_vec({0.3, 0, 0})) - make_vec({0.5, 0.3, 0, 0})).norm() < 1e-12);
    CHECK((c.forward(0.1, Vec::Zero(3)) - c.eta(0.1)).norm() < 1e-12);

    ChartInverse inv = c.invert(make_vec({0.5, 0.3, 0, 0}));
    CHECK(inv.t == doctest::Approx(0.2).epsilon(1e-10));
    CHECK((inv.x - make_vec({0.3, 0, 0})).norm() < 1e-10);

    // omega = s - |y|, lambda = |y| at random off-axis points
    Rng rng(5);
    double worst = 0;
    for (int k = 0; k < 200; ++k) {
        Vec y = rng.in_ball(3, 0.25);
        if (y.norm() < 0.01) continue;
        double t = rng.uniform(-0.25, 0.25);
        Vec z(4);
        z << t + y.norm(), y;
        OpticalSample s = optical_and_radial(c, z);
        worst = std::max(worst, std::abs(s.omega - (z[0] - y.norm())) + std::abs(s.lambda - y.norm()));
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("axis point is flagged") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.5);
    TempleChart c = build_chart(f, Vec::Zero(4), 0.3);
    ChartInverse inv = c.invert(c.eta(0.1));
    CHECK(inv.t == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(inv.x.norm() < 1e-6);
    CHECK(inv.near_axis);
}

TEST_CASE("flrw eta is comoving") {
    auto m = make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5);
    FrameField f = build_frame(m, make_vec({1, 0, 0, 0}), 0.4);
    TempleChart c = build_chart(f, make_vec({1, 0, 0, 0}), 0.1);
    for (double s : {-0.08, 0.0, 0.05}) CHECK((c.eta(s) - make_vec({1 + s, 0, 0, 0})).norm() < 1e-9);
}

TEST_CASE("perturbed round trip and null shots") {
    auto m = perturbed();
    FrameField f = build_frame(m, make_vec({0, 0.3, 0, 0}), 0.6);
    TempleChart c = build_chart(f, make_vec({0, 0.3, 0, 0}), 0.1);
    auto pts = chart_samples(c, 60, 9, 0.01);
    double worst = 0;
    for (const Vec& tx : pts) {
        Vec z = c.forward(tx[0], tx.tail(3));
        ChartInverse inv = c.invert(z);
        worst = std::max(worst, std::abs(inv.t - tx[0]) + (inv.x - tx.tail(3)).norm());
        Vec w = c.shot_velocity(tx[0], tx.tail(3));
        CHECK(std::abs(inner(m->g_raw(c.eta(tx[0])), w, w)) < 1e-10);
    }
    CHECK(worst < 1e-7);

    // omega increases along eta
    for (double t : {-0.05, 0.0, 0.07}) CHECK(c.invert(c.eta(t)).t == doctest::Approx(t).epsilon(1e-8));
}

TEST_CASE("axis identities") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.5);
    TempleChart flat = build_chart(f, Vec::Zero(4), 0.2);
    EstimateReport r = axis_identities(flat, 40, 1);
    CHECK(r.verdict == "pass");
    CHECK(r.metrics["max_g_dt_dt_plus_1"].get<double>() < 1e-8);
    CHECK(r.metrics["max_g_dl_e0_plus_1"].get<double>() < 1e-8);

    auto pm = perturbed();
    FrameField pf = build_frame(pm, make_vec({0, 0.3, 0, 0}), 0.6);
    TempleChart pc = build_chart(pf, make_vec({0, 0.3, 0, 0}), 0.1);
    EstimateReport pr = axis_identities(pc, 40, 1);
    CHECK(pr.metrics["max_g_dt_dl_plus_1"].get<double>() < 1e-6);
    CHECK(pr.metrics["max_jacobi_vs_fd"].get<double>() < 1e-5);
    // no offset at the axis; the scatter is quadratic in lambda, so the linear intercept sits below zero
    CHECK(pr.metrics["fit_dt_dt_intercept"].get<double>() < 1e-5);
    for (const auto& row : pr.table)
        if (row["lambda"].get<double>() < 0.02) CHECK(row["g_dt_dt_plus_1"].get<double>() < 1e-4);
}

TEST_CASE("gradient norm") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.5);
    TempleChart c = build_chart(f, Vec::Zero(4), 0.2);
    RiemannianizedMetric gR = riemannianize(f);
    OpticalSample s = optical_and_radial(c, make_vec({0.15, 0.05, 0.04, 0}), &gR);
    REQUIRE(s.grad_norm_gR);
    CHECK(*s.grad_norm_gR == doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
    CHECK(!optical_and_radial(c, c.eta(0.05), &gR).grad_norm_gR);

    // finite differences agree with the analytic g(d_lambda, e0) form in curved space
    auto pm = perturbed();
    FrameField pf = build_frame(pm, make_vec({0, 0.3, 0, 0}), 0.6);
    TempleChart pc = build_chart(pf, make_vec({0, 0.3, 0, 0}), 0.1);
    RiemannianizedMetric pgR = riemannianize(pf);
    for (const Vec& tx : chart_samples(pc, 10, 4, 0.05)) {
        OpticalSample ps = optical_and_radial(pc, pc.forward(tx[0], tx.tail(3)), &pgR);
        REQUIRE(ps.grad_norm_gR);
        CHECK(std::abs(*ps.grad_norm_gR - gradient_norm_oracle(pc, tx[0], tx.tail(3))) < 1e-5);
    }
}

TEST_CASE("gradient experiment decays towards the axis") {
    auto pm = perturbed();
    FrameField pf = build_frame(pm, make_vec({0, 0.3, 0, 0}), 0.6);
    TempleChart pc = build_chart(pf, make_vec({0, 0.3, 0, 0}), 0.15);
    RiemannianizedMetric gR = riemannianize(pf);
    EstimateReport r = gradient_estimate_experiment(pc, gR);
    CHECK(r.verdict == "pass");
    CHECK(r.metrics["ratio_spread"].get<double>() < 3.0);
    CHECK(r.metrics["dev_smallest_shell"].get<double>() < r.metrics["dev_largest_shell"].get<double>());
    GradientOptions bad;
    bad.lambda_fractions = {0.0005};
    CHECK_THROWS_AS(gradient_estimate_experiment(pc, gR, bad), PreconditionError);
}

TEST_CASE("causal indicator") {
    auto m = make_minkowski(3, cube(4, -2, 2));
    FrameField f = build_frame(m, Vec::Zero(4), 1.5);
    TempleChart c = build_chart(f, Vec::Zero(4), 1.2);
    CHECK(causal_indicator(c, make_vec({1, 0.5, 0, 0})) == Relation::future);
    CHECK(causal_indicator(c, make_vec({0.5, 1, 0, 0})) == Relation::elsewhere);
    CHECK(causal_indicator(c, make_vec({0.6, 0.6, 0, 0})) == Relation::boundary);

    // agreement with the exp-inversion oracle away from the cone
    Rng rng(3);
    int compared = 0;
    for (int k = 0; k < 100; ++k) {
        Vec z = rng.in_ball(4, 0.5);
        CausalVerdict v = causal_oracle(*m, Vec::Zero(4), z);
        if (std::abs(v.margin) < 1e-3 || z.tail(3).norm() < 1e-2) continue;
        ++compared;
        CHECK((v.relation == CausalRelation::future) == (causal_indicator(c, z) == Relation::future));
    }
    CHECK(compared > 50);
}

TEST_CASE("omega lipschitz on minkowski") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.5);
    TempleChart c = build_chart(f, Vec::Zero(4), 0.2);
    RiemannianizedMetric gR = riemannianize(f);
    GRCache cache(gR, chart_image_box(c), 3);
    EstimateReport r = omega_lipschitz_experiment(c, cache, 200, 7);
    CHECK(r.metrics["sup_ratio"].get<double>() <= std::sqrt(2.0) + 0.02);
}
