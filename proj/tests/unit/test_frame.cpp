#include <doctest.h>

#include "temple/errors.hpp"
#include "temple/frame.hpp"
#include "temple/sampling.hpp"

#include <cmath>

using namespace temple;

namespace {

MetricPtr perturbed() { return make_perturbed_minkowski(0.05, Bump{Vec::Zero(4), 1.0}, 3); }

Vec random_w(Rng& rng, int d, double R) {
    Vec tx(d);
    tx[0] = rng.uniform(-R, R);
    tx.tail(d - 1) = rng.in_ball(d - 1, R);
    return tx;
}

double orthonormality_defect(const Mat& g, const Mat& E) {
    Mat G = E.transpose() * g * E;
    Mat eta = Mat::Identity(E.cols(), E.cols());
    eta(0, 0) = -1;
    return (G - eta).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("minkowski frame") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.8);
    CHECK(f.radius() == 0.8);
    CHECK((f.frame_at_center() - Mat::Identity(4, 4)).norm() == 0.0);
    Vec tx = make_vec({0.2, 0.1, -0.3, 0.05});
    CHECK((f.fermi_map(tx) - tx).norm() == 0.0);
    CHECK((f.fermi_inverse(tx) - tx).norm() == 0.0);
    CHECK_THROWS_AS(f.fermi_map(make_vec({0.9, 0, 0, 0})), DomainError);

    RiemannianizedMetric gR = riemannianize(f);
    CHECK((gR.gR_eval(tx) - Mat::Identity(4, 4)).norm() < 1e-15);
}

TEST_CASE("flrw frame oracle") {
    auto m = make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5);
    FrameField f = build_frame(m, make_vec({1, 0, 0, 0}), 0.4);
    CHECK(f.radius() == 0.4);
    // Along the axis F(t, 0) = (1 + t, 0): e0 = d_t and e_i = d_i / a.
    for (double t : {-0.3, 0.0, 0.25}) {
        auto [pt, E] = f.fermi_point_frame(make_vec({t, 0, 0, 0}));
        CHECK((pt - make_vec({1 + t, 0, 0, 0})).norm() < 1e-9);
        Mat expect = Mat::Identity(4, 4);
        for (int i = 1; i < 4; ++i) expect(i, i) = 1.0 / (1 + t);
        CHECK((E - expect).cwiseAbs().maxCoeff() < 1e-8);
    }
    Rng rng(2);
    for (int k = 0; k < 50; ++k) {
        auto [pt, E] = f.fermi_point_frame(random_w(rng, 4, 0.4));
        CHECK(orthonormality_defect(m->g_raw(pt), E) < 1e-8);
        CHECK(E(0, 0) > 0);
    }
}

TEST_CASE("perturbed frame invariants") {
    auto m = perturbed();
    Vec p = make_vec({-0.1, 0.05, 0.0, 0.02});
    FrameField f = build_frame(m, p, 0.6);
    CHECK(f.radius() > 0.3);
    const double R = f.radius();
    Rng rng(9);

    double ortho = 0, orient = 1;
    for (int k = 0; k < 500; ++k) {
        auto [pt, E] = f.fermi_point_frame(random_w(rng, 4, R * 0.999));
        Mat g = m->g_raw(pt);
        ortho = std::max(ortho, orthonormality_defect(g, E));
        orient = std::min(orient, -inner(g, Vec(E.col(0)), unit(4, 0)));
    }
    CHECK(ortho < 1e-8);
    CHECK(orient > 0);

    double round = 0, prop = 0, normal = 0, gr = 0;
    for (int k = 0; k < 20; ++k) {
        Vec tx = random_w(rng, 4, 0.9 * R);
        Vec z = f.fermi_map(tx);
        round = std::max(round, (f.fermi_inverse(z) - tx).norm());

        // transport of the frame at F(0, x) along the e0 geodesic
        Vec x0 = tx;
        x0[0] = 0;
        auto [s, Es] = f.fermi_point_frame(x0);
        auto c = integrate_geodesic(*m, s, tx[0] > 0 ? Vec(Es.col(0)) : Vec(-Es.col(0)), std::abs(tx[0]));
        Mat E = f.frame_eval(z);
        for (int a = 0; a < 4; ++a) {
            auto T = parallel_transport(*m, c, Es.col(a));
            prop = std::max(prop, (T.values.back() - E.col(a)).norm());
        }

        // e0 normal to the radial tangent of Sigma
        const double h = 1e-5;
        Vec xs = tx.tail(3);
        if (xs.norm() > 1e-3) {
            Vec u = xs.normalized();
            Vec tangent = (f.sigma_surface(xs + h * u) - f.sigma_surface(xs - h * u)) / (2 * h);
            normal = std::max(normal, std::abs(inner(m->g_raw(s), Vec(Es.col(0)), tangent)));
        }

        // |g_R(X, e_a)| = |g(X, e_a)|
        RiemannianizedMetric gR = riemannianize(f);
        Mat GR = gR.gR_eval(z), g = m->g_raw(z);
        Vec X = rng.in_ball(4, 1.0);
        for (int a = 0; a < 4; ++a)
            gr = std::max(gr, std::abs(std::abs(inner(GR, X, Vec(E.col(a)))) - std::abs(inner(g, X, Vec(E.col(a))))));
        Mat GE = E.transpose() * GR * E;
        gr = std::max(gr, (GE - Mat::Identity(4, 4)).cwiseAbs().maxCoeff());
    }
    CHECK(round < 1e-8);
    CHECK(prop < 1e-7);
    CHECK(normal < 1e-7);
    CHECK(gr < 1e-10);
}

TEST_CASE("sigma normality defect is second order") {
    // Angular tangents of Sigma pick up a normal component from curvature: g(e0, dSigma) = O(|x|^2).
    auto m = perturbed();
    FrameField f = build_frame(m, make_vec({-0.1, 0.05, 0.0, 0.02}), 0.6);
    const Vec u = make_vec({0.6, 0.5, 0.3}).normalized();
    const Vec w = make_vec({0.5, -0.6, 0.0}).normalized();
    auto defect = [&](double r) {
        const double h = 1e-5;
        Vec x = r * u;
        Vec tx(4);
        tx << 0.0, x;
        Mat E = f.fermi_point_frame(tx).second;
        Vec s = f.sigma_surface(x);
        Vec tangent = (f.sigma_surface(x + h * w) - f.sigma_surface(x - h * w)) / (2 * h);
        return std::abs(inner(m->g_raw(s), Vec(E.col(0)), tangent));
    };
    double d1 = defect(0.4), d2 = defect(0.2);
    CHECK(d2 < d1);
    CHECK(d1 / d2 > 2.5);
}

TEST_CASE("riemannianized metric is positive definite") {
    auto m = perturbed();
    FrameField f = build_frame(m, Vec::Zero(4), 0.5);
    RiemannianizedMetric gR = riemannianize(f);
    Rng rng(4);
    for (int k = 0; k < 10; ++k) {
        Vec z = f.fermi_map(random_w(rng, 4, 0.45));
        Mat G = gR.gR_eval(z);
        Mat E = f.frame_eval(z);
        CHECK(inner(G, Vec(E.col(0)), Vec(E.col(0))) == doctest::Approx(1.0).epsilon(1e-9));
        for (int j = 0; j < 100; ++j) {
            Vec v = rng.in_ball(4, 1.0);
            CHECK(inner(G, v, v) > 0);
        }
    }
    CHECK_THROWS_AS(gR.gR_eval(make_vec({0.9, 0.9, 0.9, 0.9})), DomainError);
}

TEST_CASE("build_frame radius") {
    auto m = make_minkowski(3);
    CHECK_THROWS_AS(build_frame(m, make_vec({1, 0, 0, 0}), 0.5), RadiusError);
    FrameField f = build_frame(m, make_vec({0.7, 0, 0, 0}), 0.8);
    CHECK(f.radius() <= 0.3 + 1e-12);
    CHECK(f.radius() > 0.3 / 1.25);
    CHECK_THROWS_AS(build_frame(m, make_vec({2, 0, 0, 0}), 0.5), DomainError);
}

TEST_CASE("riemannian distance") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.8);
    RiemannianizedMetric gR = riemannianize(f);
    Box region = cube(4, -0.4, 0.4);
    GRCache cache(gR, region, 3);
    Rng rng(6);
    DistanceBudget budget;
    budget.lattice_nodes_per_axis = 5;
    for (int k = 0; k < 10; ++k) {
        Vec a = rng.in_box(region), b = rng.in_box(region);
        auto d = riemannian_distance(cache, a, b, budget);
        CHECK(d.lower <= d.upper);
        CHECK(std::abs(d.upper - (a - b).norm()) < 0.01 * (a - b).norm());
    }
    Vec a = rng.in_box(region);
    auto zero = riemannian_distance(cache, a, a);
    CHECK(zero.upper == 0.0);
    CHECK(zero.lower == 0.0);

    auto pm = perturbed();
    FrameField pf = build_frame(pm, Vec::Zero(4), 0.5);
    RiemannianizedMetric pgR = riemannianize(pf);
    Box preg = cube(4, -0.2, 0.2);
    GRCache pc(pgR, preg, 3);
    for (int k = 0; k < 50; ++k) {
        Vec x = rng.in_box(preg), y = rng.in_box(preg);
        auto d1 = riemannian_distance(pc, x, y, budget), d2 = riemannian_distance(pc, y, x, budget);
        CHECK(d1.lower <= d1.upper);
        CHECK(std::abs(d1.upper - d2.upper) <= (d1.upper - d1.lower) + (d2.upper - d2.lower) + 1e-12);
    }
}

TEST_CASE("normal radius") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.8);
    double r = normal_radius(*m, f, Vec::Zero(4));
    CHECK(r <= 1.0);
    CHECK(r * 1.25 > 1.0);

    Vec q = make_vec({0.0, 0.8, 0.0, 0.0});
    double rq = normal_radius(*m, f, q);
    CHECK(rq <= 0.2 + 1e-12);
    CHECK(rq * 1.25 > 0.2);

    auto small = make_minkowski(3, cube(4, -0.5, 0.5));
    FrameField fs = build_frame(small, Vec::Zero(4), 0.4);
    CHECK(normal_radius(*small, fs, Vec::Zero(4)) <= r);
}

TEST_CASE("uniform temple radius") {
    auto m = make_minkowski(3);
    FrameField f = build_frame(m, Vec::Zero(4), 0.8);
    auto K = temple_sample_set(f, 8);
    UniformRadius u = uniform_temple_radius(*m, f, K);
    CHECK(std::isinf(u.eps0));
    CHECK(std::isinf(u.delta0));
    CHECK(u.radius == doctest::Approx(std::min(0.2, u.rn / std::sqrt(2.0))));
    CHECK(u.radius <= 0.2);
}

TEST_CASE("velocity bound propagation") {
    auto m = perturbed();
    FrameField f = build_frame(m, Vec::Zero(4), 0.6);
    Rng rng(12);
    for (double delta : {0.0125, 0.025, 0.05}) {
        double worst = 0;
        for (int k = 0; k < 8; ++k) {
            Vec z = f.fermi_map(random_w(rng, 4, 0.3));
            Mat E = f.frame_eval(z);
            Vec u = rng.unit_vector(3);
            Vec v = E.col(0);
            for (int i = 0; i < 3; ++i) v += u[i] * E.col(1 + i);
            auto b = velocity_bound(f, z, delta * v, 4);
            REQUIRE(b.has_value());
            worst = std::max(worst, *b / delta);
        }
        CHECK(worst <= 2.0);
    }
}
