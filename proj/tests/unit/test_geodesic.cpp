#include <doctest.h>

#include "temple/errors.hpp"
#include "temple/geodesic.hpp"
#include "temple/sampling.hpp"

#include <cmath>

using namespace temple;

namespace {

std::vector<MetricPtr> catalog() {
    return {make_minkowski(3), make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5),
            make_perturbed_minkowski(0.05, Bump{Vec::Zero(4), 1.0}, 3)};
}

// Random point well inside the box and a random velocity of coordinate size <= 0.3.
std::pair<Vec, Vec> random_ic(const MetricField& m, Rng& rng) {
    Box b = m.domain();
    Vec c = b.center();
    Vec half = 0.25 * (b.hi - b.lo);
    Box inner{c - half, c + half};
    return {rng.in_box(inner), rng.in_ball(m.dim(), 0.3)};
}

}  // namespace

TEST_CASE("minkowski straight line") {
    auto m = make_minkowski(3, cube(4, -5, 5));
    Vec v = make_vec({1, 0.5, 0, 0});
    auto tr = integrate_geodesic(*m, Vec::Zero(4), v, 2.0);
    for (double lam : {0.0, 0.3, 1.1, 2.0}) CHECK((tr.point(lam) - lam * v).norm() < 1e-12);
    CHECK(tr.kind == CurveKind::timelike);
}

TEST_CASE("flrw comoving geodesic") {
    auto m = make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5);
    auto tr = integrate_geodesic(*m, make_vec({1, 0, 0, 0}), make_vec({1, 0, 0, 0}), 1.0);
    for (double lam : {0.0, 0.25, 0.7, 1.0}) CHECK((tr.point(lam) - make_vec({1 + lam, 0, 0, 0})).norm() < 1e-10);
}

TEST_CASE("boundary handling") {
    auto m = make_minkowski(1);
    CHECK_THROWS_AS(integrate_geodesic(*m, make_vec({1, 0}), make_vec({1, 0}), 1.0), BoundaryError);
    auto tr = integrate_geodesic(*m, make_vec({0.5, 0}), make_vec({1, 0}), 1.0);
    CHECK(tr.truncated);
    CHECK(tr.exit_param == doctest::Approx(0.5).epsilon(1e-3));
    CHECK_THROWS_AS(exp_map(*m, make_vec({0.5, 0}), make_vec({1, 0})), BoundaryError);
    CHECK_THROWS_AS(integrate_geodesic(*m, make_vec({2, 0}), make_vec({1, 0}), 1.0), DomainError);
}

TEST_CASE("null conservation in perturbed minkowski") {
    auto m = make_perturbed_minkowski(0.05, Bump{Vec::Zero(4), 1.0}, 3);
    Vec p = make_vec({-0.4, -0.3, 0.1, 0});
    Mat E = coordinate_frame(m->g_eval(p));
    Vec v = 0.6 * (E.col(0) + E.col(1));
    auto tr = integrate_geodesic(*m, p, v, 1.0);
    CHECK(tr.kind == CurveKind::null);
    for (std::size_t i = 0; i < tr.nodes(); ++i)
        CHECK(std::abs(inner(m->g_raw(tr.points[i]), tr.velocities[i], tr.velocities[i])) < 1e-8);
}

TEST_CASE("norm conservation and transport isometry") {
    Rng rng(17);
    for (const auto& m : catalog()) {
        INFO(m->catalog_id());
        double drift = 0, iso = 0;
        for (int k = 0; k < 100; ++k) {
            auto [p, v] = random_ic(*m, rng);
            auto tr = integrate_geodesic(*m, p, v, 1.0);
            double n0 = inner(m->g_raw(p), v, v);
            for (std::size_t i = 0; i < tr.nodes(); ++i)
                drift = std::max(drift, std::abs(inner(m->g_raw(tr.points[i]), tr.velocities[i], tr.velocities[i]) - n0));
            if (k % 5 == 0) {
                Vec a = rng.in_ball(m->dim(), 1.0), b = rng.in_ball(m->dim(), 1.0);
                auto A = parallel_transport(*m, tr, a), B = parallel_transport(*m, tr, b), V = parallel_transport(*m, tr, v);
                double ab = inner(m->g_raw(p), a, b), av = inner(m->g_raw(p), a, v);
                for (std::size_t i = 0; i < tr.nodes(); ++i) {
                    Mat g = m->g_raw(tr.points[i]);
                    iso = std::max(iso, std::abs(inner(g, A.values[i], B.values[i]) - ab));
                    iso = std::max(iso, std::abs(inner(g, A.values[i], tr.velocities[i]) - av));
                    iso = std::max(iso, (V.values[i] - tr.velocities[i]).norm());
                }
            }
        }
        CHECK(drift < 1e-8);
        CHECK(iso < 1e-8);
    }
}

TEST_CASE("flrw transport oracle") {
    // Along the comoving line, D_t V = 0 gives dV^i/dt = -(a'/a) V^i, so V^i = V^i(1) a(1)/a(t).
    auto m = make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5);
    auto tr = integrate_geodesic(*m, make_vec({1, 0, 0, 0}), make_vec({1, 0, 0, 0}), 1.0);
    auto V = parallel_transport(*m, tr, make_vec({0, 1, 0, 0}));
    CHECK((V.values.back() - make_vec({0, 0.5, 0, 0})).norm() < 1e-6);
}

TEST_CASE("jacobi fields") {
    SUBCASE("minkowski constant field") {
        auto m = make_minkowski(3);
        auto tr = integrate_geodesic(*m, Vec::Zero(4), make_vec({0.3, 0.3, 0, 0}), 1.0);
        auto js = solve_jacobi(*m, tr, unit(4, 0), Vec::Zero(4));
        for (std::size_t i = 0; i < tr.nodes(); ++i) {
            CHECK((js.J[i] - unit(4, 0)).norm() == 0.0);
            CHECK(inner(m->g_raw(tr.points[i]), js.J[i], js.J[i]) == -1.0);
        }
    }
    SUBCASE("tangent field") {
        for (const auto& m : catalog()) {
            Rng rng(3);
            auto [p, v] = random_ic(*m, rng);
            auto tr = integrate_geodesic(*m, p, v, 1.0);
            auto js = solve_jacobi(*m, tr, v, Vec::Zero(m->dim()));
            for (std::size_t i = 0; i < tr.nodes(); ++i) CHECK((js.J[i] - tr.velocities[i]).norm() < 1e-8);
        }
    }
    SUBCASE("rejects non-geodesic input") {
        auto m = make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5);
        std::vector<double> s{0, 0.5, 1};
        std::vector<Vec> pts{make_vec({1, 0, 0, 0}), make_vec({1, 0.25, 0, 0}), make_vec({1, 0.5, 0, 0})};
        std::vector<Vec> vel(3, make_vec({0, 0.5, 0, 0}));
        auto tr = trajectory_from_nodes(s, pts, vel, CurveKind::spacelike);
        CHECK_THROWS_AS(solve_jacobi(*m, tr, unit(4, 0), Vec::Zero(4)), PreconditionError);
    }
    SUBCASE("geodesic variation oracle") {
        // J(lambda) = d/ds exp_{c(s)}(lambda W(s)), c the e0-geodesic through q, W parallel along c.
        Rng rng(23);
        int configs = 0;
        for (const auto& m : catalog()) {
            for (int k = 0; k < 7; ++k) {
                auto [q, v] = random_ic(*m, rng);
                Mat E = coordinate_frame(m->g_eval(q));
                Vec e0 = E.col(0);
                const double h = 1e-4;
                auto shifted = [&](double s, double lam) {
                    auto c = integrate_geodesic(*m, q, (s > 0 ? 1.0 : -1.0) * e0, std::abs(s));
                    auto W = parallel_transport(*m, c, v);
                    return exp_map(*m, c.points.back(), lam * W.values.back());
                };
                auto tr = integrate_geodesic(*m, q, v, 1.0);
                auto js = solve_jacobi(*m, tr, e0, Vec::Zero(m->dim()));
                for (double lam : {0.5, 1.0}) {
                    Vec fd = (shifted(h, lam) - shifted(-h, lam)) / (2 * h);
                    Vec J = js.sol.at(lam).segment(2 * m->dim(), m->dim());
                    CHECK((fd - J).norm() < 1e-5);
                }
                ++configs;
            }
        }
        CHECK(configs >= 20);
    }
}

TEST_CASE("exp map") {
    auto m = make_minkowski(3);
    Vec q = make_vec({0.1, 0.2, 0.3, 0.4}), v = make_vec({0.2, -0.1, 0.05, 0});
    CHECK((exp_map(*m, q, v) - (q + v)).norm() == 0.0);
    for (const auto& mm : catalog()) {
        Rng rng(1);
        auto [p, w] = random_ic(*mm, rng);
        CHECK((exp_map(*mm, p, Vec::Zero(4)) - p).norm() == 0.0);
        auto tr = integrate_geodesic(*mm, p, 0.5 * w, 2.0);
        CHECK((exp_map(*mm, p, w) - tr.points.back()).norm() < 1e-9);
    }
    CHECK((framed_exp(*m, Mat::Identity(4, 4), Vec::Zero(4), make_vec({1, 1, 0, 0})) - make_vec({1, 1, 0, 0})).norm() ==
          0.0);
}

TEST_CASE("framed exp inversion") {
    auto mk = make_minkowski(3);
    Vec q = make_vec({0.1, 0.2, 0.3, 0.4}), target = make_vec({0.3, 0.1, 0.2, 0.5});
    CHECK((invert_framed_exp(*mk, Mat::Identity(4, 4), q, target) - (target - q)).norm() < 1e-12);
    CHECK(invert_framed_exp(*mk, Mat::Identity(4, 4), q, q).norm() == 0.0);

    Rng rng(8);
    for (const auto& m : catalog()) {
        INFO(m->catalog_id());
        Vec c = m->domain().center();
        Mat E = coordinate_frame(m->g_eval(c));
        double worst = 0;
        for (int k = 0; k < 100; ++k) {
            Vec y = rng.in_ball(4, 0.3);
            Vec z = framed_exp(*m, E, c, y);
            Vec y2 = invert_framed_exp(*m, E, c, z);
            worst = std::max(worst, (y2 - y).norm());
        }
        CHECK(worst < 1e-8);
    }
    auto m = make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5);
    InverseOptions opt;
    opt.radius = 0.1;
    CHECK_THROWS_AS(invert_framed_exp(*m, Mat::Identity(4, 4), make_vec({1.5, 0, 0, 0}), make_vec({1.5, 0.8, 0, 0}),
                                      std::nullopt, opt),
                    OutOfRadius);
}
