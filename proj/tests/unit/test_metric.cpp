#include <doctest.h>

#include "temple/errors.hpp"
#include "temple/geodesic.hpp"
#include "temple/sampling.hpp"

#include <cmath>

using namespace temple;

namespace {

Bump origin_bump(int d, double radius = 1.0) { return Bump{Vec::Zero(d), radius}; }

std::vector<MetricPtr> catalog() {
    return {make_minkowski(3), make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5),
            make_flrw(ScaleFactor::exponential(0.7), 2, 0.5, 2.0),
            make_perturbed_minkowski(0.05, origin_bump(4), 3)};
}

double max_abs_diff(const Christoffel& a, const Christoffel& b, int d) {
    double m = 0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) m = std::max(m, std::abs(a(i, j, k) - b(i, j, k)));
    return m;
}

}  // namespace

TEST_CASE("minkowski components") {
    auto m = make_minkowski(3, cube(4, -10, 10));
    Mat g = m->g_eval(make_vec({0.3, -1.2, 5.0, 0.0}));
    CHECK((g - Vec(make_vec({-1, 1, 1, 1})).asDiagonal().toDenseMatrix()).norm() == 0.0);
    CHECK(m->signature_tag() == "(-,+,+,+)");
    CHECK_THROWS_AS(m->g_eval(make_vec({20, 0, 0, 0})), DomainError);
}

TEST_CASE("flrw components") {
    auto m = make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5);
    Mat g = m->g_eval(make_vec({2, 0, 0, 0}));
    CHECK(g(0, 0) == doctest::Approx(-1));
    for (int i = 1; i < 4; ++i) CHECK(g(i, i) == doctest::Approx(4));
    CHECK_THROWS_AS(make_flrw(ScaleFactor::power(1.0), 3, -1.0, 2.0), InvalidMetric);

    // Flat slicing with a = t: R^0_{i0j} = a a'' g-free part vanishes, R^i_{jij} = a'^2 = 1.
    Riemann R = m->riemann_eval(make_vec({1.3, 0.2, -0.1, 0.4}));
    for (int i = 1; i < 4; ++i) {
        CHECK(std::abs(R(0, i, 0, i)) < 1e-10);
        for (int j = 1; j < 4; ++j)
            if (i != j) CHECK(R(i, j, i, j) == doctest::Approx(1.0).epsilon(1e-10));
    }

    auto flat = make_flrw(ScaleFactor::power(0.0), 3, 0.5, 2.5);
    CHECK(max_abs_diff(flat->christoffel_eval(make_vec({1, 0, 0, 0})), Christoffel{}, 4) == 0.0);
}

TEST_CASE("perturbed minkowski") {
    auto m0 = make_perturbed_minkowski(0.0, origin_bump(4), 3);
    auto mk = make_minkowski(3);
    Vec x = make_vec({0.1, 0.2, -0.3, 0.1});
    CHECK((m0->g_eval(x) - mk->g_eval(x)).norm() == 0.0);
    CHECK(max_abs_diff(m0->christoffel_eval(x), Christoffel{}, 4) == 0.0);

    auto m = make_perturbed_minkowski(0.05, Bump{Vec::Zero(4), 0.5}, 3);
    Vec far = make_vec({0.9, 0.9, 0.0, 0.0});
    CHECK((m->g_eval(far) - mk->g_eval(far)).norm() == 0.0);

    Rng rng(3);
    for (int k = 0; k < 1000; ++k) {
        Eigen::SelfAdjointEigenSolver<Mat> es(m->g_eval(rng.in_box(m->domain())));
        CHECK(es.eigenvalues()[0] < 0);
        CHECK(es.eigenvalues()[1] > 0);
    }
}

TEST_CASE("christoffel and riemann oracles") {
    Rng rng(11);
    for (const auto& m : catalog()) {
        const int d = m->dim();
        const double h = 1e-4 * m->domain().diameter();
        auto gfun = [&](const Vec& y) { return m->g_raw(y); };
        double worst_g = 0, worst_r = 0, sym = 0, bianchi = 0;
        for (int k = 0; k < 200; ++k) {
            Box inner_box = m->domain();
            for (int i = 0; i < d; ++i) {
                inner_box.lo[i] += 0.05;
                inner_box.hi[i] -= 0.05;
            }
            Vec x = rng.in_box(inner_box);
            Christoffel G = m->christoffel_eval(x);
            worst_g = std::max(worst_g, max_abs_diff(G, christoffel_fd(gfun, x, h, true), d));
            for (int c = 0; c < d; ++c)
                for (int a = 0; a < d; ++a)
                    for (int b = 0; b < d; ++b) sym = std::max(sym, std::abs(G(c, a, b) - G(c, b, a)));

            // nested FD oracle: dGamma from central differences of christoffel_eval
            const double hh = 1e-4;
            ChristoffelDerivative dG;
            for (int e = 0; e < d; ++e) {
                Vec xp = x, xm = x;
                xp[e] += hh;
                xm[e] -= hh;
                Christoffel Gp = m->christoffel_raw(xp), Gm = m->christoffel_raw(xm);
                for (int i = 0; i < d; ++i)
                    for (int j = 0; j < d; ++j)
                        for (int l = 0; l < d; ++l) dG.by_axis[e](i, j, l) = (Gp(i, j, l) - Gm(i, j, l)) / (2 * hh);
            }
            Riemann Ro = riemann_from(G, dG), R = m->riemann_eval(x);
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    for (int c = 0; c < d; ++c)
                        for (int e = 0; e < d; ++e) {
                            worst_r = std::max(worst_r, std::abs(R(a, b, c, e) - Ro(a, b, c, e)));
                            bianchi = std::max(bianchi, std::abs(R(a, b, c, e) + R(a, b, e, c)));
                            bianchi = std::max(bianchi, std::abs(R(a, b, c, e) + R(a, c, e, b) + R(a, e, b, c)));
                        }
        }
        INFO(m->catalog_id());
        CHECK(worst_g < 1e-5);
        CHECK(sym < 1e-10);
        CHECK(worst_r < 1e-4);
        CHECK(bianchi < 1e-8);
    }
}

TEST_CASE("metric from json") {
    json spec = json::parse(R"({"catalog_id":"flrw","dim":4,"domain":[[0.5,2.5],[-1,1],[-1,1],[-1,1]],
                               "params":{"scale_factor":{"power":1}}})");
    auto m = metric_from_json(spec);
    CHECK(m->catalog_id() == "flrw");
    CHECK(m->g_eval(make_vec({2, 0, 0, 0}))(1, 1) == doctest::Approx(4));
    CHECK(m->spec() == spec);
    CHECK_THROWS_AS(metric_from_json(json::parse(R"({"catalog_id":"kerr","dim":4})")), ConfigError);
}

TEST_CASE("coordinate time") {
    auto m = make_minkowski(3);
    TimeFunction tau = coordinate_time(*m);
    CHECK(tau(make_vec({0.5, 0.1, 0, 0})) == 0.5);
    auto f = make_flrw(ScaleFactor::power(1.0), 3, 0.5, 2.5);
    CHECK(coordinate_time(*f)(make_vec({2, 0, 0, 0})) == 2.0);

    // strictly increasing along integrated future causal curves
    Rng rng(5);
    for (const auto& mm : catalog()) {
        TimeFunction t = coordinate_time(*mm);
        for (int k = 0; k < 100; ++k) {
            const int d = mm->dim();
            Vec x = mm->domain().center();
            x[0] = mm->domain().lo[0] + 0.2 * (mm->domain().hi[0] - mm->domain().lo[0]);
            Mat E = coordinate_frame(mm->g_eval(x));
            Vec u = rng.in_ball(d - 1, 1.0);
            Vec v = E.col(0);
            for (int i = 1; i < d; ++i) v += u[i - 1] * E.col(i);
            auto tr = integrate_geodesic(*mm, x, 0.3 * v, 1.0);
            for (std::size_t i = 1; i < tr.nodes(); ++i) CHECK(t(tr.points[i]) > t(tr.points[i - 1]));
        }
    }

    // Lorentzian, but dx^0 turns spacelike near the bump center
    auto tilted = make_perturbed_minkowski(-1.5, origin_bump(2), 1);
    CHECK_THROWS_AS(coordinate_time(*tilted), InvalidTimeFunction);
}

TEST_CASE("cosmological time") {
    auto f = make_flrw(ScaleFactor::power(1.0), 2, 0.5, 2.5);
    Vec p = make_vec({1.7, 0.1, -0.2});
    CosmologicalTime ct = cosmological_time(*f, p, CurveBudget{});
    CHECK(std::abs(ct.value - 1.7) < 0.017);
    CHECK(ct.value >= ct.comoving_value);
    for (std::size_t i = 1; i < ct.level_values.size(); ++i) CHECK(ct.level_values[i] >= ct.level_values[i - 1]);

    auto mk = metric_from_json(json::parse(R"({"catalog_id":"minkowski","dim":3,
        "domain":[[0,2],[-1,1],[-1,1]],"params":{"past_boundary":true}})"));
    CosmologicalTime cm = cosmological_time(*mk, make_vec({1, 0, 0}), CurveBudget{});
    CHECK(std::abs(cm.value - 1.0) < 0.01);

    CosmologicalTime single = cosmological_time(*f, p, CurveBudget{0, 0});
    CHECK(single.value == single.comoving_value);
    CHECK(single.value == doctest::Approx(1.7).epsilon(1e-12));

    CHECK_THROWS_AS(cosmological_time(*make_minkowski(2), make_vec({0, 0, 0}), CurveBudget{}), UnsupportedMetric);
}
