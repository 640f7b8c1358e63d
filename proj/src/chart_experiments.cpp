#include "temple/chart.hpp"
#include "temple/errors.hpp"
#include "temple/parallel.hpp"
#include "temple/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace temple {

namespace {

struct AxisRow {
    double t = 0, lambda = 0;
    double null_dev = 0, cross_dev = 0, le0_dev = 0, tt_dev = 0, jacobi_fd = 0;
};

AxisRow axis_row(const TempleChart& chart, const Vec& tx) {
    const MetricField& m = chart.metric();
    const int d = chart.dim(), n = d - 1;
    const double r = chart.radius();
    AxisRow row;
    row.t = tx[0];
    Vec x = tx.tail(n);
    row.lambda = x.norm();

    Vec w = chart.shot_velocity(row.t, x / row.lambda);
    auto tr = integrate_geodesic(m, chart.eta(row.t), w, row.lambda, chart.frame().tol());
    if (tr.truncated) throw BoundaryError("axis_identities: null ray left the domain", tr.exit_param);
    auto js = solve_jacobi(m, tr, chart.eta_velocity(row.t), Vec::Zero(d));
    Vec z = tr.points.back(), dl = tr.velocities.back(), dt = js.J.back();

    // d_t by central differences of the chart on a frozen step grid
    const double h = 1e-5 * r;
    std::vector<double> grid;
    Vec z0, zp, zm;
    chart.chart_point(tx, z0, &grid, false);
    Vec tp = tx, tm = tx;
    tp[0] += h;
    tm[0] -= h;
    if (!chart.chart_point(tp, zp, &grid, true) || !chart.chart_point(tm, zm, &grid, true))
        throw BoundaryError("axis_identities: shifted ray left the domain", 0.0);
    Vec dt_fd = (zp - zm) / (2 * h);

    Mat g = m.g_raw(z);
    Vec e0 = chart.frame().frame_eval(z).col(0);
    row.null_dev = std::abs(inner(g, dl, dl));
    row.cross_dev = std::abs(inner(g, dt, dl) + 1.0);
    row.le0_dev = std::abs(inner(g, dl, e0) + 1.0);
    row.tt_dev = std::abs(inner(g, dt, dt) + 1.0);
    row.jacobi_fd = (dt - dt_fd).norm();
    return row;
}

}  // namespace

EstimateReport axis_identities(const TempleChart& chart, int samples, std::uint64_t seed) {
    EstimateReport rep;
    rep.experiment = "axis_identities";
    auto pts = chart_samples(chart, samples, seed, 0.01);
    std::vector<AxisRow> rows(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { rows[i] = axis_row(chart, pts[i]); });

    double mn = 0, mc = 0, mj = 0, ml = 0, mt = 0;
    std::vector<double> lam, le0, tt;
    for (const auto& r : rows) {
        mn = std::max(mn, r.null_dev);
        mc = std::max(mc, r.cross_dev);
        mj = std::max(mj, r.jacobi_fd);
        ml = std::max(ml, r.le0_dev);
        mt = std::max(mt, r.tt_dev);
        lam.push_back(r.lambda);
        le0.push_back(r.le0_dev);
        tt.push_back(r.tt_dev);
        rep.table.push_back({{"t", r.t},
                             {"lambda", r.lambda},
                             {"g_dl_dl", r.null_dev},
                             {"g_dt_dl_plus_1", r.cross_dev},
                             {"g_dl_e0_plus_1", r.le0_dev},
                             {"g_dt_dt_plus_1", r.tt_dev},
                             {"jacobi_vs_fd", r.jacobi_fd}});
    }
    LinearFit f1 = linear_fit(lam, le0), f2 = linear_fit(lam, tt);
    rep.metrics["samples"] = rows.size();
    rep.metrics["max_g_dl_dl"] = mn;
    rep.metrics["max_g_dt_dl_plus_1"] = mc;
    rep.metrics["max_jacobi_vs_fd"] = mj;
    rep.metrics["max_g_dl_e0_plus_1"] = ml;
    rep.metrics["max_g_dt_dt_plus_1"] = mt;
    rep.metrics["fit_dl_e0_slope"] = f1.slope;
    rep.metrics["fit_dl_e0_intercept"] = f1.intercept;
    rep.metrics["fit_dt_dt_slope"] = f2.slope;
    rep.metrics["fit_dt_dt_intercept"] = f2.intercept;
    bool ok = mn < 1e-8 && mc < 1e-6 && mj < 1e-5;
    rep.verdict = ok ? "pass" : "fail";
    if (mc >= 1e-6) rep.anomalies.push_back("g(d_t, d_lambda) = -1 violated beyond 1e-6");
    return rep;
}

EstimateReport gradient_estimate_experiment(const TempleChart& chart, const RiemannianizedMetric& gR,
                                            const GradientOptions& opt) {
    EstimateReport rep;
    rep.experiment = "gradient_estimate";
    const int n = chart.dim() - 1;
    const double r = chart.radius();
    for (double f : opt.lambda_fractions)
        if (!(f > 1e-3 && f < 1.0)) throw PreconditionError("gradient_estimate_experiment: lambda outside (1e-3 r, r)");
    const auto dirs = sphere_points(n, opt.directions_per_shell, 0.37);
    const std::size_t nd = dirs.size(), ns = opt.lambda_fractions.size();

    struct Cell {
        double value = 0, dev = 0, oracle_dev = 0;
    };
    std::vector<Cell> cells(ns * nd);
    const double t = opt.t_fraction * r;
    parallel_for(cells.size(), [&](std::size_t k) {
        const double lam = opt.lambda_fractions[k / nd] * r;
        Vec x = lam * dirs[k % nd];
        Vec z = chart.forward(t, x);
        OpticalSample s = optical_and_radial(chart, z, &gR);
        Cell c;
        c.value = s.grad_norm_gR.value_or(std::nan(""));
        c.dev = std::abs(c.value - std::sqrt(2.0));
        c.oracle_dev = std::abs(gradient_norm_oracle(chart, t, x) - std::sqrt(2.0));
        cells[k] = c;
    });

    std::vector<double> lams, devs;
    double max_ratio = 0, min_ratio = std::numeric_limits<double>::infinity(), oracle_gap = 0;
    for (std::size_t i = 0; i < ns; ++i) {
        const double lam = opt.lambda_fractions[i] * r;
        double dev = 0, odev = 0;
        for (std::size_t j = 0; j < nd; ++j) {
            const Cell& c = cells[i * nd + j];
            dev = std::max(dev, c.dev);
            odev = std::max(odev, c.oracle_dev);
            oracle_gap = std::max(oracle_gap, std::abs(c.dev - c.oracle_dev));
            rep.table.push_back({{"lambda", lam},
                                 {"direction_index", j},
                                 {"value", c.value},
                                 {"dev", c.dev},
                                 {"oracle_dev", c.oracle_dev}});
        }
        lams.push_back(lam);
        devs.push_back(dev);
        max_ratio = std::max(max_ratio, dev / lam);
        min_ratio = std::min(min_ratio, dev / lam);
    }
    LinearFit fit = linear_fit(lams, devs);
    const double C_hat = 1.2 * max_ratio;
    json shells = json::array();
    bool bounded = true;
    for (std::size_t i = 0; i < ns; ++i) {
        shells.push_back({{"lambda", lams[i]}, {"dev", devs[i]}, {"dev_over_lambda", devs[i] / lams[i]}});
        if (devs[i] > C_hat * lams[i]) bounded = false;
    }
    double max_dev = *std::max_element(devs.begin(), devs.end());
    rep.metrics["radius"] = r;
    rep.metrics["t"] = t;
    rep.metrics["C_hat"] = C_hat;
    rep.metrics["fit_slope"] = fit.slope;
    rep.metrics["fit_intercept"] = fit.intercept;
    rep.metrics["max_dev"] = max_dev;
    rep.metrics["ratio_spread"] = max_dev < 1e-6 ? 1.0 : max_ratio / min_ratio;
    rep.metrics["dev_smallest_shell"] = devs.front();
    rep.metrics["dev_largest_shell"] = devs.back();
    rep.metrics["max_fd_vs_oracle_gap"] = oracle_gap;
    rep.metrics["shells"] = shells;
    bool decays = max_dev < 1e-6 || devs.front() < devs.back();
    rep.verdict = bounded && decays ? "pass" : "fail";
    if (!decays) rep.anomalies.push_back("dev(lambda) does not decrease towards the axis");
    return rep;
}

EstimateReport omega_lipschitz_experiment(const TempleChart& chart, const GRCache& gR, int pairs, std::uint64_t seed) {
    EstimateReport rep;
    rep.experiment = "omega_lipschitz";
    const int d = chart.dim(), n = d - 1;
    const double r = chart.radius();
    Rng rng(seed);
    std::vector<std::pair<Vec, Vec>> P;
    auto sample = [&]() {
        Vec tx(d);
        tx[0] = rng.uniform(-0.95 * r, 0.95 * r);
        Vec x;
        do x = rng.in_ball(n, 0.95 * r);
        while (x.norm() < 0.01 * r);
        tx.tail(n) = x;
        return tx;
    };
    for (int k = 0; k < pairs; ++k) {
        Vec a = sample(), b;
        if (k % 2 == 0) {
            b = sample();
        } else {
            // nearby partner to probe the local Lipschitz constant
            double s = r * std::pow(10.0, -rng.uniform(0.5, 2.5));
            do {
                b = a + s * rng.unit_vector(d);
            } while (!(std::abs(b[0]) < 0.95 * r && b.tail(n).norm() < 0.95 * r && b.tail(n).norm() >= 0.01 * r));
        }
        P.push_back({a, b});
    }
    struct Row {
        double ratio = 0, domega = 0, dist = 0;
        bool used = false;
    };
    std::vector<Row> rows(P.size());
    parallel_for(P.size(), [&](std::size_t i) {
        const auto& [a, b] = P[i];
        Vec za = chart.forward(a[0], a.tail(n)), zb = chart.forward(b[0], b.tail(n));
        Row row;
        if ((za - zb).norm() >= 1e-6) {
            row.used = true;
            row.domega = std::abs(a[0] - b[0]);
            row.dist = riemannian_distance(gR, za, zb).upper;
            row.ratio = row.domega / row.dist;
        }
        rows[i] = row;
    });
    double sup = 0;
    int used = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].used) continue;
        ++used;
        sup = std::max(sup, rows[i].ratio);
        rep.table.push_back({{"pair", i}, {"d_omega", rows[i].domega}, {"d_gR_upper", rows[i].dist}, {"ratio", rows[i].ratio}});
    }
    rep.metrics["pairs_used"] = used;
    rep.metrics["pairs_excluded"] = static_cast<int>(rows.size()) - used;
    rep.metrics["sup_ratio"] = sup;
    rep.metrics["bound"] = 2.05;
    rep.verdict = sup <= 2.05 ? "pass" : "fail";
    return rep;
}

EstimateReport jacobi_estimate_experiment(const TempleChart& chart, const JacobiOptions& opt, std::uint64_t seed) {
    EstimateReport rep;
    rep.experiment = "jacobi_estimate";
    const MetricField& m = chart.metric();
    const int d = chart.dim(), n = d - 1;
    auto pts = chart_samples(chart, opt.points, seed, 0.01);
    const auto dirs = sphere_points(n, opt.directions, 0.11);
    const std::size_t per_eps = pts.size() * dirs.size();

    struct Cell {
        double gjj = 0, frame_dev = 0;
        bool used = false;
    };
    std::vector<Cell> cells(opt.eps.size() * per_eps);
    parallel_for(cells.size(), [&](std::size_t k) {
        const double eps = opt.eps[k / per_eps];
        const Vec& tx = pts[(k % per_eps) / dirs.size()];
        const Vec& u = dirs[k % dirs.size()];
        Vec z = chart.forward(tx[0], tx.tail(n));
        Mat E = chart.frame().frame_eval(z);
        Vec v = eps * (E.col(0) + E.rightCols(n) * u);
        Cell c;
        Trajectory tr;
        try {
            tr = integrate_geodesic(m, z, v, 1.0, chart.frame().tol());
        } catch (const Error&) {
            cells[k] = c;
            return;
        }
        if (tr.truncated) {
            cells[k] = c;
            return;
        }
        auto js = solve_jacobi(m, tr, Vec(E.col(0)), Vec::Zero(d));
        c.used = true;
        for (std::size_t i = 0; i < tr.nodes(); ++i) {
            Mat g = m.g_raw(tr.points[i]);
            c.gjj = std::max(c.gjj, std::abs(inner(g, js.J[i], js.J[i]) + 1.0));
        }
        // first-order companion: frame components of J - e0 at the endpoint
        Mat Ee = chart.frame().frame_eval(tr.points.back());
        Mat g = m.g_raw(tr.points.back());
        Vec dj = js.J.back() - Ee.col(0);
        for (int a = 0; a < d; ++a) c.frame_dev = std::max(c.frame_dev, std::abs(inner(g, dj, Vec(Ee.col(a)))));
        cells[k] = c;
    });

    std::vector<double> maxima, frame_maxima;
    for (std::size_t e = 0; e < opt.eps.size(); ++e) {
        double mx = 0, fx = 0;
        int used = 0;
        for (std::size_t j = 0; j < per_eps; ++j) {
            const Cell& c = cells[e * per_eps + j];
            if (!c.used) continue;
            ++used;
            mx = std::max(mx, c.gjj);
            fx = std::max(fx, c.frame_dev);
        }
        maxima.push_back(mx);
        frame_maxima.push_back(fx);
        rep.table.push_back({{"eps", opt.eps[e]}, {"max_gJJ_plus_1", mx}, {"max_frame_dev_J_minus_e0", fx}, {"used", used}});
    }
    json ratios = json::array(), frame_ratios = json::array();
    bool linear = maxima.size() >= 2;
    for (std::size_t e = 1; e < maxima.size(); ++e) {
        double ratio = maxima[e] > 0 ? maxima[e - 1] / maxima[e] : std::numeric_limits<double>::infinity();
        double eps_ratio = opt.eps[e - 1] / opt.eps[e];
        ratios.push_back(number(ratio));
        frame_ratios.push_back(number(frame_maxima[e] > 0 ? frame_maxima[e - 1] / frame_maxima[e] : 0.0));
        // linear scaling: ratio within +-20% of the eps ratio
        if (!(ratio >= 0.8 * eps_ratio && ratio <= 1.2 * eps_ratio)) linear = false;
    }
    rep.metrics["successive_ratios"] = ratios;
    rep.metrics["frame_dev_successive_ratios"] = frame_ratios;
    rep.metrics["max_gJJ_plus_1"] = maxima.empty() ? 0.0 : *std::max_element(maxima.begin(), maxima.end());
    rep.verdict = linear ? "pass" : "fail";
    if (!linear) rep.anomalies.push_back("max |g(J,J)+1| does not scale linearly in eps");
    return rep;
}

}  // namespace temple
