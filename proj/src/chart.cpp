#include "temple/chart.hpp"

#include "temple/errors.hpp"
#include "temple/newton.hpp"
#include "temple/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace temple {

TempleChart::TempleChart(const FrameField& frame, const Vec& q, double r, int orientation)
    : frame_(&frame), q_(q), r_(r), orientation_(orientation >= 0 ? 1 : -1) {
    if (!(r > 0)) throw PreconditionError("build_chart: radius must be positive");
    const MetricField& m = frame.metric();
    const int d = m.dim();
    Mat E = frame.frame_eval(q);
    std::vector<Vec> cols;
    for (int a = 0; a < d; ++a) cols.push_back(E.col(a));
    State y0 = pack_state(q, E.col(0), cols);
    IntegratorOptions opt;
    opt.rtol = opt.atol = frame.tol();
    auto flow = geodesic_flow(m, d, false);
    fwd_ = integrate(flow, 0.0, r, y0, opt);
    bwd_ = integrate(flow, 0.0, -r, y0, opt);
    if (fwd_.truncated || bwd_.truncated) throw RadiusError("build_chart: central geodesic leaves the domain");
}

State TempleChart::eta_state(double t) const { return t >= 0 ? fwd_.at(t) : bwd_.at(t); }

Vec TempleChart::eta(double t) const { return eta_state(t).segment(0, dim()); }

Vec TempleChart::eta_velocity(double t) const { return eta_state(t).segment(dim(), dim()); }

Mat TempleChart::eta_frame(double t) const {
    const int d = dim();
    State y = eta_state(t);
    Mat E(d, d);
    for (int a = 0; a < d; ++a) E.col(a) = y.segment((2 + a) * d, d);
    return E;
}

Vec TempleChart::shot_velocity(double t, const Vec& x) const {
    Mat E = eta_frame(t);
    return orientation_ * x.norm() * E.col(0) + E.rightCols(dim() - 1) * x;
}

bool TempleChart::chart_point(const Vec& tx, Vec& out, std::vector<double>* grid, bool replay) const {
    const double t = tx[0];
    if (std::abs(t) > r_ * (1 + 1e-9)) return false;
    Vec x = tx.tail(dim() - 1);
    return shoot(metric(), eta(t), shot_velocity(t, x), out, frame_->tol(), grid, replay);
}

Vec TempleChart::forward(double t, const Vec& x) const {
    if (x.size() != dim() - 1) throw PreconditionError("forward: wrong spatial dimension");
    if (!in_w(t, x) && !(std::abs(t) <= r_ && x.norm() <= r_)) throw DomainError("forward: (t, x) outside W_r");
    Vec tx(dim());
    tx << t, x;
    Vec out;
    if (!chart_point(tx, out, nullptr, false)) throw BoundaryError("forward: null geodesic left the domain", 0.0);
    return out;
}

ChartInverse TempleChart::invert(const Vec& z, const ChartInvertOptions& opt) const {
    const MetricField& m = metric();
    const int d = dim(), n = d - 1;
    if (!m.contains(z)) throw DomainError("invert: point outside metric domain");

    Vec y0;
    if (opt.guess) {
        y0 = *opt.guess;
    } else {
        // Flat closed form in the frame at q.
        Vec y = eta_frame(0.0).fullPivLu().solve(z - q_);
        double rho = y.tail(n).norm();
        y0.resize(d);
        y0 << y[0] - orientation_ * rho, y.tail(n);
    }

    auto residual_fn = [&](const Vec& tx, Vec& r, std::vector<double>* grid, bool replay) {
        Vec out;
        if (!chart_point(tx, out, grid, replay)) return false;
        r = out - z;
        return true;
    };

    NewtonOptions no;
    no.fd_step = 1e-6 * r_;
    no.accept = opt.target;
    no.tol = opt.tol;
    NewtonResult res;
    std::vector<double> fixed;
    if (opt.replay) {
        fixed = *opt.replay;
        ShootFn f = [&](const Vec& tx, Vec& r, std::vector<double>*, bool) { return residual_fn(tx, r, &fixed, true); };
        res = newton_solve(f, y0, no);
    } else {
        ShootFn f = residual_fn;
        res = newton_solve(f, y0, no);
    }

    if (!res.converged) {
        // Near the axis |x| is not differentiable; retry along the axis itself.
        ShootFn axis = [&](const Vec& tv, Vec& r, std::vector<double>*, bool) {
            if (std::abs(tv[0]) > r_) return false;
            r = eta(tv[0]) - z;
            return true;
        };
        Vec t0(1);
        t0[0] = y0[0];
        NewtonResult a = newton_solve(axis, t0, no);
        if (a.converged && a.residual < res.residual) {
            res.x = Vec::Zero(d);
            res.x[0] = a.x[0];
            res.residual = a.residual;
            res.converged = true;
        }
    }
    if (!res.converged) throw NoConvergence("invert: Newton did not converge", res.residual);

    ChartInverse out;
    out.t = res.x[0];
    out.x = res.x.tail(n);
    out.residual = res.residual;
    out.near_axis = out.x.norm() < 1e-6 * r_;
    out.inside = std::abs(out.t) <= r_ && out.x.norm() <= r_;
    if (opt.replay) {
        out.grid = fixed;
    } else {
        Vec tmp;
        chart_point(res.x, tmp, &out.grid, false);
    }
    return out;
}

TempleChart build_chart(const FrameField& frame, const Vec& q, double r, int orientation) {
    return TempleChart(frame, q, r, orientation);
}

OpticalSample optical_and_radial(const TempleChart& chart, const Vec& z, const RiemannianizedMetric* gR) {
    ChartInverse inv = chart.invert(z);
    OpticalSample s;
    s.point = z;
    s.omega = inv.t;
    s.x = inv.x;
    s.lambda = inv.x.norm();
    s.near_axis = inv.near_axis;
    if (gR && s.lambda > 1e-3 * chart.radius()) {
        const int d = chart.dim();
        const double h = 1e-5 * chart.radius();
        Vec base(d);
        base << inv.t, inv.x;
        Vec grad(d);
        for (int k = 0; k < d; ++k) {
            ChartInvertOptions o;
            o.guess = base;
            o.replay = &inv.grid;
            Vec zp = z, zm = z;
            zp[k] += h;
            zm[k] -= h;
            double wp = chart.invert(zp, o).t, wm = chart.invert(zm, o).t;
            grad[k] = (wp - wm) / (2 * h);
        }
        Mat G = gR->gR_eval(z);
        s.grad_norm_gR = std::sqrt(std::max(0.0, grad.dot(G.ldlt().solve(grad))));
    }
    return s;
}

double gradient_norm_oracle(const TempleChart& chart, double t, const Vec& x) {
    const MetricField& m = chart.metric();
    double lam = x.norm();
    if (lam == 0.0) return std::sqrt(2.0);
    Vec w = chart.shot_velocity(t, x / lam);
    auto tr = integrate_geodesic(m, chart.eta(t), w, lam, chart.frame().tol());
    if (tr.truncated) throw BoundaryError("gradient_norm_oracle: null ray left the domain", tr.exit_param);
    Vec z = tr.points.back(), v = tr.velocities.back();
    Mat E = chart.frame().frame_eval(z);
    return std::sqrt(2.0) * std::abs(inner(m.g_raw(z), v, Vec(E.col(0))));
}

const char* to_string(Relation r) {
    switch (r) {
        case Relation::future: return "future";
        case Relation::past: return "past";
        case Relation::elsewhere: return "elsewhere";
        case Relation::boundary: return "boundary";
    }
    return "?";
}

Relation causal_indicator(const TempleChart& chart, const Vec& z) {
    const double tol = 1e-6 * chart.radius();
    double w = chart.invert(z).t;
    if (std::abs(w) <= tol) return Relation::boundary;
    if (chart.orientation() > 0) return w > 0 ? Relation::future : Relation::elsewhere;
    return w < 0 ? Relation::past : Relation::elsewhere;
}

Relation causal_indicator(const TempleChart& future_chart, const TempleChart& past_chart, const Vec& z) {
    Relation f = causal_indicator(future_chart, z);
    if (f == Relation::future) return f;
    Relation p = causal_indicator(past_chart, z);
    if (p == Relation::past) return p;
    if (f == Relation::boundary || p == Relation::boundary) return Relation::boundary;
    return Relation::elsewhere;
}

std::vector<Vec> chart_samples(const TempleChart& chart, int count, std::uint64_t seed, double min_lambda_fraction) {
    Rng rng(seed);
    const int n = chart.dim() - 1;
    const double r = chart.radius();
    std::vector<Vec> out;
    while (static_cast<int>(out.size()) < count) {
        Vec tx(n + 1);
        tx[0] = rng.uniform(-0.95 * r, 0.95 * r);
        Vec x = rng.in_ball(n, 0.95 * r);
        if (x.norm() < min_lambda_fraction * r) continue;
        tx.tail(n) = x;
        out.push_back(tx);
    }
    return out;
}

Box chart_image_box(const TempleChart& chart, double pad) {
    const int d = chart.dim(), n = d - 1;
    const double r = chart.radius() * (1 - 1e-9);
    Vec lo = chart.center(), hi = chart.center();
    auto add = [&](const Vec& z) {
        lo = lo.cwiseMin(z);
        hi = hi.cwiseMax(z);
    };
    for (double t : {-r, -0.5 * r, 0.0, 0.5 * r, r}) {
        add(chart.eta(t));
        for (const Vec& u : sphere_points(n, 8 * n, 0.1)) add(chart.forward(t, r * u));
    }
    Vec p = Vec::Constant(d, pad * chart.radius());
    Box b{lo - p, hi + p};
    const Box& dom = chart.metric().domain();
    b.lo = b.lo.cwiseMax(dom.lo);
    b.hi = b.hi.cwiseMin(dom.hi);
    return b;
}

}  // namespace temple
