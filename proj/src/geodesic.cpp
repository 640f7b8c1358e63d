#include "temple/geodesic.hpp"

#include "temple/errors.hpp"

#include <cmath>

namespace temple {

const char* to_string(CurveKind k) {
    switch (k) {
        case CurveKind::timelike: return "timelike";
        case CurveKind::null: return "null";
        case CurveKind::spacelike: return "spacelike";
        case CurveKind::transport: return "transport";
    }
    return "?";
}

Rhs geodesic_flow(const MetricField& m, int transported, bool jacobi) {
    const int d = m.dim();
    const bool flat = m.is_flat_chart();
    const Box& box = m.domain();
    return [&m, d, flat, &box, transported, jacobi](double, const State& y, State& dy) {
        Vec x = y.segment(0, d);
        if (!box.contains(x)) return false;
        Vec v = y.segment(d, d);
        dy.resize(y.size());
        dy.segment(0, d) = v;
        if (flat) {
            dy.segment(d, y.size() - d).setZero();
            if (jacobi) dy.segment((2 + transported) * d, d) = y.segment((3 + transported) * d, d);
            return true;
        }
        Christoffel G = m.christoffel_raw(x);
        dy.segment(d, d) = -contract(G, v, v);
        for (int k = 0; k < transported; ++k) {
            Vec w = y.segment((2 + k) * d, d);
            dy.segment((2 + k) * d, d) = -contract(G, v, w);
        }
        if (jacobi) {
            const int jo = (2 + transported) * d;
            Vec J = y.segment(jo, d), P = y.segment(jo + d, d);
            Riemann R = m.riemann_raw(x);
            dy.segment(jo, d) = P - contract(G, v, J);
            dy.segment(jo + d, d) = -riemann_apply(R, J, v, v) - contract(G, v, P);
        }
        return true;
    };
}

State pack_state(const Vec& x, const Vec& v, const std::vector<Vec>& extra) {
    const int d = static_cast<int>(x.size());
    State y(d * (2 + static_cast<int>(extra.size())));
    y.segment(0, d) = x;
    y.segment(d, d) = v;
    for (std::size_t k = 0; k < extra.size(); ++k) y.segment((2 + static_cast<int>(k)) * d, d) = extra[k];
    return y;
}

CurveKind classify(const Mat& g, const Vec& v, double rel_tol) {
    double n = inner(g, v, v);
    double s = v.squaredNorm();
    if (std::abs(n) <= rel_tol * std::max(s, 1e-300)) return CurveKind::null;
    return n < 0 ? CurveKind::timelike : CurveKind::spacelike;
}

Vec Trajectory::point(double lambda) const {
    if (!sol.dense.empty()) return sol.at(lambda).segment(0, dim);
    // Hand-built trajectories: linear interpolation between nodes.
    if (lambda <= params.front()) return points.front();
    for (std::size_t i = 1; i < params.size(); ++i)
        if (lambda <= params[i]) {
            double w = (lambda - params[i - 1]) / (params[i] - params[i - 1]);
            return (1 - w) * points[i - 1] + w * points[i];
        }
    return points.back();
}

Vec Trajectory::velocity(double lambda) const {
    if (!sol.dense.empty()) return sol.at(lambda).segment(dim, dim);
    if (lambda <= params.front()) return velocities.front();
    for (std::size_t i = 1; i < params.size(); ++i)
        if (lambda <= params[i]) {
            double w = (lambda - params[i - 1]) / (params[i] - params[i - 1]);
            return (1 - w) * velocities[i - 1] + w * velocities[i];
        }
    return velocities.back();
}

namespace {

Trajectory wrap(Solution sol, int d, CurveKind kind, double tol) {
    Trajectory t;
    t.dim = d;
    t.kind = kind;
    t.tol = tol;
    t.truncated = sol.truncated;
    t.exit_param = sol.s.back();
    t.params = sol.s;
    for (const auto& y : sol.y) {
        t.points.push_back(y.segment(0, d));
        t.velocities.push_back(y.segment(d, d));
    }
    t.sol = std::move(sol);
    return t;
}

void check_on_domain(const MetricField& m, const Trajectory& along) {
    for (const auto& p : along.points)
        if (!m.contains(p)) throw DomainError("trajectory leaves the metric domain");
}

// Geodesic check for trajectories not produced by the integrator: norm conservation and
// a finite-difference residual of the geodesic equation at interior nodes.
void require_geodesic(const MetricField& m, const Trajectory& along) {
    if (along.velocities.empty()) throw PreconditionError("empty trajectory");
    double n0 = inner(m.g_raw(along.points[0]), along.velocities[0], along.velocities[0]);
    double scale = std::max(1.0, along.velocities[0].squaredNorm());
    for (std::size_t i = 0; i < along.nodes(); ++i) {
        double ni = inner(m.g_raw(along.points[i]), along.velocities[i], along.velocities[i]);
        if (std::abs(ni - n0) > 1e-6 * scale) throw PreconditionError("solve_jacobi: input is not a geodesic (norm drift)");
    }
    if (along.geodesic && !along.sol.dense.empty()) return;
    for (std::size_t i = 1; i + 1 < along.nodes(); ++i) {
        double h1 = along.params[i] - along.params[i - 1], h2 = along.params[i + 1] - along.params[i];
        Vec acc = (along.velocities[i + 1] - along.velocities[i - 1]) / (h1 + h2);
        Vec res = acc + contract(m.christoffel_raw(along.points[i]), along.velocities[i], along.velocities[i]);
        if (res.norm() > 1e-3 * scale) throw PreconditionError("solve_jacobi: input is not a geodesic");
    }
}

}  // namespace

Trajectory integrate_geodesic(const MetricField& m, const Vec& p, const Vec& v, double lambda_max, double tol) {
    if (!(tol > 0)) throw PreconditionError("integrate_geodesic: tol must be positive");
    if (!m.contains(p)) throw DomainError("integrate_geodesic: start point outside domain");
    const int d = m.dim();
    IntegratorOptions opt;
    opt.rtol = opt.atol = tol;
    Solution sol = integrate(geodesic_flow(m, 0, false), 0.0, lambda_max, pack_state(p, v), opt);
    if (sol.truncated && sol.s.size() <= 1) throw BoundaryError("integrate_geodesic: immediate domain exit", 0.0);
    return wrap(std::move(sol), d, classify(m.g_raw(p), v), tol);
}

Trajectory trajectory_from_nodes(const std::vector<double>& params, const std::vector<Vec>& points,
                                 const std::vector<Vec>& velocities, CurveKind kind) {
    if (params.size() != points.size() || params.size() != velocities.size() || params.empty())
        throw PreconditionError("trajectory_from_nodes: inconsistent node arrays");
    Trajectory t;
    t.dim = static_cast<int>(points[0].size());
    t.kind = kind;
    t.geodesic = false;
    t.params = params;
    t.points = points;
    t.velocities = velocities;
    t.exit_param = params.back();
    return t;
}

TransportedField parallel_transport(const MetricField& m, const Trajectory& along, const Vec& v0) {
    check_on_domain(m, along);
    const int d = m.dim();
    IntegratorOptions opt;
    opt.rtol = opt.atol = along.tol;
    State y0 = pack_state(along.points.front(), along.velocities.front(), {v0});
    Solution sol = integrate(geodesic_flow(m, 1, false), along.params.front(), along.params.back(), y0, opt);
    if (sol.truncated) throw DomainError("parallel_transport: transport left the domain");
    TransportedField tf;
    tf.along = &along;
    for (double s : along.params) tf.values.push_back(sol.at(s).segment(2 * d, d));
    return tf;
}

JacobiSolution solve_jacobi(const MetricField& m, const Trajectory& along, const Vec& J0, const Vec& DJ0) {
    require_geodesic(m, along);
    check_on_domain(m, along);
    const int d = m.dim();
    IntegratorOptions opt;
    opt.rtol = opt.atol = along.tol;
    State y0 = pack_state(along.points.front(), along.velocities.front(), {J0, DJ0});
    Solution sol = integrate(geodesic_flow(m, 0, true), along.params.front(), along.params.back(), y0, opt);
    if (sol.truncated) throw DomainError("solve_jacobi: integration left the domain");
    JacobiSolution js;
    js.along = &along;
    for (double s : along.params) {
        State y = sol.at(s);
        js.J.push_back(y.segment(2 * d, d));
        js.DJ.push_back(y.segment(3 * d, d));
    }
    js.sol = std::move(sol);
    return js;
}

bool shoot(const MetricField& m, const Vec& q, const Vec& v, Vec& out, double tol, std::vector<double>* grid,
           bool replay) {
    if (!m.contains(q)) return false;
    const int d = m.dim();
    if (m.is_flat_chart()) {
        out = q + v;
        return m.contains(out);
    }
    IntegratorOptions opt;
    opt.rtol = opt.atol = tol;
    opt.dense = false;
    if (replay && grid && grid->size() >= 2) opt.replay = grid;
    Solution sol = integrate(geodesic_flow(m, 0, false), 0.0, 1.0, pack_state(q, v), opt);
    if (sol.truncated) return false;
    if (grid && !opt.replay) *grid = sol.grid_fractions();
    out = sol.final_state().segment(0, d);
    return true;
}

Vec exp_map(const MetricField& m, const Vec& q, const Vec& v, double tol) {
    if (!m.contains(q)) throw DomainError("exp_map: base point outside domain");
    const int d = m.dim();
    if (m.is_flat_chart()) {
        Vec out = q + v;
        if (m.contains(out)) return out;
        double s = 1.0;
        const Box& b = m.domain();
        for (int i = 0; i < d; ++i) {
            if (v[i] > 0) s = std::min(s, (b.hi[i] - q[i]) / v[i]);
            if (v[i] < 0) s = std::min(s, (b.lo[i] - q[i]) / v[i]);
        }
        throw BoundaryError("exp_map: geodesic left the domain before parameter 1", s);
    }
    IntegratorOptions opt;
    opt.rtol = opt.atol = tol;
    opt.dense = false;
    Solution sol = integrate(geodesic_flow(m, 0, false), 0.0, 1.0, pack_state(q, v), opt);
    if (sol.truncated) throw BoundaryError("exp_map: geodesic left the domain before parameter 1", sol.s.back());
    return sol.final_state().segment(0, d);
}

Vec framed_exp(const MetricField& m, const Mat& E, const Vec& q, const Vec& y, double tol) {
    return exp_map(m, q, E * y, tol);
}

Vec invert_framed_exp(const MetricField& m, const Mat& E, const Vec& q, const Vec& target,
                      const std::optional<Vec>& guess, const InverseOptions& opt) {
    if (!m.contains(q)) throw DomainError("invert_framed_exp: base point outside domain");
    if (!m.contains(target)) throw OutOfRadius("invert_framed_exp: target outside domain");
    const int d = m.dim();
    Eigen::FullPivLU<Mat> lu(E);
    Vec y0 = guess ? *guess : Vec(lu.solve(target - q));
    if ((target - q).norm() == 0.0) return Vec::Zero(d);
    if (opt.radius && y0.norm() > 2.0 * *opt.radius) throw OutOfRadius("invert_framed_exp: target outside normal radius");

    ShootFn f = [&](const Vec& y, Vec& r, std::vector<double>* grid, bool replay) {
        Vec out;
        if (!shoot(m, q, E * y, out, opt.tol, grid, replay)) return false;
        r = out - target;
        return true;
    };
    NewtonOptions no;
    no.fd_step = 1e-6 * opt.scale;
    no.accept = opt.target_residual;
    no.tol = std::min(1e-12, 1e-3 * opt.target_residual);
    NewtonResult res = newton_solve(f, y0, no);
    if (!res.converged) throw NoConvergence("invert_framed_exp: Newton did not converge", res.residual);
    if (opt.radius && res.x.norm() > *opt.radius) throw OutOfRadius("invert_framed_exp: solution outside normal radius");
    return res.x;
}

}  // namespace temple
