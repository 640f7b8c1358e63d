#pragma once

#include "temple/integrator.hpp"
#include "temple/metric.hpp"
#include "temple/newton.hpp"

#include <optional>
#include <vector>

namespace temple {

enum class CurveKind { timelike, null, spacelike, transport };

const char* to_string(CurveKind k);

struct Trajectory {
    int dim = 0;
    CurveKind kind = CurveKind::transport;
    double tol = 1e-10;
    bool geodesic = true;
    bool truncated = false;
    double exit_param = 0.0;
    std::vector<double> params;
    std::vector<Vec> points;
    std::vector<Vec> velocities;
    Solution sol;  // state layout (x, v, ...); empty dense output for hand-built trajectories

    Vec point(double lambda) const;
    Vec velocity(double lambda) const;
    double lambda_begin() const { return params.front(); }
    double lambda_end() const { return params.back(); }
    std::size_t nodes() const { return params.size(); }
};

struct TransportedField {
    const Trajectory* along = nullptr;
    std::vector<Vec> values;
};

struct JacobiSolution {
    const Trajectory* along = nullptr;
    std::vector<Vec> J;
    std::vector<Vec> DJ;
    Solution sol;  // state (x, v, J, P) with P the covariant derivative of J
};

// Right-hand side for (x, v, W_1..W_k[, J, P]): geodesic, k parallel fields and an optional
// Jacobi pair. Returns false outside the metric's domain box.
Rhs geodesic_flow(const MetricField& m, int transported, bool jacobi);

// Pack/unpack helpers for the flow state.
State pack_state(const Vec& x, const Vec& v, const std::vector<Vec>& extra = {});
inline Vec state_block(const State& y, int d, int block) { return y.segment(block * d, d); }

CurveKind classify(const Mat& g, const Vec& v, double rel_tol = 1e-10);

Trajectory integrate_geodesic(const MetricField& m, const Vec& p, const Vec& v, double lambda_max, double tol = 1e-10);
Trajectory trajectory_from_nodes(const std::vector<double>& params, const std::vector<Vec>& points,
                                 const std::vector<Vec>& velocities, CurveKind kind);

TransportedField parallel_transport(const MetricField& m, const Trajectory& along, const Vec& v0);
JacobiSolution solve_jacobi(const MetricField& m, const Trajectory& along, const Vec& J0, const Vec& DJ0);

// gamma(1) for the geodesic with initial data (q, v). Raises BoundaryError on domain exit.
Vec exp_map(const MetricField& m, const Vec& q, const Vec& v, double tol = 1e-10);

// Non-throwing shot used by solvers. Records or replays the step grid.
bool shoot(const MetricField& m, const Vec& q, const Vec& v, Vec& out, double tol,
           std::vector<double>* grid = nullptr, bool replay = false);

// exp_q(sum_a y_a E_a) for a frame given by the columns of E.
Vec framed_exp(const MetricField& m, const Mat& E, const Vec& q, const Vec& y, double tol = 1e-10);

struct InverseOptions {
    double tol = 1e-10;            // integration tolerance
    double target_residual = 1e-9; // coordinate norm
    double scale = 1.0;            // length scale; FD step is 1e-6 * scale
    std::optional<double> radius;  // frame-coordinate radius the solution must respect
};

// y with framed_exp(q, y) = target. Initial guess from the flat closed form unless given.
Vec invert_framed_exp(const MetricField& m, const Mat& E, const Vec& q, const Vec& target,
                      const std::optional<Vec>& guess = std::nullopt, const InverseOptions& opt = {});

}  // namespace temple
