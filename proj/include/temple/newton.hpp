#pragma once

#include "temple/linalg.hpp"

#include <functional>
#include <vector>

namespace temple {

struct NewtonOptions {
    double tol = 1e-11;     // residual at which iteration stops early
    double accept = 1e-9;   // residual that still counts as converged when progress stalls
    int max_iter = 50;
    int max_halvings = 8;
    double fd_step = 1e-7;
    bool chord = true;      // keep the Jacobian while the residual contracts by at least 2x
};

// Residual evaluation. When replay is false the callee may record its step grid into
// *grid; when replay is true it must reuse *grid. Returns false if the evaluation failed
// (for example the shot geodesic left the domain).
using ShootFn = std::function<bool(const Vec& x, Vec& r, std::vector<double>* grid, bool replay)>;

struct NewtonResult {
    Vec x;
    double residual = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

// Damped Newton with forward-difference Jacobian. Jacobian columns are evaluated on the
// step grid recorded at the current iterate so that the differences are smooth.
NewtonResult newton_solve(const ShootFn& f, const Vec& x0, const NewtonOptions& opt);

}  // namespace temple
