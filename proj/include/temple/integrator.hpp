#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace temple {

// Geodesic + frame transport in 4+1 dimensions needs 2*5 + 5*5 = 35 entries.
constexpr int kMaxState = 48;

using State = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxState, 1>;

// Returns false when the state left the region where the right-hand side is defined.
using Rhs = std::function<bool(double s, const State& y, State& dy)>;

struct DenseStep {
    double s0 = 0.0;
    double h = 0.0;
    State r1, r2, r3, r4, r5;

    State eval(double s) const;
    State derivative(double s) const;
};

struct IntegratorOptions {
    double rtol = 1e-10;
    double atol = 1e-10;
    double h_init = 0.0;
    int max_steps = 200000;
    // Fixed step grid as fractions of the span; disables error control.
    const std::vector<double>* replay = nullptr;
    bool dense = true;
    // Applied to each accepted state (e.g. null-cone projection).
    std::function<void(State&)> project;
    double min_step_fraction = 1e-11;
};

struct Solution {
    std::vector<double> s;
    std::vector<State> y;
    std::vector<DenseStep> dense;
    bool truncated = false;
    int accepted = 0;
    int rejected = 0;
    long rhs_evals = 0;

    double s_begin() const { return s.front(); }
    double s_end() const { return s.back(); }
    const State& final_state() const { return y.back(); }
    // Dense-output interpolation; s is clamped to the integrated span.
    State at(double s_query) const;
    State derivative_at(double s_query) const;
    std::vector<double> grid_fractions() const;
};

// Dormand-Prince 5(4) with Hairer's continuous extension. Integrates from s0 towards s1
// (either direction). On domain exit the step is halved until it falls below
// min_step_fraction * |s1 - s0|; the solution is then truncated at the last accepted node.
Solution integrate(const Rhs& f, double s0, double s1, const State& y0, const IntegratorOptions& opt = {});

}  // namespace temple
