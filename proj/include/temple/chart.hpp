#pragma once

#include "temple/frame.hpp"
#include "temple/report.hpp"

#include <optional>
#include <vector>

namespace temple {

struct ChartInverse {
    double t = 0.0;
    Vec x;
    double residual = 0.0;
    bool near_axis = false;
    bool inside = true;  // (t, x) in W_r
    std::vector<double> grid;
};

struct ChartInvertOptions {
    double target = 1e-9;  // accepted coordinate residual
    double tol = 1e-13;    // Newton stops early below this
    std::optional<Vec> guess;
    const std::vector<double>* replay = nullptr;  // fixed step grid for the null shot
};

// Phi_q(t, x) = exp_{eta(t)}(s |x| e0 + x.e), s = +1 for the future chart and -1 for the past one.
class TempleChart {
public:
    TempleChart(const FrameField& frame, const Vec& q, double r, int orientation = 1);

    const FrameField& frame() const { return *frame_; }
    const MetricField& metric() const { return frame_->metric(); }
    const Vec& center() const { return q_; }
    double radius() const { return r_; }
    int dim() const { return frame_->dim(); }
    int orientation() const { return orientation_; }
    bool in_w(double t, const Vec& x) const { return std::abs(t) < r_ && x.norm() < r_; }

    Vec eta(double t) const;
    Vec eta_velocity(double t) const;
    Mat eta_frame(double t) const;
    // Shooting velocity at eta(t); null by construction.
    Vec shot_velocity(double t, const Vec& x) const;

    Vec forward(double t, const Vec& x) const;
    bool chart_point(const Vec& tx, Vec& out, std::vector<double>* grid, bool replay) const;
    ChartInverse invert(const Vec& z, const ChartInvertOptions& opt = {}) const;

private:
    State eta_state(double t) const;

    const FrameField* frame_;
    Vec q_;
    double r_;
    int orientation_;
    Solution fwd_;
    Solution bwd_;
};

TempleChart build_chart(const FrameField& frame, const Vec& q, double r, int orientation = 1);

struct OpticalSample {
    Vec point;
    double omega = 0.0;
    double lambda = 0.0;
    std::optional<double> grad_norm_gR;
    bool near_axis = false;
    Vec x;
};

// grad_norm_gR is filled when gR is given and lambda > 1e-3 r.
OpticalSample optical_and_radial(const TempleChart& chart, const Vec& z, const RiemannianizedMetric* gR = nullptr);

// sqrt(2) |g(d_lambda, e0)|: the g_R-norm of grad omega from grad^g omega = -d_lambda.
double gradient_norm_oracle(const TempleChart& chart, double t, const Vec& x);

enum class Relation { future, past, elsewhere, boundary };
const char* to_string(Relation r);

// Future chart: future / elsewhere / boundary. Past chart: past / elsewhere / boundary.
Relation causal_indicator(const TempleChart& chart, const Vec& z);
Relation causal_indicator(const TempleChart& future_chart, const TempleChart& past_chart, const Vec& z);

EstimateReport axis_identities(const TempleChart& chart, int samples, std::uint64_t seed = 42);

struct GradientOptions {
    std::vector<double> lambda_fractions{0.05, 0.1, 0.2, 0.4};
    int directions_per_shell = 8;
    // Shells sit on the null cone of eta(t_fraction * r).
    double t_fraction = 0.5;
};
EstimateReport gradient_estimate_experiment(const TempleChart& chart, const RiemannianizedMetric& gR,
                                            const GradientOptions& opt = {});

EstimateReport omega_lipschitz_experiment(const TempleChart& chart, const GRCache& gR, int pairs,
                                          std::uint64_t seed = 42);

struct JacobiOptions {
    std::vector<double> eps{0.2, 0.1, 0.05};
    int points = 16;
    int directions = 8;
};
// Jacobi fields J(0) = e0, DJ(0) = 0 along geodesics from chart points whose initial velocity
// has max_a |g(v, e_a)| = eps; reports max |g(J,J) + 1| per eps and successive ratios.
EstimateReport jacobi_estimate_experiment(const TempleChart& chart, const JacobiOptions& opt = {},
                                          std::uint64_t seed = 42);

// Coordinate box around the image of W_r, from forward samples, padded by pad * r.
Box chart_image_box(const TempleChart& chart, double pad = 0.05);

// Deterministic sample of W_r with |x| >= min_lambda.
std::vector<Vec> chart_samples(const TempleChart& chart, int count, std::uint64_t seed, double min_lambda_fraction = 0.01);

}  // namespace temple
