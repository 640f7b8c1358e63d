#pragma once

#include "temple/geodesic.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace temple {

// Fermi-style frame about p: Sigma = exp_p(x.e) with the frame parallel along the radial
// geodesics, then F(t, x) = exp_{sigma(x)}(t e0) with the frame parallel along e0-geodesics.
class FrameField {
public:
    FrameField(MetricPtr metric, Vec center, double radius, double tol = 1e-10);

    const MetricField& metric() const { return *metric_; }
    MetricPtr metric_ptr() const { return metric_; }
    const Vec& center() const { return p_; }
    double radius() const { return radius_; }
    int dim() const { return metric_->dim(); }
    double tol() const { return tol_; }
    const Mat& frame_at_center() const { return Ep_; }

    // (t, x) packed as a vector of length n+1.
    bool in_w(const Vec& tx, double slack = 0.0) const;
    Vec fermi_map(const Vec& tx) const;
    Vec sigma_surface(const Vec& x) const;
    // Point and frame (columns e_a) at F(t, x).
    std::pair<Vec, Mat> fermi_point_frame(const Vec& tx) const;
    Vec fermi_inverse(const Vec& z, const std::optional<Vec>& guess = std::nullopt) const;
    Mat frame_eval(const Vec& z) const;

    // Non-throwing point evaluation with step-grid record/replay, used by the Newton solvers.
    bool fermi_point(const Vec& tx, Vec& out, std::vector<double>* grid, bool replay) const;

    // Fermi map Jacobian condition number and determinant sign at (t, x).
    bool jacobian_ok(const Vec& tx, int reference_sign, double max_cond, int* sign_out = nullptr) const;

    std::string dump_csv(int per_axis) const;

private:
    MetricPtr metric_;
    Vec p_;
    double radius_;
    double tol_;
    Mat Ep_;
};

FrameField build_frame(MetricPtr metric, const Vec& p, double requested_radius, double tol = 1e-10);

class RiemannianizedMetric {
public:
    explicit RiemannianizedMetric(const FrameField& frame) : frame_(&frame) {}
    const FrameField& frame() const { return *frame_; }
    const MetricField& base() const { return frame_->metric(); }
    Mat gR_eval(const Vec& z) const;

private:
    const FrameField* frame_;
};

RiemannianizedMetric riemannianize(const FrameField& frame);

// g_R tabulated on a coordinate grid over a box and interpolated multilinearly; the frame
// field is expensive to evaluate, so distance computations read from this cache.
class GRCache {
public:
    GRCache(const RiemannianizedMetric& gR, const Box& region, int nodes_per_axis);
    Mat eval(const Vec& z) const;
    const Box& region() const { return region_; }
    double min_eigenvalue() const { return min_eig_; }
    double max_eigenvalue() const { return max_eig_; }

private:
    Box region_;
    int n_;
    int d_;
    std::vector<Mat> values_;
    double min_eig_ = 0.0;
    double max_eig_ = 0.0;
};

struct DistanceBudget {
    int quadrature_nodes = 8;
    int lattice_nodes_per_axis = 0;  // 0: chord only
    int smoothing_iterations = 100;
};

struct DistanceBound {
    double lower = 0.0;
    double upper = 0.0;
    std::vector<Vec> path;
};

// Upper bound from the chord and (optionally) a lattice path relaxed by local curve
// shortening; lower bound sqrt(min eigenvalue of g_R over region) * coordinate distance.
DistanceBound riemannian_distance(const GRCache& gR, const Vec& a, const Vec& b, const DistanceBudget& budget = {});
DistanceBound riemannian_distance(const RiemannianizedMetric& gR, const Vec& a, const Vec& b, const Box& region,
                                  const DistanceBudget& budget = {});

struct NormalRadiusOptions {
    int samples = 16;
    double max_cond = 1e6;
    double sweep_factor = 1.25;
};

double normal_radius(const MetricField& metric, const FrameField& frame, const Vec& q, const NormalRadiusOptions& opt = {});
// Same sweep with an explicitly given frame at q.
double normal_radius_with(const MetricField& metric, const Mat& Eq, const Vec& q, double start, double tol,
                          const NormalRadiusOptions& opt = {});

struct SweepRow {
    double x = 0.0;
    double value = 0.0;
    bool pass = false;
};

struct UniformRadius {
    double radius = 0.0;
    double delta0 = std::numeric_limits<double>::infinity();
    double eps0 = std::numeric_limits<double>::infinity();
    double rp_quarter = 0.0;
    double rn = 0.0;
    std::vector<SweepRow> eps_table;     // eps -> max g(J,J) over samples (pass: all timelike)
    std::vector<SweepRow> delta_table;   // delta -> measured eps(delta)
    std::vector<double> normal_radii;
};

struct UniformRadiusOptions {
    int directions = 6;
    double eps_start = 1.0 / 32.0;
    int eps_levels = 8;
    double delta_start = 1.0 / 256.0;
    int delta_levels = 8;
    int delta_nodes = 4;
    int delta_samples = 8;  // K points used for the velocity table
    NormalRadiusOptions normal;
};

// K sampled from F(closure W_{3R_p/4}).
std::vector<Vec> temple_sample_set(const FrameField& frame, int count);

UniformRadius uniform_temple_radius(const MetricField& metric, const FrameField& frame, const std::vector<Vec>& K,
                                    const UniformRadiusOptions& opt = {});

// Measured sup over [0,1] of max_a |g(gamma'(lambda), e_a)| for the geodesic from z with
// initial velocity v; nodes sample the parameter interval. Returns nullopt if the geodesic
// leaves the frame domain.
std::optional<double> velocity_bound(const FrameField& frame, const Vec& z, const Vec& v, int nodes);

}  // namespace temple
