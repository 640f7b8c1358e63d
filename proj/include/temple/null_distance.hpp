#pragma once

#include "temple/frame.hpp"
#include "temple/report.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace temple {

struct PiecewiseCausalPath {
    std::vector<Vec> breakpoints;
    std::vector<int> orientation;       // +1 future, -1 past, per segment
    std::vector<double> tau_values;     // per breakpoint
    std::vector<double> snap_gaps;      // distance from the integrated segment end to the next breakpoint
    std::vector<Trajectory> segments;   // may be empty for paths built by hand
    std::size_t size() const { return orientation.size(); }
};

// Sum of |tau(x_i) - tau(x_{i-1})| over breakpoints.
double null_length(const PiecewiseCausalPath& path, const TimeFunction& tau);
std::string path_csv(const PiecewiseCausalPath& path);

enum class CausalRelation { future, past, spacelike, boundary_band };
const char* to_string(CausalRelation r);

struct CausalVerdict {
    CausalRelation relation = CausalRelation::boundary_band;
    std::string method = "exp-inversion";
    Vec y;                 // frame coordinates of exp_a^{-1}(b)
    double margin = 0.0;   // |y0| - |y_spatial|
};

// Classifies b relative to a from v = exp_a^{-1}(b) in the coordinate frame at a.
CausalVerdict causal_oracle(const MetricField& metric, const Vec& a, const Vec& b, double tol = 1e-10);

struct LatticeOptions {
    int max_multiple = 13;       // edge lengths m*h with m <= max_multiple in the time coordinate
    bool project_null = true;
    double tol = 1e-10;
};

class NullLattice {
public:
    const MetricField& metric() const { return *metric_; }
    const Box& region() const { return region_; }
    double spacing() const { return h_; }
    int directions() const { return directions_; }
    const LatticeOptions& options() const { return opt_; }
    const std::vector<int>& counts() const { return counts_; }

    std::size_t node_count() const { return keys_.size(); }
    std::size_t edge_count() const { return targets_.size(); }
    std::size_t dropped_edges() const { return dropped_; }
    double max_snap() const { return max_snap_; }
    double max_null_residual() const { return max_null_; }

    Vec node_point(int node) const;
    // Pre-snap endpoint of an edge.
    Vec edge_end(std::size_t e) const;
    int edge_orientation(std::size_t e) const { return (codes_[e] & 1) ? -1 : 1; }
    int edge_source(std::size_t e) const;
    std::pair<std::size_t, std::size_t> edges_of(int node) const { return {offsets_[node], offsets_[node + 1]}; }
    int edge_target(std::size_t e) const { return targets_[e]; }
    // Node index for a grid multi-index, -1 if inactive or out of range.
    int find(const std::vector<int>& index) const;
    // Active cell corners around x.
    std::vector<int> corners(const Vec& x) const;

    // |tau(edge end) - tau(edge source)| for every edge.
    std::vector<double> weights(const TimeFunction& tau) const;
    Trajectory edge_trajectory(std::size_t e) const;

private:
    friend NullLattice build_lattice_masked(const MetricField&, const Box&, double, int, const LatticeOptions&,
                                            const std::vector<Vec>*, double);
    const MetricField* metric_ = nullptr;
    Box region_;
    double h_ = 0.0;
    int directions_ = 0;
    LatticeOptions opt_;
    std::vector<int> counts_;
    std::vector<std::int64_t> keys_;
    std::unordered_map<std::int64_t, int> index_;
    std::vector<std::size_t> offsets_;
    std::vector<int> targets_;
    std::vector<std::uint16_t> codes_;   // bit 0 orientation, bits 1..7 direction, bits 8.. multiple
    std::vector<float> snap_offset_;     // edge end minus target node, per coordinate
    std::vector<Vec> dirs_;
    std::size_t dropped_ = 0;
    double max_snap_ = 0.0;
    double max_null_ = 0.0;

    std::int64_t key(const std::vector<int>& idx) const;
    std::vector<int> unkey(std::int64_t k) const;
};

// Grid of spacing h over region with future and past null edges in `directions` spatial
// directions per node (the 2n axis directions first).
NullLattice build_null_lattice(const MetricField& metric, const Box& region, double h, int directions,
                               const LatticeOptions& opt = {});
// Same, restricted to nodes within tube_radius of a polyline.
NullLattice build_null_lattice_tube(const MetricField& metric, const Box& region, double h, int directions,
                                    const std::vector<Vec>& polyline, double tube_radius, const LatticeOptions& opt = {});

struct NullDistanceEstimate {
    double lower = 0.0;
    double upper = 0.0;
    PiecewiseCausalPath witness;
    double resolution = 0.0;
    std::vector<std::pair<double, double>> refinement_history;  // (h, best upper after that level)
    std::vector<double> level_values;                           // shortest path on each level's own lattice
};

// Upper bound from lattice Dijkstra plus short flat zigzag connectors to p and q; lower bound
// |tau(q) - tau(p)|. weights may be precomputed with lattice.weights(tau).
NullDistanceEstimate estimate_null_distance(const NullLattice& lattice, const TimeFunction& tau, const Vec& p,
                                            const Vec& q, int refinements, const std::vector<double>* weights = nullptr);

// Two null segments p -> m -> q built in the coordinate frame at p (one segment when causal).
PiecewiseCausalPath flat_zigzag(const MetricField& metric, const TimeFunction& tau, const Vec& p, const Vec& q);

EstimateReport anti_lipschitz_constant(const MetricField& metric, const GRCache& gR, const TimeFunction& tau,
                                       const Box& region, int samples, std::uint64_t seed = 42);

}  // namespace temple
