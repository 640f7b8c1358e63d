#include "temple/null_distance.hpp"

#include "temple/errors.hpp"
#include "temple/parallel.hpp"
#include "temple/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace temple {

NullLattice build_lattice_masked(const MetricField& metric, const Box& region, double h, int directions,
                                 const LatticeOptions& opt, const std::vector<Vec>* polyline, double tube_radius);

double null_length(const PiecewiseCausalPath& path, const TimeFunction& tau) {
    double s = 0.0;
    for (std::size_t i = 1; i < path.breakpoints.size(); ++i)
        s += std::abs(tau(path.breakpoints[i]) - tau(path.breakpoints[i - 1]));
    return s;
}

std::string path_csv(const PiecewiseCausalPath& path) {
    std::ostringstream os;
    os.precision(17);
    const int d = path.breakpoints.empty() ? 0 : static_cast<int>(path.breakpoints[0].size());
    os << "index";
    for (int i = 0; i < d; ++i) os << ",x" << i;
    os << ",tau,orientation\n";
    for (std::size_t i = 0; i < path.breakpoints.size(); ++i) {
        os << i;
        for (int k = 0; k < d; ++k) os << "," << path.breakpoints[i][k];
        os << "," << (i < path.tau_values.size() ? path.tau_values[i] : std::nan(""));
        // orientation of the segment arriving at this breakpoint
        os << "," << (i == 0 ? "start" : (path.orientation[i - 1] > 0 ? "future" : "past")) << "\n";
    }
    return os.str();
}

const char* to_string(CausalRelation r) {
    switch (r) {
        case CausalRelation::future: return "future";
        case CausalRelation::past: return "past";
        case CausalRelation::spacelike: return "spacelike";
        case CausalRelation::boundary_band: return "boundary-band";
    }
    return "?";
}

CausalVerdict causal_oracle(const MetricField& metric, const Vec& a, const Vec& b, double tol) {
    CausalVerdict out;
    const int d = metric.dim();
    if (!metric.contains(a) || !metric.contains(b)) throw DomainError("causal_oracle: point outside domain");
    if ((a - b).norm() == 0.0) {
        out.y = Vec::Zero(d);
        return out;
    }
    Mat E = coordinate_frame(metric.g_raw(a));
    InverseOptions io;
    io.tol = tol;
    io.scale = std::max((b - a).norm(), 1e-3);
    io.target_residual = 1e-11 * std::max(1.0, (b - a).norm());
    try {
        out.y = invert_framed_exp(metric, E, a, b, std::nullopt, io);
    } catch (const NoConvergence& e) {
        throw OutOfRadius(std::string("causal_oracle: exp inversion failed: ") + e.what());
    } catch (const BoundaryError& e) {
        throw OutOfRadius(std::string("causal_oracle: exp inversion failed: ") + e.what());
    }
    // In the frame, g(v,v) = -y0^2 + |y|^2 and |v|^2_{g_R} = |y|^2 (Euclidean).
    const Vec& y = out.y;
    const double ys = y.tail(d - 1).norm();
    const double gvv = -y[0] * y[0] + ys * ys;
    const double tol_c = 1e-7 * y.squaredNorm();
    out.margin = std::abs(y[0]) - ys;
    if (std::abs(gvv) <= tol_c)
        out.relation = CausalRelation::boundary_band;
    else if (gvv < 0)
        out.relation = y[0] > 0 ? CausalRelation::future : CausalRelation::past;
    else
        out.relation = CausalRelation::spacelike;
    return out;
}

// ---------------------------------------------------------------------------------------------
// lattice

namespace {

// Spatial coordinate directions whose multiples land on or near grid nodes: the axes, then the
// diagonals and the (4,3,5) and (12,5,13) Pythagorean families of each coordinate plane, then
// body diagonals; low-discrepancy sphere points only if more are requested.
std::vector<Vec> lattice_directions(int n, int directions) {
    if (directions < 2 * n) throw PreconditionError("build_null_lattice: need at least 2n directions");
    std::vector<Vec> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(unit(n, i));
        out.push_back(-unit(n, i));
    }
    std::vector<Vec> pool;
    auto planar = [&](double a, double b) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                for (int si : {1, -1})
                    for (int sj : {1, -1}) {
                        Vec u = Vec::Zero(n);
                        u[i] = si * a;
                        u[j] = sj * b;
                        pool.push_back(u.normalized());
                        if (a != b) {
                            u[i] = si * b;
                            u[j] = sj * a;
                            pool.push_back(u.normalized());
                        }
                    }
    };
    planar(1, 1);
    planar(4, 3);
    planar(12, 5);
    if (n >= 3)
        for (int mask = 0; mask < (1 << n); ++mask) {
            Vec u(n);
            for (int i = 0; i < n; ++i) u[i] = (mask & (1 << i)) ? -1.0 : 1.0;
            pool.push_back(u.normalized());
        }
    const int extra = directions - 2 * n;
    for (int k = 0; k < extra && k < static_cast<int>(pool.size()); ++k) out.push_back(pool[k]);
    if (extra > static_cast<int>(pool.size()))
        for (const Vec& u : sphere_points(n, extra - static_cast<int>(pool.size()), 0.3)) out.push_back(u);
    if (out.size() > 127) throw PreconditionError("build_null_lattice: at most 127 directions");
    return out;
}

// Null velocity whose spatial coordinate part is u, with v^0 of sign orientation.
Vec edge_velocity(const Mat& g, const Vec& u, int orientation) {
    const int n = static_cast<int>(u.size()), d = n + 1;
    Vec gu = g.block(0, 1, 1, n).transpose();
    const double A = g(0, 0), B = 2.0 * gu.dot(u), C = u.dot(g.block(1, 1, n, n) * u);
    const double disc = std::sqrt(std::max(0.0, B * B - 4 * A * C));
    // A < 0: the roots have opposite signs
    double r1 = (-B + disc) / (2 * A), r2 = (-B - disc) / (2 * A);
    double v0 = orientation > 0 ? std::max(r1, r2) : std::min(r1, r2);
    Vec v(d);
    v << v0, u;
    return v;
}

std::function<void(State&)> null_projector(const MetricField& m) {
    const int d = m.dim();
    return [&m, d](State& y) {
        Vec x = y.segment(0, d), v = y.segment(d, d);
        Mat g = m.g_raw(x);
        Vec nrm = Vec::Zero(d);
        nrm[0] = 1.0 / std::sqrt(-g(0, 0));
        double c = -inner(g, v, nrm);
        Vec w = v - c * nrm;
        double wn = std::sqrt(std::max(0.0, inner(g, w, w)));
        if (wn > 0) y.segment(d, d) = c * nrm + (std::abs(c) / wn) * w;
    };
}

// Affine parameters at which x^0 has advanced by orientation * k * h, k = 1..kmax.
struct EdgeFlight {
    Solution sol;
    std::vector<double> lambdas;  // NaN where not reached
    bool flat = false;
    Vec x, v;
};

EdgeFlight fly(const MetricField& m, const Vec& x, const Vec& v, int orientation, double h, int kmax,
               const LatticeOptions& opt) {
    const int d = m.dim();
    EdgeFlight f;
    f.x = x;
    f.v = v;
    f.lambdas.assign(kmax, std::nan(""));
    const double rate = std::abs(v[0]);
    if (m.is_flat_chart()) {
        f.flat = true;
        for (int k = 1; k <= kmax; ++k) f.lambdas[k - 1] = k * h / rate;
        return f;
    }
    IntegratorOptions io;
    io.rtol = io.atol = opt.tol;
    if (opt.project_null) io.project = null_projector(m);
    f.sol = integrate(geodesic_flow(m, 0, false), 0.0, 1.15 * (kmax + 0.5) * h / rate, pack_state(x, v), io);
    auto advance = [&](double s) { return orientation * (f.sol.at(s)[0] - x[0]); };
    auto rate_at = [&](double s) { return orientation * f.sol.derivative_at(s)[0]; };
    const double s_end = f.sol.s_end();
    const double reach = advance(s_end);
    double lam = 0.0;
    for (int k = 1; k <= kmax; ++k) {
        const double want = k * h;
        if (reach < want) break;
        // Newton on the monotone x^0(lambda), safeguarded by bisection
        double lo = lam, hi = s_end;
        lam = std::clamp(lam + h / rate, lo, hi);
        for (int it = 0; it < 60; ++it) {
            double r = advance(lam) - want;
            if (std::abs(r) <= 1e-14 * h * kmax) break;
            (r < 0 ? lo : hi) = lam;
            double next = lam - r / rate_at(lam);
            lam = (next > lo && next < hi) ? next : 0.5 * (lo + hi);
        }
        f.lambdas[k - 1] = lam;
    }
    (void)d;
    return f;
}

Vec flight_point(const EdgeFlight& f, double lam) {
    if (f.flat) return f.x + lam * f.v;
    return f.sol.at(lam).segment(0, f.x.size());
}

Vec flight_velocity(const EdgeFlight& f, double lam) {
    const int d = static_cast<int>(f.x.size());
    if (f.flat) return f.v;
    return f.sol.at(lam).segment(d, d);
}

struct EdgeCandidate {
    int target = -1;
    std::uint16_t code = 0;
    Vec offset;
    double snap = 0.0;
    double null_res = 0.0;
};

struct NodeEdges {
    std::vector<EdgeCandidate> kept;
    std::size_t dropped = 0;
};

}  // namespace

std::int64_t NullLattice::key(const std::vector<int>& idx) const {
    std::int64_t k = 0;
    for (std::size_t i = 0; i < counts_.size(); ++i) k = k * counts_[i] + idx[i];
    return k;
}

std::vector<int> NullLattice::unkey(std::int64_t k) const {
    std::vector<int> idx(counts_.size());
    for (int i = static_cast<int>(counts_.size()) - 1; i >= 0; --i) {
        idx[i] = static_cast<int>(k % counts_[i]);
        k /= counts_[i];
    }
    return idx;
}

Vec NullLattice::node_point(int node) const {
    auto idx = unkey(keys_[node]);
    Vec x = region_.lo;
    for (std::size_t i = 0; i < idx.size(); ++i) x[i] += idx[i] * h_;
    return x;
}

Vec NullLattice::edge_end(std::size_t e) const {
    const int d = static_cast<int>(counts_.size());
    Vec x = node_point(targets_[e]);
    for (int i = 0; i < d; ++i) x[i] += snap_offset_[e * d + i];
    return x;
}

int NullLattice::edge_source(std::size_t e) const {
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), e);
    return static_cast<int>(it - offsets_.begin()) - 1;
}

int NullLattice::find(const std::vector<int>& index) const {
    for (std::size_t i = 0; i < index.size(); ++i)
        if (index[i] < 0 || index[i] >= counts_[i]) return -1;
    auto it = index_.find(key(index));
    return it == index_.end() ? -1 : it->second;
}

std::vector<int> NullLattice::corners(const Vec& x) const {
    const int d = static_cast<int>(counts_.size());
    std::vector<int> base(d);
    for (int i = 0; i < d; ++i) base[i] = static_cast<int>(std::floor((x[i] - region_.lo[i]) / h_));
    std::vector<int> out;
    for (int mask = 0; mask < (1 << d); ++mask) {
        std::vector<int> idx = base;
        for (int i = 0; i < d; ++i)
            if (mask & (1 << i)) ++idx[i];
        int nd = find(idx);
        if (nd >= 0) out.push_back(nd);
    }
    return out;
}

std::vector<double> NullLattice::weights(const TimeFunction& tau) const {
    std::vector<double> w(targets_.size());
    parallel_for(keys_.size(), [&](std::size_t node) {
        const double t0 = tau(node_point(static_cast<int>(node)));
        for (std::size_t e = offsets_[node]; e < offsets_[node + 1]; ++e) w[e] = std::abs(tau(edge_end(e)) - t0);
    });
    return w;
}

Trajectory NullLattice::edge_trajectory(std::size_t e) const {
    const MetricField& m = *metric_;
    const int d = m.dim(), n = d - 1;
    const int src = edge_source(e);
    const int orient = edge_orientation(e);
    const int dir = (codes_[e] >> 1) & 0x7f;
    const int mult = codes_[e] >> 8;
    Vec x = node_point(src);
    Vec v = edge_velocity(m.g_raw(x), dirs_[dir], orient);
    (void)n;
    EdgeFlight f = fly(m, x, v, orient, h_, mult, opt_);
    const double lam = f.lambdas[mult - 1];
    std::vector<double> params{0.0, lam};
    std::vector<Vec> pts{x, flight_point(f, lam)}, vels{v, flight_velocity(f, lam)};
    if (!f.flat) {
        params.clear();
        pts.clear();
        vels.clear();
        for (std::size_t i = 0; i < f.sol.s.size() && f.sol.s[i] < lam; ++i) {
            params.push_back(f.sol.s[i]);
            pts.push_back(f.sol.y[i].segment(0, d));
            vels.push_back(f.sol.y[i].segment(d, d));
        }
        params.push_back(lam);
        pts.push_back(flight_point(f, lam));
        vels.push_back(flight_velocity(f, lam));
    }
    return trajectory_from_nodes(params, pts, vels, CurveKind::null);
}

NullLattice build_lattice_masked(const MetricField& metric, const Box& region, double h, int directions,
                                 const LatticeOptions& opt, const std::vector<Vec>* polyline, double tube_radius) {
    const int d = metric.dim(), n = d - 1;
    if (!(h > 0)) throw PreconditionError("build_null_lattice: h must be positive");
    if (region.dim() != d) throw PreconditionError("build_null_lattice: region dimension mismatch");
    const Box& dom = metric.domain();
    for (int i = 0; i < d; ++i)
        if (region.lo[i] < dom.lo[i] || region.hi[i] > dom.hi[i])
            throw DomainError("build_null_lattice: region not inside the metric domain");
    if (opt.max_multiple < 1 || opt.max_multiple > 255) throw PreconditionError("build_null_lattice: bad max_multiple");

    NullLattice L;
    L.metric_ = &metric;
    L.region_ = region;
    L.h_ = h;
    L.directions_ = directions;
    L.opt_ = opt;
    L.dirs_ = lattice_directions(n, directions);
    for (int i = 0; i < d; ++i) L.counts_.push_back(static_cast<int>(std::floor((region.hi[i] - region.lo[i]) / h + 1e-9)) + 1);
    double total = 1;
    for (int c : L.counts_) total *= c;
    if (total > 2e8) throw ResolutionError("build_null_lattice: too many nodes");

    if (!polyline) {
        L.keys_.resize(static_cast<std::size_t>(total));
        for (std::size_t k = 0; k < L.keys_.size(); ++k) L.keys_[k] = static_cast<std::int64_t>(k);
    } else {
        std::vector<std::int64_t> keys;
        const auto& P = *polyline;
        auto seg_dist = [](const Vec& x, const Vec& a, const Vec& b) {
            Vec ab = b - a;
            double l2 = ab.squaredNorm();
            double s = l2 > 0 ? std::clamp((x - a).dot(ab) / l2, 0.0, 1.0) : 0.0;
            return (x - a - s * ab).norm();
        };
        for (std::size_t s = 0; s + 1 < std::max<std::size_t>(P.size(), 2); ++s) {
            const Vec& a = P[s];
            const Vec& b = P.size() > 1 ? P[s + 1] : P[s];
            std::vector<int> lo(d), hi(d);
            for (int i = 0; i < d; ++i) {
                lo[i] = std::max(0, static_cast<int>(std::floor((std::min(a[i], b[i]) - tube_radius - region.lo[i]) / h)));
                hi[i] = std::min(L.counts_[i] - 1,
                                 static_cast<int>(std::ceil((std::max(a[i], b[i]) + tube_radius - region.lo[i]) / h)));
                if (hi[i] < lo[i]) goto next_segment;
            }
            {
                std::vector<int> idx = lo;
                while (true) {
                    Vec x = region.lo;
                    for (int i = 0; i < d; ++i) x[i] += idx[i] * h;
                    if (seg_dist(x, a, b) <= tube_radius) keys.push_back(L.key(idx));
                    int i = d - 1;
                    while (i >= 0 && ++idx[i] > hi[i]) {
                        idx[i] = lo[i];
                        --i;
                    }
                    if (i < 0) break;
                }
            }
        next_segment:;
        }
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        L.keys_ = std::move(keys);
    }
    L.index_.reserve(L.keys_.size() * 2);
    for (std::size_t i = 0; i < L.keys_.size(); ++i) L.index_.emplace(L.keys_[i], static_cast<int>(i));

    const int kmax = opt.max_multiple;
    std::vector<NodeEdges> per_node(L.keys_.size());
    parallel_for(L.keys_.size(), [&](std::size_t node) {
        NodeEdges out;
        Vec x = L.node_point(static_cast<int>(node));
        Mat g = metric.g_raw(x);
        for (std::size_t di = 0; di < L.dirs_.size(); ++di) {
            for (int orient : {1, -1}) {
                Vec v = edge_velocity(g, L.dirs_[di], orient);
                EdgeFlight f = fly(metric, x, v, orient, h, kmax, opt);
                EdgeCandidate best;
                best.snap = std::numeric_limits<double>::infinity();
                // a failure is geometric: no multiple reaches within h/4 of any grid point, in or out of the region
                bool resolvable = false;
                for (int k = 1; k <= kmax; ++k) {
                    const double lam = f.lambdas[k - 1];
                    if (std::isnan(lam)) break;
                    Vec end = flight_point(f, lam);
                    std::vector<int> idx(d);
                    bool inside = true;
                    for (int i = 0; i < d; ++i) {
                        idx[i] = static_cast<int>(std::lround((end[i] - region.lo[i]) / h));
                        if (idx[i] < 0 || idx[i] >= L.counts_[i]) inside = false;
                    }
                    Vec node_pt = region.lo;
                    for (int i = 0; i < d; ++i) node_pt[i] += idx[i] * h;
                    double snap = (end - node_pt).norm();
                    if (snap < h / 4) resolvable = true;
                    if (!inside) continue;
                    int target = L.find(idx);
                    if (target < 0 || snap >= h / 4) continue;
                    if (snap < best.snap) {
                        best.target = target;
                        best.code = static_cast<std::uint16_t>((k << 8) | (di << 1) | (orient < 0 ? 1 : 0));
                        best.offset = end - node_pt;
                        best.snap = snap;
                        Vec ve = flight_velocity(f, lam);
                        best.null_res = std::abs(inner(metric.g_raw(end), ve, ve));
                    }
                    if (snap < h / 8) break;
                }
                if (!resolvable) ++out.dropped;
                if (best.target < 0) continue;
                out.kept.push_back(best);
            }
        }
        per_node[node] = std::move(out);
    });

    std::size_t kept = 0;
    for (const auto& ne : per_node) {
        kept += ne.kept.size();
        L.dropped_ += ne.dropped;
    }
    L.offsets_.assign(L.keys_.size() + 1, 0);
    L.targets_.reserve(kept);
    L.codes_.reserve(kept);
    L.snap_offset_.reserve(kept * d);
    for (std::size_t node = 0; node < per_node.size(); ++node) {
        for (const auto& c : per_node[node].kept) {
            L.targets_.push_back(c.target);
            L.codes_.push_back(c.code);
            for (int i = 0; i < d; ++i) L.snap_offset_.push_back(static_cast<float>(c.offset[i]));
            L.max_snap_ = std::max(L.max_snap_, c.snap);
            L.max_null_ = std::max(L.max_null_, c.null_res);
        }
        L.offsets_[node + 1] = L.targets_.size();
        per_node[node] = NodeEdges{};
    }
    const double all = static_cast<double>(kept + L.dropped_);
    if (all > 0 && L.dropped_ > 0.05 * all)
        throw ResolutionError("build_null_lattice: snap error above h/4 on " + std::to_string(L.dropped_) + " of " +
                              std::to_string(static_cast<std::size_t>(all)) + " edges (limit 5%)");
    return L;
}

NullLattice build_null_lattice(const MetricField& metric, const Box& region, double h, int directions,
                               const LatticeOptions& opt) {
    return build_lattice_masked(metric, region, h, directions, opt, nullptr, 0.0);
}

NullLattice build_null_lattice_tube(const MetricField& metric, const Box& region, double h, int directions,
                                    const std::vector<Vec>& polyline, double tube_radius, const LatticeOptions& opt) {
    if (polyline.empty()) throw PreconditionError("build_null_lattice_tube: empty polyline");
    return build_lattice_masked(metric, region, h, directions, opt, &polyline, tube_radius);
}

// ---------------------------------------------------------------------------------------------
// distance

PiecewiseCausalPath flat_zigzag(const MetricField& metric, const TimeFunction& tau, const Vec& p, const Vec& q) {
    const int d = metric.dim();
    PiecewiseCausalPath path;
    path.breakpoints.push_back(p);
    Vec dq = q - p;
    if (dq.norm() > 0) {
        Mat E = coordinate_frame(metric.g_raw(p));
        Vec y = E.fullPivLu().solve(dq);
        const double ys = y.tail(d - 1).norm();
        if (std::abs(y[0]) >= ys) {
            path.orientation.push_back(y[0] >= 0 ? 1 : -1);
        } else {
            const double s = 0.5 * (ys + y[0]);
            Vec ym(d);
            ym << s, s * y.tail(d - 1) / ys;
            path.breakpoints.push_back(p + E * ym);
            path.orientation.push_back(1);
            path.orientation.push_back(-1);
        }
        path.breakpoints.push_back(q);
    }
    for (const Vec& x : path.breakpoints) path.tau_values.push_back(tau(x));
    path.snap_gaps.assign(path.orientation.size(), 0.0);
    return path;
}

namespace {

struct LevelResult {
    double value = std::numeric_limits<double>::infinity();
    PiecewiseCausalPath path;
};

void append(PiecewiseCausalPath& dst, const PiecewiseCausalPath& src) {
    // src starts at dst's last breakpoint
    for (std::size_t i = 1; i < src.breakpoints.size(); ++i) {
        dst.breakpoints.push_back(src.breakpoints[i]);
        dst.tau_values.push_back(src.tau_values[i]);
    }
    for (std::size_t i = 0; i < src.orientation.size(); ++i) {
        dst.orientation.push_back(src.orientation[i]);
        dst.snap_gaps.push_back(src.snap_gaps[i]);
        if (i < src.segments.size()) dst.segments.push_back(src.segments[i]);
    }
}

std::vector<Trajectory> chord_segments(const PiecewiseCausalPath& path) {
    std::vector<Trajectory> out;
    for (std::size_t i = 0; i < path.orientation.size(); ++i) {
        const Vec& a = path.breakpoints[i];
        const Vec& b = path.breakpoints[i + 1];
        out.push_back(trajectory_from_nodes({0.0, 1.0}, {a, b}, {b - a, b - a}, CurveKind::null));
    }
    return out;
}

LevelResult dijkstra_level(const NullLattice& L, const std::vector<double>& W, const TimeFunction& tau, const Vec& p,
                           const Vec& q) {
    const MetricField& m = L.metric();
    LevelResult res;
    auto src = L.corners(p), dst = L.corners(q);
    if (src.empty() || dst.empty()) return res;

    const std::size_t N = L.node_count();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(N, inf);
    std::vector<long> pred_edge(N, -1);
    std::vector<char> done(N, 0);
    std::vector<double> exit_cost(N, inf);
    std::vector<PiecewiseCausalPath> exit_paths(dst.size()), entry_paths(src.size());
    for (std::size_t i = 0; i < dst.size(); ++i) {
        exit_paths[i] = flat_zigzag(m, tau, L.node_point(dst[i]), q);
        exit_cost[dst[i]] = null_length(exit_paths[i], tau);
    }
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (std::size_t i = 0; i < src.size(); ++i) {
        entry_paths[i] = flat_zigzag(m, tau, p, L.node_point(src[i]));
        double c = null_length(entry_paths[i], tau);
        if (c < dist[src[i]]) {
            dist[src[i]] = c;
            pq.push({c, src[i]});
        }
    }
    double best = inf;
    int best_node = -1;
    while (!pq.empty()) {
        auto [du, u] = pq.top();
        pq.pop();
        if (done[u]) continue;
        if (du >= best) break;
        done[u] = 1;
        if (exit_cost[u] < inf && du + exit_cost[u] < best) {
            best = du + exit_cost[u];
            best_node = u;
        }
        auto [e0, e1] = L.edges_of(u);
        for (std::size_t e = e0; e < e1; ++e) {
            int v = L.edge_target(e);
            double nd = du + W[e];
            if (nd < dist[v]) {
                dist[v] = nd;
                pred_edge[v] = static_cast<long>(e);
                pq.push({nd, v});
            }
        }
    }
    if (best_node < 0) return res;

    std::vector<std::size_t> edges;
    int u = best_node;
    while (pred_edge[u] >= 0) {
        edges.push_back(static_cast<std::size_t>(pred_edge[u]));
        u = L.edge_source(edges.back());
    }
    std::reverse(edges.begin(), edges.end());
    const std::size_t si = std::find(src.begin(), src.end(), u) - src.begin();
    const std::size_t ti = std::find(dst.begin(), dst.end(), best_node) - dst.begin();

    PiecewiseCausalPath path = entry_paths[si];
    path.segments = chord_segments(path);
    for (std::size_t e : edges) {
        Vec end = L.edge_end(e);
        Vec node = L.node_point(L.edge_target(e));
        path.breakpoints.push_back(node);
        path.tau_values.push_back(tau(node));
        path.orientation.push_back(L.edge_orientation(e));
        path.snap_gaps.push_back((end - node).norm());
        path.segments.push_back(L.edge_trajectory(e));
    }
    PiecewiseCausalPath tail = exit_paths[ti];
    tail.segments = chord_segments(tail);
    append(path, tail);
    res.value = best;
    res.path = std::move(path);
    return res;
}

}  // namespace

NullDistanceEstimate estimate_null_distance(const NullLattice& lattice, const TimeFunction& tau, const Vec& p,
                                            const Vec& q, int refinements, const std::vector<double>* weights) {
    const MetricField& m = lattice.metric();
    const Box& region = lattice.region();
    const double h = lattice.spacing();
    if (!region.contains(p) || !region.contains(q)) throw DomainError("estimate_null_distance: point outside lattice region");
    if (refinements < 0) throw PreconditionError("estimate_null_distance: negative refinements");

    NullDistanceEstimate est;
    est.lower = std::abs(tau(q) - tau(p));
    est.resolution = h;
    if ((p - q).norm() == 0.0) {
        est.witness = flat_zigzag(m, tau, p, q);
        est.refinement_history.push_back({h, 0.0});
        est.level_values.push_back(0.0);
        return est;
    }

    LevelResult best;
    // Points closer than the lattice resolution are joined directly.
    if ((q - p).cwiseAbs().maxCoeff() <= 2 * h) {
        best.path = flat_zigzag(m, tau, p, q);
        best.path.segments = chord_segments(best.path);
        best.value = null_length(best.path, tau);
    }

    std::vector<double> own;
    if (!weights) {
        own = lattice.weights(tau);
        weights = &own;
    }
    LevelResult level = dijkstra_level(lattice, *weights, tau, p, q);
    est.level_values.push_back(level.value);
    std::vector<Vec> polyline = level.path.breakpoints;
    if (level.value < best.value) best = level;
    est.refinement_history.push_back({h, best.value});

    double hk = h;
    for (int k = 0; k < refinements; ++k) {
        if (polyline.empty()) break;
        const double tube = 2.0 * hk;
        hk *= 0.5;
        NullLattice fine = build_null_lattice_tube(m, region, hk, lattice.directions(), polyline, tube, lattice.options());
        std::vector<double> w = fine.weights(tau);
        LevelResult r = dijkstra_level(fine, w, tau, p, q);
        est.level_values.push_back(r.value);
        if (!r.path.breakpoints.empty()) polyline = r.path.breakpoints;
        if (r.value < best.value) best = std::move(r);
        est.refinement_history.push_back({hk, best.value});
        est.resolution = hk;
    }
    if (!std::isfinite(best.value)) throw ConnectivityError("estimate_null_distance: q unreachable at every level");
    est.upper = std::max(best.value, est.lower);
    est.witness = std::move(best.path);
    return est;
}

EstimateReport anti_lipschitz_constant(const MetricField& metric, const GRCache& gR, const TimeFunction& tau,
                                       const Box& region, int samples, std::uint64_t seed) {
    EstimateReport rep;
    rep.experiment = "anti_lipschitz";
    const int d = metric.dim();
    Rng rng(seed);
    double reach = 1e300;
    for (int i = 0; i < d; ++i) reach = std::min(reach, region.hi[i] - region.lo[i]);
    reach *= 0.5;
    std::vector<std::pair<Vec, Vec>> pairs;
    while (static_cast<int>(pairs.size()) < samples) {
        Vec a = rng.in_box(region);
        Vec b = a + rng.in_ball(d, reach);
        if (!region.contains(b)) continue;
        pairs.emplace_back(a, b);
    }

    struct Row {
        CausalRelation rel = CausalRelation::boundary_band;
        double dtau = 0, upper = 0, lower = 0;
        bool excluded = false;
    };
    std::vector<Row> rows(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) {
        const auto& [a, b] = pairs[i];
        Row r;
        if ((a - b).norm() < 1e-6) {
            r.excluded = true;
            rows[i] = r;
            return;
        }
        r.rel = causal_oracle(metric, a, b).relation;
        r.dtau = std::abs(tau(b) - tau(a));
        DistanceBound db = riemannian_distance(gR, a, b);
        r.upper = db.upper;
        r.lower = db.lower;
        rows[i] = r;
    });

    auto envelope = [&](std::size_t count, double& C, double& K, int& causal, int& degenerate) {
        C = 0;
        K = 0;
        causal = degenerate = 0;
        for (std::size_t i = 0; i < count; ++i) {
            const Row& r = rows[i];
            if (r.excluded || (r.rel != CausalRelation::future && r.rel != CausalRelation::past)) continue;
            ++causal;
            if (r.dtau < 1e-10 * r.upper) {
                ++degenerate;
                C = std::numeric_limits<double>::infinity();
            } else {
                C = std::max(C, r.upper / r.dtau);
            }
            if (r.lower > 0) K = std::max(K, r.dtau / r.lower);
        }
    };
    double C_half, K_half, C, K;
    int causal_half, deg_half, causal, degenerate;
    envelope(rows.size() / 2, C_half, K_half, causal_half, deg_half);
    envelope(rows.size(), C, K, causal, degenerate);

    int spacelike = 0, band = 0, excluded = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        if (r.excluded) {
            ++excluded;
            continue;
        }
        if (r.rel == CausalRelation::spacelike) ++spacelike;
        if (r.rel == CausalRelation::boundary_band) ++band;
        rep.table.push_back({{"index", i},
                             {"relation", to_string(r.rel)},
                             {"dtau", r.dtau},
                             {"dgR_lower", r.lower},
                             {"dgR_upper", r.upper}});
    }
    rep.metrics["pairs"] = rows.size();
    rep.metrics["causal_pairs"] = causal;
    rep.metrics["spacelike_pairs"] = spacelike;
    rep.metrics["boundary_band_pairs"] = band;
    rep.metrics["excluded_pairs"] = excluded;
    rep.metrics["C_hat"] = number(C);
    rep.metrics["C_hat_half_samples"] = number(C_half);
    rep.metrics["K_prime_hat"] = number(K);
    rep.metrics["degenerate_pairs"] = degenerate;
    const bool finite = std::isfinite(C) && causal > 0;
    rep.verdict = finite ? "pass" : (causal > 0 ? "fail" : "inconclusive");
    if (degenerate > 0) rep.anomalies.push_back("causal pairs with tau increment below 1e-10 * distance");
    if (std::isfinite(C) && std::isfinite(C_half) && C > 2.0 * C_half)
        rep.anomalies.push_back("C_hat more than doubles under sample doubling");
    return rep;
}

}  // namespace temple
