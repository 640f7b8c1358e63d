#include "temple/frame.hpp"

#include "temple/errors.hpp"
#include "temple/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace temple {

namespace {

// Geodesic from x0 with velocity v0 over [0,1], parallel-transporting vecs in place.
bool transport_leg(const MetricField& m, const Vec& x0, const Vec& v0, std::vector<Vec>& vecs, Vec& x1, double tol,
                   std::vector<double>* grid, bool replay) {
    const int d = m.dim();
    if (v0.squaredNorm() == 0.0) {
        x1 = x0;
        if (grid && !replay) grid->clear();
        return true;
    }
    IntegratorOptions opt;
    opt.rtol = opt.atol = tol;
    opt.dense = false;
    if (replay && grid && grid->size() >= 2) opt.replay = grid;
    Solution sol = integrate(geodesic_flow(m, static_cast<int>(vecs.size()), false), 0.0, 1.0, pack_state(x0, v0, vecs), opt);
    if (sol.truncated) return false;
    if (grid && !opt.replay) *grid = sol.grid_fractions();
    const State& y = sol.final_state();
    x1 = y.segment(0, d);
    for (std::size_t k = 0; k < vecs.size(); ++k) vecs[k] = y.segment((2 + static_cast<int>(k)) * d, d);
    return true;
}

double cond_number(const Mat& J) {
    Eigen::JacobiSVD<Mat> svd(J);
    const auto& s = svd.singularValues();
    double smin = s[s.size() - 1];
    return smin <= 0 ? std::numeric_limits<double>::infinity() : s[0] / smin;
}

}  // namespace

FrameField::FrameField(MetricPtr metric, Vec center, double radius, double tol)
    : metric_(std::move(metric)), p_(std::move(center)), radius_(radius), tol_(tol) {
    Ep_ = coordinate_frame(metric_->g_eval(p_));
}

bool FrameField::in_w(const Vec& tx, double slack) const {
    const int n = dim() - 1;
    return std::abs(tx[0]) < radius_ + slack && tx.tail(n).norm() < radius_ + slack;
}

bool FrameField::fermi_point(const Vec& tx, Vec& out, std::vector<double>* grid, bool replay) const {
    const MetricField& m = *metric_;
    const int d = dim(), n = d - 1;
    if (m.is_flat_chart()) {
        out = p_ + Ep_ * tx;
        return m.contains(out);
    }
    Vec x = tx.tail(n);
    std::vector<double> g1, g2;
    if (replay && grid && !grid->empty()) {
        std::size_t n1 = static_cast<std::size_t>((*grid)[0]);
        g1.assign(grid->begin() + 1, grid->begin() + 1 + n1);
        g2.assign(grid->begin() + 1 + n1, grid->end());
    }
    std::vector<Vec> vecs{Ep_.col(0)};
    Vec sigma;
    if (!transport_leg(m, p_, Ep_.rightCols(n) * x, vecs, sigma, tol_, grid ? &g1 : nullptr, replay)) return false;
    std::vector<Vec> none;
    if (!transport_leg(m, sigma, tx[0] * vecs[0], none, out, tol_, grid ? &g2 : nullptr, replay)) return false;
    if (grid && !replay) {
        grid->clear();
        grid->push_back(static_cast<double>(g1.size()));
        grid->insert(grid->end(), g1.begin(), g1.end());
        grid->insert(grid->end(), g2.begin(), g2.end());
    }
    return true;
}

Vec FrameField::fermi_map(const Vec& tx) const {
    if (tx.size() != dim()) throw DomainError("fermi_map: wrong argument size");
    if (!in_w(tx, 1e-12 * radius_)) throw DomainError("fermi_map: (t, x) outside W_R");
    Vec out;
    if (!fermi_point(tx, out, nullptr, false)) throw BoundaryError("fermi_map: geodesic left the domain", 0.0);
    return out;
}

Vec FrameField::sigma_surface(const Vec& x) const {
    Vec tx(dim());
    tx[0] = 0.0;
    tx.tail(dim() - 1) = x;
    return fermi_map(tx);
}

std::pair<Vec, Mat> FrameField::fermi_point_frame(const Vec& tx) const {
    const MetricField& m = *metric_;
    const int d = dim(), n = d - 1;
    if (m.is_flat_chart()) return {p_ + Ep_ * tx, Ep_};
    std::vector<Vec> vecs;
    for (int a = 0; a < d; ++a) vecs.push_back(Ep_.col(a));
    Vec sigma, out;
    if (!transport_leg(m, p_, Ep_.rightCols(n) * tx.tail(n), vecs, sigma, tol_, nullptr, false))
        throw BoundaryError("fermi frame: radial geodesic left the domain", 0.0);
    Vec e0 = vecs[0];
    if (!transport_leg(m, sigma, tx[0] * e0, vecs, out, tol_, nullptr, false))
        throw BoundaryError("fermi frame: e0 geodesic left the domain", 0.0);
    Mat E(d, d);
    for (int a = 0; a < d; ++a) E.col(a) = vecs[a];
    // Remove integration drift so g(e_a, e_b) = eta_ab holds to rounding.
    return {out, gram_schmidt(m.g_raw(out), E)};
}

Vec FrameField::fermi_inverse(const Vec& z, const std::optional<Vec>& guess) const {
    const MetricField& m = *metric_;
    if (!m.contains(z)) throw DomainError("fermi_inverse: point outside metric domain");
    Vec y0 = guess ? *guess : Vec(Ep_.fullPivLu().solve(z - p_));
    if (m.is_flat_chart()) {
        if (!in_w(y0, 1e-9 * radius_)) throw DomainError("fermi_inverse: point outside frame domain");
        return y0;
    }
    ShootFn f = [&](const Vec& tx, Vec& r, std::vector<double>* grid, bool replay) {
        Vec out;
        if (!fermi_point(tx, out, grid, replay)) return false;
        r = out - z;
        return true;
    };
    NewtonOptions no;
    no.fd_step = 1e-6 * radius_;
    no.accept = 1e-10;
    no.tol = 1e-13;
    NewtonResult res = newton_solve(f, y0, no);
    if (!res.converged) throw NoConvergence("fermi_inverse: Newton did not converge", res.residual);
    if (!in_w(res.x, 1e-9 * radius_)) throw DomainError("fermi_inverse: point outside frame domain");
    return res.x;
}

Mat FrameField::frame_eval(const Vec& z) const {
    if (metric_->is_flat_chart()) {
        fermi_inverse(z);
        return Ep_;
    }
    return fermi_point_frame(fermi_inverse(z)).second;
}

bool FrameField::jacobian_ok(const Vec& tx, int reference_sign, double max_cond, int* sign_out) const {
    const int d = dim();
    std::vector<double> grid;
    Vec f0;
    if (!fermi_point(tx, f0, &grid, false)) return false;
    Mat J(d, d);
    const double h = 1e-6 * radius_;
    for (int k = 0; k < d; ++k) {
        Vec tp = tx, out;
        tp[k] += h;
        if (!fermi_point(tp, out, &grid, true)) {
            tp[k] -= 2 * h;
            if (!fermi_point(tp, out, &grid, true)) return false;
            J.col(k) = (f0 - out) / h;
        } else {
            J.col(k) = (out - f0) / h;
        }
    }
    double det = J.determinant();
    int sign = det > 0 ? 1 : (det < 0 ? -1 : 0);
    if (sign_out) *sign_out = sign;
    if (sign == 0 || (reference_sign != 0 && sign != reference_sign)) return false;
    return cond_number(J) < max_cond;
}

std::string FrameField::dump_csv(int per_axis) const {
    const int d = dim(), n = d - 1;
    std::ostringstream os;
    os.precision(12);
    os << "t";
    for (int i = 1; i <= n; ++i) os << ",x" << i;
    for (int i = 0; i < d; ++i) os << ",F" << i;
    for (int a = 0; a < d; ++a)
        for (int i = 0; i < d; ++i) os << ",e" << a << "_" << i;
    os << "\n";
    long total = 1;
    for (int i = 0; i < d; ++i) total *= per_axis;
    for (long k = 0; k < total; ++k) {
        Vec tx(d);
        long r = k;
        for (int i = 0; i < d; ++i) {
            int j = static_cast<int>(r % per_axis);
            r /= per_axis;
            tx[i] = per_axis == 1 ? 0.0 : radius_ * 0.95 * (-1.0 + 2.0 * j / (per_axis - 1));
        }
        if (!in_w(tx)) continue;
        auto [pt, E] = fermi_point_frame(tx);
        for (int i = 0; i < d; ++i) os << (i ? "," : "") << tx[i];
        for (int i = 0; i < d; ++i) os << "," << pt[i];
        for (int a = 0; a < d; ++a)
            for (int i = 0; i < d; ++i) os << "," << E(i, a);
        os << "\n";
    }
    return os.str();
}

namespace {
std::vector<Vec> w_samples(int d, double R, int count) {
    const int n = d - 1;
    std::vector<Vec> out;
    // t extremes and spatial axis extremes
    for (double t : {-R, R}) {
        Vec tx = Vec::Zero(d);
        tx[0] = t;
        out.push_back(tx);
    }
    for (int i = 1; i <= n; ++i)
        for (double s : {-R, R}) {
            Vec tx = Vec::Zero(d);
            tx[i] = s;
            out.push_back(tx);
        }
    Halton h(d);
    while (static_cast<int>(out.size()) < count) {
        Vec u = 2.0 * h.next() - Vec::Ones(d);
        if (u.tail(n).squaredNorm() > 1.0) continue;
        out.push_back(R * u);
    }
    return out;
}
}  // namespace

FrameField build_frame(MetricPtr metric, const Vec& p, double requested_radius, double tol) {
    if (!(requested_radius > 0)) throw PreconditionError("build_frame: requested radius must be positive");
    if (!metric->contains(p)) throw DomainError("build_frame: center outside metric domain");
    const int d = metric->dim();
    const double floor_radius = 1e-6 * metric->domain().diameter();
    double R = requested_radius;
    int ref_sign = 0;
    {
        FrameField probe(metric, p, R, tol);
        double det = probe.frame_at_center().determinant();
        ref_sign = det > 0 ? 1 : -1;
    }
    while (R >= floor_radius) {
        FrameField f(metric, p, R, tol);
        bool ok = true;
        // Slightly inside the closed box so the W_R boundary samples are admissible.
        for (const Vec& tx : w_samples(d, R * (1 - 1e-9), 24)) {
            Vec out;
            if (!f.fermi_point(tx, out, nullptr, false) || !f.jacobian_ok(tx, ref_sign, 1e6)) {
                ok = false;
                break;
            }
        }
        if (ok) return f;
        R /= 1.25;
    }
    throw RadiusError("build_frame: center too close to the domain boundary for any positive radius");
}

Mat RiemannianizedMetric::gR_eval(const Vec& z) const {
    Mat E = frame_->frame_eval(z);
    return riemannianize(base().g_raw(z), Vec(E.col(0)));
}

RiemannianizedMetric riemannianize(const FrameField& frame) { return RiemannianizedMetric(frame); }

GRCache::GRCache(const RiemannianizedMetric& gR, const Box& region, int nodes_per_axis)
    : region_(region), n_(std::max(2, nodes_per_axis)), d_(region.dim()) {
    long total = 1;
    for (int i = 0; i < d_; ++i) total *= n_;
    values_.resize(total);
    min_eig_ = std::numeric_limits<double>::infinity();
    max_eig_ = 0.0;
    for (long k = 0; k < total; ++k) {
        Vec z(d_);
        long r = k;
        for (int i = 0; i < d_; ++i) {
            int j = static_cast<int>(r % n_);
            r /= n_;
            z[i] = region_.lo[i] + (region_.hi[i] - region_.lo[i]) * j / (n_ - 1);
        }
        values_[k] = gR.gR_eval(z);
        Eigen::SelfAdjointEigenSolver<Mat> es(values_[k]);
        min_eig_ = std::min(min_eig_, es.eigenvalues()[0]);
        max_eig_ = std::max(max_eig_, es.eigenvalues()[d_ - 1]);
    }
}

Mat GRCache::eval(const Vec& z) const {
    int base[kMaxDim];
    double w[kMaxDim];
    for (int i = 0; i < d_; ++i) {
        double u = (z[i] - region_.lo[i]) / (region_.hi[i] - region_.lo[i]) * (n_ - 1);
        u = std::clamp(u, 0.0, static_cast<double>(n_ - 1));
        int b = std::min(static_cast<int>(std::floor(u)), n_ - 2);
        base[i] = b;
        w[i] = u - b;
    }
    Mat out = Mat::Zero(d_, d_);
    for (int corner = 0; corner < (1 << d_); ++corner) {
        double weight = 1.0;
        long idx = 0, stride = 1;
        for (int i = 0; i < d_; ++i) {
            int bit = (corner >> i) & 1;
            weight *= bit ? w[i] : 1.0 - w[i];
            idx += (base[i] + bit) * stride;
            stride *= n_;
        }
        if (weight != 0.0) out += weight * values_[idx];
    }
    return out;
}

namespace {

double seg_len(const GRCache& G, const Vec& u, const Vec& v) {
    Vec dv = v - u;
    return std::sqrt(std::max(0.0, dv.dot(G.eval(0.5 * (u + v)) * dv)));
}

double chord_length(const GRCache& G, const Vec& a, const Vec& b, int nodes) {
    // Gauss-Legendre on [0,1]
    Eigen::VectorXd x(nodes), w(nodes);
    for (int i = 0; i < nodes; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (nodes + 0.5)), pp = 0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < nodes; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = nodes * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        x[i] = 0.5 * (1 - z);
        w[i] = 1.0 / ((1 - z * z) * pp * pp);
    }
    Vec dv = b - a;
    double L = 0.0;
    for (int i = 0; i < nodes; ++i) {
        Vec c = a + x[i] * dv;
        L += w[i] * std::sqrt(std::max(0.0, dv.dot(G.eval(c) * dv)));
    }
    return L;
}

double path_length(const GRCache& G, const std::vector<Vec>& path) {
    double L = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) L += seg_len(G, path[i - 1], path[i]);
    return L;
}

void smooth_path(const GRCache& G, std::vector<Vec>& path, int iterations) {
    if (path.size() < 3) return;
    const int d = static_cast<int>(path[0].size());
    double scale = (path.back() - path.front()).norm() / static_cast<double>(path.size());
    std::vector<double> step(path.size(), 0.25 * scale);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 1; i + 1 < path.size(); ++i) {
            auto local = [&](const Vec& x) { return seg_len(G, path[i - 1], x) + seg_len(G, x, path[i + 1]); };
            double L0 = local(path[i]);
            Vec grad(d);
            double h = 1e-4 * scale;
            for (int k = 0; k < d; ++k) {
                Vec xp = path[i], xm = path[i];
                xp[k] += h;
                xm[k] -= h;
                grad[k] = (local(xp) - local(xm)) / (2 * h);
            }
            double gn = grad.norm();
            if (gn < 1e-14) continue;
            Vec trial = path[i] - step[i] * grad / gn;
            if (local(trial) < L0) {
                path[i] = trial;
                step[i] *= 1.5;
            } else {
                step[i] *= 0.5;
            }
        }
    }
}

std::vector<Vec> lattice_path(const GRCache& G, const Vec& a, const Vec& b, int per_axis) {
    const int d = static_cast<int>(a.size());
    Box box{a.cwiseMin(b), a.cwiseMax(b)};
    double pad = 0.25 * (b - a).norm();
    for (int i = 0; i < d; ++i) {
        box.lo[i] = std::max(box.lo[i] - pad, G.region().lo[i]);
        box.hi[i] = std::min(box.hi[i] + pad, G.region().hi[i]);
        if (box.hi[i] - box.lo[i] < 1e-12) box.hi[i] = box.lo[i] + 1e-12;
    }
    const int m = std::max(2, per_axis);
    long total = 1;
    std::vector<long> stride(d);
    for (int i = 0; i < d; ++i) {
        stride[i] = total;
        total *= m;
    }
    auto coord = [&](long k) {
        Vec z(d);
        for (int i = 0; i < d; ++i) {
            int j = static_cast<int>((k / stride[i]) % m);
            z[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * j / (m - 1);
        }
        return z;
    };
    auto nearest = [&](const Vec& z) {
        long k = 0;
        for (int i = 0; i < d; ++i) {
            int j = static_cast<int>(std::lround((z[i] - box.lo[i]) / (box.hi[i] - box.lo[i]) * (m - 1)));
            k += std::clamp(j, 0, m - 1) * stride[i];
        }
        return k;
    };
    // neighbour offsets: axis steps plus diagonals in every coordinate 2-plane
    std::vector<std::vector<int>> offs;
    for (int i = 0; i < d; ++i)
        for (int s : {-1, 1}) {
            std::vector<int> o(d, 0);
            o[i] = s;
            offs.push_back(o);
        }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j)
            for (int si : {-1, 1})
                for (int sj : {-1, 1}) {
                    std::vector<int> o(d, 0);
                    o[i] = si;
                    o[j] = sj;
                    offs.push_back(o);
                }
    std::vector<double> dist(total, std::numeric_limits<double>::infinity());
    std::vector<long> prev(total, -1);
    long src = nearest(a), dst = nearest(b);
    using Item = std::pair<double, long>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    dist[src] = 0;
    pq.push({0, src});
    while (!pq.empty()) {
        auto [dk, k] = pq.top();
        pq.pop();
        if (dk > dist[k]) continue;
        if (k == dst) break;
        Vec zk = coord(k);
        for (const auto& o : offs) {
            long nk = k;
            bool ok = true;
            for (int i = 0; i < d; ++i) {
                int j = static_cast<int>((k / stride[i]) % m) + o[i];
                if (j < 0 || j >= m) {
                    ok = false;
                    break;
                }
                nk += o[i] * stride[i];
            }
            if (!ok) continue;
            double nd = dk + seg_len(G, zk, coord(nk));
            if (nd < dist[nk]) {
                dist[nk] = nd;
                prev[nk] = k;
                pq.push({nd, nk});
            }
        }
    }
    if (!std::isfinite(dist[dst])) throw ResolutionError("riemannian_distance: lattice disconnected");
    std::vector<Vec> rev;
    for (long k = dst; k != -1; k = prev[k]) rev.push_back(coord(k));
    std::vector<Vec> path{a};
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) path.push_back(*it);
    path.push_back(b);
    // drop snapped endpoints that coincide with a, b
    std::vector<Vec> clean;
    for (const auto& z : path)
        if (clean.empty() || (z - clean.back()).norm() > 1e-14) clean.push_back(z);
    return clean;
}

}  // namespace

DistanceBound riemannian_distance(const GRCache& G, const Vec& a, const Vec& b, const DistanceBudget& budget) {
    DistanceBound out;
    if (!G.region().contains(a) || !G.region().contains(b))
        throw DomainError("riemannian_distance: endpoints outside region");
    if ((a - b).norm() == 0.0) {
        out.path = {a};
        return out;
    }
    out.lower = std::sqrt(std::max(0.0, G.min_eigenvalue())) * (b - a).norm();
    out.upper = chord_length(G, a, b, std::max(2, budget.quadrature_nodes));
    out.path = {a, b};
    if (budget.lattice_nodes_per_axis > 0) {
        std::vector<Vec> path = lattice_path(G, a, b, budget.lattice_nodes_per_axis);
        smooth_path(G, path, budget.smoothing_iterations);
        double L = path_length(G, path);
        if (L < out.upper) {
            out.upper = L;
            out.path = path;
        }
    }
    out.upper = std::max(out.upper, out.lower);
    return out;
}

DistanceBound riemannian_distance(const RiemannianizedMetric& gR, const Vec& a, const Vec& b, const Box& region,
                                  const DistanceBudget& budget) {
    GRCache cache(gR, region, 4);
    return riemannian_distance(cache, a, b, budget);
}

double normal_radius_with(const MetricField& metric, const Mat& Eq, const Vec& q, double start, double tol,
                          const NormalRadiusOptions& opt) {
    const int d = metric.dim();
    double det0 = Eq.determinant();
    int ref = det0 > 0 ? 1 : -1;
    double cap = 4.0 * metric.domain().diameter();
    double last = 0.0;
    for (double R = start; R <= cap; R *= opt.sweep_factor) {
        bool ok = true;
        const double h = 1e-6 * R;
        for (const Vec& y : ball_points(d, opt.samples, R)) {
            std::vector<double> grid;
            Vec f0;
            if (!shoot(metric, q, Eq * y, f0, tol, &grid, false)) {
                ok = false;
                break;
            }
            Mat J(d, d);
            for (int k = 0; k < d && ok; ++k) {
                Vec yp = y, out;
                yp[k] += h;
                if (shoot(metric, q, Eq * yp, out, tol, &grid, true)) {
                    J.col(k) = (out - f0) / h;
                } else {
                    yp[k] -= 2 * h;
                    if (!shoot(metric, q, Eq * yp, out, tol, &grid, true))
                        ok = false;
                    else
                        J.col(k) = (f0 - out) / h;
                }
            }
            if (!ok) break;
            double det = J.determinant();
            int sign = det > 0 ? 1 : (det < 0 ? -1 : 0);
            if (sign != ref || cond_number(J) >= opt.max_cond) {
                ok = false;
                break;
            }
        }
        if (!ok) break;
        last = R;
    }
    if (last == 0.0) throw DegenerateFrame("normal_radius: no passing radius at the smallest scale");
    return last;
}

double normal_radius(const MetricField& metric, const FrameField& frame, const Vec& q, const NormalRadiusOptions& opt) {
    Mat Eq = frame.frame_eval(q);
    return normal_radius_with(metric, Eq, q, 1e-3 * frame.radius(), frame.tol(), opt);
}

std::vector<Vec> temple_sample_set(const FrameField& frame, int count) {
    const int d = frame.dim(), n = d - 1;
    const double R = 0.75 * frame.radius();
    std::vector<Vec> out{frame.center()};
    Halton h(d, 7);
    while (static_cast<int>(out.size()) < count) {
        Vec u = 2.0 * h.next() - Vec::Ones(d);
        if (u.tail(n).squaredNorm() > 1.0) continue;
        out.push_back(frame.fermi_map(R * u));
    }
    return out;
}

std::optional<double> velocity_bound(const FrameField& frame, const Vec& z, const Vec& v, int nodes) {
    const MetricField& m = frame.metric();
    Trajectory tr;
    try {
        tr = integrate_geodesic(m, z, v, 1.0, frame.tol());
    } catch (const Error&) {
        return std::nullopt;
    }
    if (tr.truncated) return std::nullopt;
    double best = 0.0;
    for (int k = 0; k <= nodes; ++k) {
        double lam = static_cast<double>(k) / nodes;
        Vec x = tr.point(lam), u = tr.velocity(lam);
        Mat E;
        try {
            E = frame.frame_eval(x);
        } catch (const Error&) {
            return std::nullopt;
        }
        Mat g = m.g_raw(x);
        for (int a = 0; a < m.dim(); ++a) best = std::max(best, std::abs(inner(g, u, Vec(E.col(a)))));
    }
    return best;
}

UniformRadius uniform_temple_radius(const MetricField& metric, const FrameField& frame, const std::vector<Vec>& K,
                                    const UniformRadiusOptions& opt) {
    if (K.empty()) throw PreconditionError("uniform_temple_radius: empty sample set");
    const int d = metric.dim(), n = d - 1;
    UniformRadius out;
    out.rp_quarter = frame.radius() / 4.0;

    std::vector<Mat> frames;
    for (const Vec& z : K) frames.push_back(frame.frame_eval(z));

    out.rn = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < K.size(); ++i) {
        double r;
        try {
            r = normal_radius_with(metric, frames[i], K[i], 1e-3 * frame.radius(), frame.tol(), opt.normal);
        } catch (const DegenerateFrame& e) {
            throw DegenerateFrame(std::string("uniform_temple_radius: normal radius bound failed: ") + e.what());
        }
        out.normal_radii.push_back(r);
        out.rn = std::min(out.rn, r);
    }

    const auto dirs = sphere_points(n, opt.directions, 0.3);
    auto null_velocity = [&](const Mat& E, const Vec& u, double scale) {
        Vec v = E.col(0);
        for (int i = 0; i < n; ++i) v += u[i] * E.col(1 + i);
        return Vec(scale * v);
    };

    // eps0: largest swept eps for which all sampled Jacobi fields J(0)=e0, DJ(0)=0 stay timelike.
    bool all_pass = true;
    for (int k = 0; k < opt.eps_levels; ++k) {
        double eps = opt.eps_start * std::pow(2.0, k);
        double worst = -std::numeric_limits<double>::infinity();
        bool pass = true;
        int used = 0;
        for (std::size_t i = 0; i < K.size(); ++i)
            for (const Vec& u : dirs) {
                Vec v = null_velocity(frames[i], u, eps);
                Trajectory tr;
                try {
                    tr = integrate_geodesic(metric, K[i], v, 1.0, frame.tol());
                } catch (const Error&) {
                    continue;
                }
                if (tr.truncated) continue;
                JacobiSolution js = solve_jacobi(metric, tr, Vec(frames[i].col(0)), Vec::Zero(d));
                ++used;
                for (std::size_t j = 0; j < tr.nodes(); ++j) {
                    double gjj = inner(metric.g_raw(tr.points[j]), js.J[j], js.J[j]);
                    worst = std::max(worst, gjj);
                    if (!(gjj < 0)) pass = false;
                }
            }
        out.eps_table.push_back({eps, used ? worst : 0.0, pass});
        if (!pass) {
            all_pass = false;
            out.eps0 = k == 0 ? 0.0 : opt.eps_start * std::pow(2.0, k - 1);
            break;
        }
    }
    if (all_pass) out.eps0 = std::numeric_limits<double>::infinity();

    // delta0 from the velocity-bound table eps(delta).
    const std::size_t nk = std::min<std::size_t>(K.size(), static_cast<std::size_t>(opt.delta_samples));
    double last_ok = 0.0;
    bool all_delta = true;
    for (int k = 0; k < opt.delta_levels; ++k) {
        double delta = opt.delta_start * std::pow(2.0, k);
        double eps_meas = 0.0;
        for (std::size_t i = 0; i < nk; ++i) {
            std::vector<Vec> vs;
            for (const Vec& u : dirs) vs.push_back(null_velocity(frames[i], u, delta));
            vs.push_back(delta * Vec(frames[i].col(0)));
            for (const Vec& v : vs) {
                auto b = velocity_bound(frame, K[i], v, opt.delta_nodes);
                if (b) eps_meas = std::max(eps_meas, *b);
            }
        }
        bool pass = eps_meas <= out.eps0;
        out.delta_table.push_back({delta, eps_meas, pass});
        if (!pass) {
            all_delta = false;
            break;
        }
        last_ok = delta;
    }
    if (std::isinf(out.eps0) || all_delta)
        out.delta0 = std::isinf(out.eps0) ? std::numeric_limits<double>::infinity() : last_ok;
    else
        out.delta0 = last_ok;
    if (out.delta0 == 0.0) throw DegenerateFrame("uniform_temple_radius: velocity bound delta0 degenerate");

    out.radius = std::min({out.delta0, out.rp_quarter, out.rn / std::sqrt(2.0)});
    return out;
}

}  // namespace temple
