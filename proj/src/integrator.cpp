#include "temple/integrator.hpp"

#include <algorithm>
#include <cmath>

namespace temple {

namespace {

constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0, a75 = -2187.0 / 6784.0,
                 a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0, e5 = -17253.0 / 339200.0,
                 e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

struct Stages {
    State k1, k2, k3, k4, k5, k6, k7, y1, tmp;
};

// One DP5 step from (s, y) with k1 = f(s, y) already known. Fills y1 and k7.
bool dp_step(const Rhs& f, double s, double h, const State& y, Stages& st, long& evals) {
    st.tmp = y + h * (a21 * st.k1);
    ++evals;
    if (!f(s + c2 * h, st.tmp, st.k2)) return false;
    st.tmp = y + h * (a31 * st.k1 + a32 * st.k2);
    ++evals;
    if (!f(s + c3 * h, st.tmp, st.k3)) return false;
    st.tmp = y + h * (a41 * st.k1 + a42 * st.k2 + a43 * st.k3);
    ++evals;
    if (!f(s + c4 * h, st.tmp, st.k4)) return false;
    st.tmp = y + h * (a51 * st.k1 + a52 * st.k2 + a53 * st.k3 + a54 * st.k4);
    ++evals;
    if (!f(s + c5 * h, st.tmp, st.k5)) return false;
    st.tmp = y + h * (a61 * st.k1 + a62 * st.k2 + a63 * st.k3 + a64 * st.k4 + a65 * st.k5);
    ++evals;
    if (!f(s + h, st.tmp, st.k6)) return false;
    st.y1 = y + h * (a71 * st.k1 + a73 * st.k3 + a74 * st.k4 + a75 * st.k5 + a76 * st.k6);
    ++evals;
    if (!f(s + h, st.y1, st.k7)) return false;
    return true;
}

double error_norm(const State& y0, const Stages& st, double h, double rtol, double atol) {
    const int n = static_cast<int>(y0.size());
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double e = h * (e1 * st.k1[i] + e3 * st.k3[i] + e4 * st.k4[i] + e5 * st.k5[i] + e6 * st.k6[i] +
                        e7 * st.k7[i]);
        double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(st.y1[i]));
        sum += (e / sc) * (e / sc);
    }
    return std::sqrt(sum / n);
}

DenseStep make_dense(double s, double h, const State& y0, const Stages& st) {
    DenseStep d;
    d.s0 = s;
    d.h = h;
    d.r1 = y0;
    d.r2 = st.y1 - y0;
    d.r3 = h * st.k1 - d.r2;
    d.r4 = d.r2 - h * st.k7 - d.r3;
    d.r5 = h * (d1 * st.k1 + d3 * st.k3 + d4 * st.k4 + d5 * st.k5 + d6 * st.k6 + d7 * st.k7);
    return d;
}

double initial_step(const Rhs& f, double s0, const State& y0, const State& f0, double dir, double span,
                    double rtol, double atol, long& evals) {
    const int n = static_cast<int>(y0.size());
    double dnf = 0.0, dny = 0.0;
    for (int i = 0; i < n; ++i) {
        double sk = atol + rtol * std::abs(y0[i]);
        dnf += (f0[i] / sk) * (f0[i] / sk);
        dny += (y0[i] / sk) * (y0[i] / sk);
    }
    double h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : std::sqrt(dny / dnf) * 0.01;
    h = std::min(h, span);
    State y1 = y0 + dir * h * f0;
    State f1(n);
    ++evals;
    if (!f(s0 + dir * h, y1, f1)) return h * 0.1;
    double der2 = 0.0;
    for (int i = 0; i < n; ++i) {
        double sk = atol + rtol * std::abs(y0[i]);
        der2 += ((f1[i] - f0[i]) / sk) * ((f1[i] - f0[i]) / sk);
    }
    der2 = std::sqrt(der2) / h;
    double der12 = std::max(std::abs(der2), std::sqrt(dnf));
    double h1 = der12 <= 1e-15 ? std::max(1e-6, std::abs(h) * 1e-3) : std::pow(0.01 / der12, 0.2);
    return std::min({100.0 * h, h1, span});
}

}  // namespace

State DenseStep::eval(double s) const {
    double th = (s - s0) / h;
    double th1 = 1.0 - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
}

State DenseStep::derivative(double s) const {
    // d/dth of r1 + th r2 + th th1 r3 + th^2 th1 r4 + th^2 th1^2 r5
    double th = (s - s0) / h;
    double th1 = 1.0 - th;
    State d = r2 + (1.0 - 2.0 * th) * r3 + (2.0 * th * th1 - th * th) * r4 +
              (2.0 * th * th1 * th1 - 2.0 * th * th * th1) * r5;
    return d / h;
}

namespace {
std::size_t find_segment(const Solution& sol, double s) {
    const bool fwd = sol.s.back() >= sol.s.front();
    std::size_t lo = 0, hi = sol.dense.size();
    while (hi - lo > 1) {
        std::size_t mid = (lo + hi) / 2;
        bool after = fwd ? (s >= sol.s[mid]) : (s <= sol.s[mid]);
        if (after)
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}
}  // namespace

State Solution::at(double q) const {
    if (dense.empty()) return y.front();
    const double a = std::min(s.front(), s.back()), b = std::max(s.front(), s.back());
    q = std::clamp(q, a, b);
    return dense[find_segment(*this, q)].eval(q);
}

State Solution::derivative_at(double q) const {
    if (dense.empty()) return State::Zero(y.front().size());
    const double a = std::min(s.front(), s.back()), b = std::max(s.front(), s.back());
    q = std::clamp(q, a, b);
    return dense[find_segment(*this, q)].derivative(q);
}

std::vector<double> Solution::grid_fractions() const {
    std::vector<double> out;
    out.reserve(s.size());
    const double span = s.back() - s.front();
    for (double v : s) out.push_back(span == 0.0 ? 0.0 : (v - s.front()) / span);
    return out;
}

Solution integrate(const Rhs& f, double s0, double s1, const State& y0, const IntegratorOptions& opt) {
    Solution sol;
    const int n = static_cast<int>(y0.size());
    sol.s.push_back(s0);
    sol.y.push_back(y0);
    if (s1 == s0) return sol;

    const double dir = s1 > s0 ? 1.0 : -1.0;
    const double span = std::abs(s1 - s0);
    Stages st;
    st.k1.resize(n);
    st.k2.resize(n);
    st.k3.resize(n);
    st.k4.resize(n);
    st.k5.resize(n);
    st.k6.resize(n);
    st.k7.resize(n);

    State y = y0;
    double s = s0;
    ++sol.rhs_evals;
    if (!f(s, y, st.k1)) {
        sol.truncated = true;
        return sol;
    }

    if (opt.replay) {
        const auto& fr = *opt.replay;
        for (std::size_t i = 1; i < fr.size(); ++i) {
            double sn = s0 + (s1 - s0) * fr[i];
            double h = sn - s;
            if (!dp_step(f, s, h, y, st, sol.rhs_evals)) {
                sol.truncated = true;
                return sol;
            }
            if (opt.dense) sol.dense.push_back(make_dense(s, h, y, st));
            y = st.y1;
            if (opt.project) {
                opt.project(y);
                f(sn, y, st.k7);
            }
            s = sn;
            st.k1 = st.k7;
            sol.s.push_back(s);
            sol.y.push_back(y);
            ++sol.accepted;
        }
        return sol;
    }

    double h = opt.h_init > 0 ? std::min(opt.h_init, span)
                              : initial_step(f, s0, y0, st.k1, dir, span, opt.rtol, opt.atol, sol.rhs_evals);
    const double hmin = opt.min_step_fraction * span;
    bool last_rejected = false;

    for (int step = 0; step < opt.max_steps; ++step) {
        double remaining = std::abs(s1 - s);
        if (remaining <= 1e-14 * span) break;
        bool final_step = false;
        if (h >= remaining) {
            h = remaining;
            final_step = true;
        }
        bool ok = dp_step(f, s, dir * h, y, st, sol.rhs_evals);
        if (!ok) {
            ++sol.rejected;
            h *= 0.5;
            if (h < hmin) {
                sol.truncated = true;
                break;
            }
            last_rejected = true;
            continue;
        }
        double err = error_norm(y, st, h, opt.rtol, opt.atol);
        if (err <= 1.0) {
            double sn = final_step ? s1 : s + dir * h;
            if (opt.dense) sol.dense.push_back(make_dense(s, sn - s, y, st));
            y = st.y1;
            if (opt.project) {
                opt.project(y);
                f(sn, y, st.k7);
            }
            s = sn;
            st.k1 = st.k7;
            sol.s.push_back(s);
            sol.y.push_back(y);
            ++sol.accepted;
            if (final_step) break;
            double fac = err == 0.0 ? 10.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 10.0);
            if (last_rejected) fac = std::min(fac, 1.0);
            h *= fac;
            last_rejected = false;
        } else {
            ++sol.rejected;
            h *= std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
            last_rejected = true;
            if (h < hmin) {
                sol.truncated = true;
                break;
            }
        }
    }
    if (std::abs(s1 - s) > 1e-14 * span) sol.truncated = true;
    return sol;
}

}  // namespace temple
