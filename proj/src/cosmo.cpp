#include "temple/errors.hpp"
#include "temple/geodesic.hpp"

#include <cmath>

namespace temple {

namespace {

// Proper time of the coordinate line x = const from the lower face up to p, by Gauss-Legendre.
double comoving_length(const MetricField& m, const Vec& p) {
    static const double xs[] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
    static const double ws[] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    const double t0 = m.domain().lo[0], t1 = p[0];
    const int pieces = 16;
    double L = 0.0;
    for (int k = 0; k < pieces; ++k) {
        double a = t0 + (t1 - t0) * k / pieces, b = t0 + (t1 - t0) * (k + 1) / pieces;
        for (int i = 0; i < 8; ++i) {
            Vec x = p;
            x[0] = 0.5 * (a + b) + 0.5 * (b - a) * xs[i];
            L += 0.5 * (b - a) * ws[i] * std::sqrt(std::max(0.0, -m.g_raw(x)(0, 0)));
        }
    }
    return L + m.past_extension(p);
}

// Lorentzian length of the geodesic from a to b, or nullopt when it is not future timelike.
std::optional<double> segment_length(const MetricField& m, const Vec& a, const Vec& b) {
    if (!m.contains(a) || !m.contains(b)) return std::nullopt;
    const int d = m.dim();
    Vec v;
    if (m.is_flat_chart()) {
        v = b - a;
    } else {
        try {
            InverseOptions opt;
            opt.scale = (b - a).norm();
            v = invert_framed_exp(m, Mat::Identity(d, d), a, b, std::nullopt, opt);
        } catch (const Error&) {
            return std::nullopt;
        }
    }
    double n = inner(m.g_raw(a), v, v);
    if (!(n < 0) || !(v[0] > 0)) return std::nullopt;
    return std::sqrt(-n);
}

// Breakpoints: x[0] on the lower face (only its spatial part is free), x[1..k-1] free, x[k] = p.
double curve_length(const MetricField& m, const std::vector<Vec>& x) {
    double L = m.past_extension(x.front());
    for (std::size_t i = 1; i < x.size(); ++i) {
        auto s = segment_length(m, x[i - 1], x[i]);
        if (!s) return -std::numeric_limits<double>::infinity();
        L += *s;
    }
    return L;
}

}  // namespace

CosmologicalTime cosmological_time(const MetricField& metric, const Vec& p, const CurveBudget& budget) {
    if (!metric.past_boundary()) throw UnsupportedMetric("cosmological_time: metric has no past boundary");
    if (!metric.contains(p)) throw DomainError("cosmological_time: point outside domain");
    const int d = metric.dim();
    const double t_lo = metric.domain().lo[0];

    CosmologicalTime out;
    out.comoving_value = comoving_length(metric, p);
    out.value = out.comoving_value;
    Vec start = p;
    start[0] = t_lo;
    out.witness = {start, p};
    if (p[0] <= t_lo) return out;

    std::vector<Vec> curve = out.witness;
    double best = curve_length(metric, curve);
    for (int level = 0; level < budget.levels; ++level) {
        if (level > 0) {
            std::vector<Vec> finer{curve.front()};
            for (std::size_t i = 1; i < curve.size(); ++i) {
                finer.push_back(0.5 * (curve[i - 1] + curve[i]));
                finer.push_back(curve[i]);
            }
            curve = finer;
            best = curve_length(metric, curve);
        }
        double step = 0.1 * (p[0] - t_lo) / (1 << level);
        for (int sweep = 0; sweep < budget.sweeps; ++sweep) {
            bool improved = false;
            for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
                for (int c = (i == 0 ? 1 : 0); c < d; ++c) {
                    for (double s : {step, -step}) {
                        std::vector<Vec> trial = curve;
                        trial[i][c] += s;
                        double L = curve_length(metric, trial);
                        if (L > best) {
                            best = L;
                            curve = trial;
                            improved = true;
                            break;
                        }
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        out.level_values.push_back(std::max(out.comoving_value, best));
        if (best > out.value) {
            out.value = best;
            out.witness = curve;
        }
    }
    return out;
}

}  // namespace temple
