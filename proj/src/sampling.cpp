#include "temple/sampling.hpp"

#include <cmath>

namespace temple {

namespace {
constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};

// Inverse normal CDF (Acklam's rational approximation), adequate for direction sampling.
double inv_normal(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    p = std::min(std::max(p, 1e-12), 1.0 - 1e-12);
    if (p < 0.02425) {
        double q = std::sqrt(-2 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > 1 - 0.02425) {
        double q = std::sqrt(-2 * std::log(1 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    double q = p - 0.5, r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}
}  // namespace

double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (i > 0) {
        r += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return r;
}

Vec Halton::next() {
    Vec v(d_);
    for (int k = 0; k < d_; ++k) v[k] = radical_inverse(index_, kPrimes[k]);
    ++index_;
    return v;
}

Vec Rng::unit_vector(int n) {
    Vec v(n);
    do {
        for (int i = 0; i < n; ++i) v[i] = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
}

Vec Rng::in_ball(int n, double radius) {
    Vec u = unit_vector(n);
    double r = radius * std::pow(uniform(), 1.0 / n);
    return r * u;
}

Vec Rng::in_box(const Box& b) {
    Vec v(b.dim());
    for (int i = 0; i < b.dim(); ++i) v[i] = uniform(b.lo[i], b.hi[i]);
    return v;
}

std::vector<Vec> sphere_points(int n, int count, double phase) {
    std::vector<Vec> out;
    out.reserve(count);
    if (n == 1) {
        for (int k = 0; k < count; ++k) out.push_back(make_vec({k % 2 == 0 ? 1.0 : -1.0}));
        return out;
    }
    if (n == 2) {
        for (int k = 0; k < count; ++k) {
            double a = phase + 2.0 * M_PI * k / count;
            out.push_back(make_vec({std::cos(a), std::sin(a)}));
        }
        return out;
    }
    if (n == 3) {
        const double golden = M_PI * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < count; ++k) {
            double z = 1.0 - 2.0 * (k + 0.5) / count;
            double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            double a = phase + golden * k;
            out.push_back(make_vec({r * std::cos(a), r * std::sin(a), z}));
        }
        return out;
    }
    Halton h(n);
    for (int k = 0; k < count; ++k) {
        Vec u = h.next();
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = inv_normal(u[i]);
        out.push_back(v / v.norm());
    }
    return out;
}

std::vector<Vec> ball_points(int n, int count, double radius) {
    std::vector<Vec> out;
    for (int i = 0; i < n && static_cast<int>(out.size()) < count; ++i) {
        out.push_back(radius * unit(n, i));
        out.push_back(-radius * unit(n, i));
    }
    Halton h(n);
    while (static_cast<int>(out.size()) < count) {
        Vec u = 2.0 * h.next() - Vec::Ones(n);
        if (u.squaredNorm() <= 1.0) out.push_back(radius * u);
    }
    return out;
}

}  // namespace temple
