#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

namespace temple {

// Spacetime dimension is at most 5 (4+1); fixed capacities keep hot loops off the heap.
constexpr int kMaxDim = 5;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

struct Box {
    Vec lo;
    Vec hi;

    int dim() const { return static_cast<int>(lo.size()); }
    bool contains(const Vec& x) const {
        for (int i = 0; i < dim(); ++i)
            if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
        return true;
    }
    double diameter() const { return (hi - lo).norm(); }
    Vec center() const { return 0.5 * (lo + hi); }
    // Signed distance to the box faces (negative outside).
    double inner_distance(const Vec& x) const {
        double d = 1e300;
        for (int i = 0; i < dim(); ++i) d = std::min(d, std::min(x[i] - lo[i], hi[i] - x[i]));
        return d;
    }
};

// Gamma^a_{bc}, symmetric in b,c.
struct Christoffel {
    int d = 0;
    std::array<double, kMaxDim * kMaxDim * kMaxDim> v{};

    explicit Christoffel(int dim = 0) : d(dim) { v.fill(0.0); }
    double& operator()(int a, int b, int c) { return v[(a * kMaxDim + b) * kMaxDim + c]; }
    double operator()(int a, int b, int c) const { return v[(a * kMaxDim + b) * kMaxDim + c]; }
};

// dG(e)(a,b,c) = d_e Gamma^a_{bc}
struct ChristoffelDerivative {
    int d = 0;
    std::array<Christoffel, kMaxDim> by_axis;

    explicit ChristoffelDerivative(int dim = 0) : d(dim) {
        for (auto& c : by_axis) c = Christoffel(dim);
    }
};

// R^a_{bcd}; (R(X,Y)Z)^a = R^a_{bcd} Z^b X^c Y^d.
struct Riemann {
    int d = 0;
    std::array<double, kMaxDim * kMaxDim * kMaxDim * kMaxDim> v{};

    explicit Riemann(int dim = 0) : d(dim) { v.fill(0.0); }
    double& operator()(int a, int b, int c, int e) {
        return v[((a * kMaxDim + b) * kMaxDim + c) * kMaxDim + e];
    }
    double operator()(int a, int b, int c, int e) const {
        return v[((a * kMaxDim + b) * kMaxDim + c) * kMaxDim + e];
    }
};

inline Vec zeros(int n) { return Vec::Zero(n); }

inline Vec unit(int n, int k) {
    Vec v = Vec::Zero(n);
    v[k] = 1.0;
    return v;
}

inline Vec make_vec(std::initializer_list<double> xs) {
    Vec v(static_cast<int>(xs.size()));
    int i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

inline Vec from_std(const std::vector<double>& xs) {
    Vec v(static_cast<int>(xs.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = xs[i];
    return v;
}

inline std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline double inner(const Mat& g, const Vec& u, const Vec& v) { return u.dot(g * v); }

// Gamma^a_{bc} u^b v^c
inline Vec contract(const Christoffel& G, const Vec& u, const Vec& v) {
    const int n = G.d;
    Vec out = Vec::Zero(n);
    for (int a = 0; a < n; ++a) {
        double s = 0.0;
        for (int b = 0; b < n; ++b) {
            if (u[b] == 0.0) continue;
            for (int c = 0; c < n; ++c) s += G(a, b, c) * u[b] * v[c];
        }
        out[a] = s;
    }
    return out;
}

// (R(X,Y)Z)^a
inline Vec riemann_apply(const Riemann& R, const Vec& X, const Vec& Y, const Vec& Z) {
    const int n = R.d;
    Vec out = Vec::Zero(n);
    for (int a = 0; a < n; ++a) {
        double s = 0.0;
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int e = 0; e < n; ++e) s += R(a, b, c, e) * Z[b] * X[c] * Y[e];
        out[a] = s;
    }
    return out;
}

// R^a_{bcd} from Christoffels and their first derivatives.
inline Riemann riemann_from(const Christoffel& G, const ChristoffelDerivative& dG) {
    const int n = G.d;
    Riemann R(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c)
                for (int d = 0; d < n; ++d) {
                    double s = dG.by_axis[c](a, d, b) - dG.by_axis[d](a, c, b);
                    for (int e = 0; e < n; ++e) s += G(a, c, e) * G(e, d, b) - G(a, d, e) * G(e, c, b);
                    R(a, b, c, d) = s;
                }
    return R;
}

// Columns of the result are g-orthonormal; column 0 is timelike.
// Gram-Schmidt in the order of the columns of B.
Mat gram_schmidt(const Mat& g, const Mat& B);

// Frame in which column 0 is d0/sqrt(-g00), remaining columns from the coordinate basis.
Mat coordinate_frame(const Mat& g);

// Riemannianized metric from g and the timelike unit vector e0.
inline Mat riemannianize(const Mat& g, const Vec& e0) {
    Vec ge0 = g * e0;
    return g + 2.0 * ge0 * ge0.transpose();
}

}  // namespace temple
