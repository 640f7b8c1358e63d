#include "temple/newton.hpp"

#include <cmath>

namespace temple {

NewtonResult newton_solve(const ShootFn& f, const Vec& x0, const NewtonOptions& opt) {
    NewtonResult res;
    const int n = static_cast<int>(x0.size());
    Vec x = x0, r(n);
    std::vector<double> grid;
    res.x = x0;
    res.residual = 1e300;
    ++res.evaluations;
    if (!f(x, r, &grid, false)) return res;
    double rn = r.norm();
    res.x = x;
    res.residual = rn;

    Mat J(n, n);
    bool stale = true;
    std::vector<double> trial_grid;
    for (int it = 0; it < opt.max_iter; ++it) {
        res.iterations = it;
        if (rn <= opt.tol) break;
        bool fresh = false;
        if (stale) {
            Vec rp(n);
            bool ok = true;
            for (int k = 0; k < n && ok; ++k) {
                Vec xp = x;
                double h = opt.fd_step;
                xp[k] += h;
                ++res.evaluations;
                ok = f(xp, rp, &grid, true);
                if (ok) J.col(k) = (rp - r) / h;
            }
            if (!ok) {
                // Forward stencil left the domain; try the backward one.
                ok = true;
                for (int k = 0; k < n && ok; ++k) {
                    Vec xm = x;
                    double h = opt.fd_step;
                    xm[k] -= h;
                    ++res.evaluations;
                    ok = f(xm, rp, &grid, true);
                    if (ok) J.col(k) = (r - rp) / h;
                }
            }
            if (!ok) break;
            stale = false;
            fresh = true;
        }
        Eigen::FullPivLU<Mat> lu(J);
        if (lu.rank() < n) break;
        Vec dx = -lu.solve(r);
        bool improved = false;
        double step = 1.0;
        Vec rt(n);
        for (int k = 0; k <= opt.max_halvings; ++k, step *= 0.5) {
            Vec xt = x + step * dx;
            trial_grid.clear();
            ++res.evaluations;
            if (f(xt, rt, &trial_grid, false) && rt.norm() < rn) {
                double rtn = rt.norm();
                if (!opt.chord || rtn > 0.5 * rn || k > 0) stale = true;
                x = xt;
                r = rt;
                rn = rtn;
                grid.swap(trial_grid);
                improved = true;
                break;
            }
        }
        if (!improved) {
            if (fresh) break;  // fresh Jacobian and still no progress
            stale = true;
        }
        res.x = x;
        res.residual = rn;
    }
    res.x = x;
    res.residual = rn;
    res.converged = rn <= opt.accept;
    return res;
}

}  // namespace temple
