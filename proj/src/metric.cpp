#include "temple/metric.hpp"

#include "temple/errors.hpp"
#include "temple/sampling.hpp"

#include <cmath>
#include <sstream>

namespace temple {

Mat gram_schmidt(const Mat& g, const Mat& B) {
    const int n = static_cast<int>(B.cols());
    Mat E(B.rows(), n);
    for (int k = 0; k < n; ++k) {
        Vec v = B.col(k);
        for (int j = 0; j < k; ++j) {
            Vec ej = E.col(j);
            double s = inner(g, ej, ej);  // +-1
            v -= (inner(g, v, ej) / s) * ej;
        }
        double nn = inner(g, v, v);
        if (std::abs(nn) < 1e-300) throw InvalidMetric("gram_schmidt: degenerate vector");
        E.col(k) = v / std::sqrt(std::abs(nn));
    }
    return E;
}

Mat coordinate_frame(const Mat& g) {
    const int n = static_cast<int>(g.rows());
    if (!(g(0, 0) < 0)) throw InvalidMetric("coordinate_frame: d/dx0 is not timelike");
    return gram_schmidt(g, Mat::Identity(n, n));
}

std::string MetricField::signature_tag() const {
    std::string s = "(-";
    for (int i = 1; i < dim_; ++i) s += ",+";
    return s + ")";
}

void MetricField::require_inside(const Vec& x, const char* what) const {
    if (x.size() != dim_) throw DomainError(std::string(what) + ": dimension mismatch");
    if (!domain_.contains(x)) {
        std::ostringstream os;
        os << what << ": point outside domain box (";
        for (int i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
        os << ")";
        throw DomainError(os.str());
    }
}

Mat MetricField::g_eval(const Vec& x) const {
    require_inside(x, "g_eval");
    return g_raw(x);
}

Christoffel MetricField::christoffel_eval(const Vec& x) const {
    require_inside(x, "christoffel_eval");
    return christoffel_raw(x);
}

Riemann MetricField::riemann_eval(const Vec& x) const {
    require_inside(x, "riemann_eval");
    return riemann_raw(x);
}

Box cube(int dim, double lo, double hi) {
    return Box{Vec::Constant(dim, lo), Vec::Constant(dim, hi)};
}

Christoffel christoffel_fd(const std::function<Mat(const Vec&)>& g, const Vec& x, double h, bool richardson) {
    const int n = static_cast<int>(x.size());
    std::array<Mat, kMaxDim> dg;
    for (int e = 0; e < n; ++e) {
        auto central = [&](double step) {
            Vec xp = x, xm = x;
            xp[e] += step;
            xm[e] -= step;
            Mat d = (g(xp) - g(xm)) / (2.0 * step);
            return d;
        };
        dg[e] = richardson ? Mat((4.0 * central(0.5 * h) - central(h)) / 3.0) : central(h);
    }
    Mat ginv = g(x).inverse();
    Christoffel G(n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = b; c < n; ++c) {
                double s = 0.0;
                for (int d = 0; d < n; ++d) s += ginv(a, d) * (dg[b](d, c) + dg[c](d, b) - dg[d](b, c));
                G(a, b, c) = 0.5 * s;
                G(a, c, b) = 0.5 * s;
            }
    return G;
}

namespace {

class Minkowski final : public MetricField {
public:
    Minkowski(int n, Box box, std::optional<double> past) : MetricField(n + 1, std::move(box), "minkowski"), past_(past) {}

    Mat g_raw(const Vec&) const override {
        Mat g = Mat::Identity(dim(), dim());
        g(0, 0) = -1.0;
        return g;
    }
    Christoffel christoffel_raw(const Vec&) const override { return Christoffel(dim()); }
    ChristoffelDerivative dchristoffel_raw(const Vec&) const override { return ChristoffelDerivative(dim()); }
    bool is_flat_chart() const override { return true; }
    std::optional<double> past_boundary() const override { return past_; }

private:
    std::optional<double> past_;
};

class Flrw final : public MetricField {
public:
    Flrw(ScaleFactor a, int n, Box box) : MetricField(n + 1, std::move(box), "flrw"), a_(std::move(a)) {}

    Mat g_raw(const Vec& x) const override {
        Mat g = Mat::Identity(dim(), dim());
        double a = a_.a(x[0]);
        g *= a * a;
        g(0, 0) = -1.0;
        return g;
    }
    Christoffel christoffel_raw(const Vec& x) const override {
        Christoffel G(dim());
        double a = a_.a(x[0]), da = a_.da(x[0]);
        for (int i = 1; i < dim(); ++i) {
            G(0, i, i) = a * da;
            G(i, 0, i) = da / a;
            G(i, i, 0) = da / a;
        }
        return G;
    }
    ChristoffelDerivative dchristoffel_raw(const Vec& x) const override {
        ChristoffelDerivative dG(dim());
        double a = a_.a(x[0]), da = a_.da(x[0]), dda = a_.dda(x[0]);
        auto& d0 = dG.by_axis[0];
        for (int i = 1; i < dim(); ++i) {
            d0(0, i, i) = da * da + a * dda;
            double v = (a * dda - da * da) / (a * a);
            d0(i, 0, i) = v;
            d0(i, i, 0) = v;
        }
        return dG;
    }
    std::optional<double> past_boundary() const override {
        if (a_.family == "power" && a_.param > 0) return 0.0;
        return std::nullopt;
    }
    // A comoving worldline from the big bang to the lower face accumulates t_min of proper time.
    double past_extension(const Vec&) const override { return domain().lo[0]; }

private:
    ScaleFactor a_;
};

class Perturbed final : public MetricField {
public:
    Perturbed(double eps, Bump bump, int n, Box box, bool past)
        : MetricField(n + 1, std::move(box), "perturbed"), eps_(eps), bump_(std::move(bump)), past_(past) {
        h_ = 1e-4 * domain().diameter();
    }

    Mat g_raw(const Vec& x) const override {
        Mat g = Mat::Identity(dim(), dim());
        g(0, 0) = -1.0;
        if (eps_ != 0.0) {
            double b = eps_ * bump_(x);
            g(0, 1) += b;
            g(1, 0) += b;
            g(1, 1) += b;
        }
        return g;
    }
    // Only g01 = g10 and g11 depend on x, through eps*b(x); the derivative of b is a
    // Richardson-extrapolated central difference.
    Christoffel christoffel_raw(const Vec& x) const override {
        const int n = dim();
        Christoffel G(n);
        if (eps_ == 0.0) return G;
        Vec db(n);
        for (int e = 0; e < n; ++e) {
            auto central = [&](double step) {
                Vec xp = x, xm = x;
                xp[e] += step;
                xm[e] -= step;
                return (bump_(xp) - bump_(xm)) / (2.0 * step);
            };
            db[e] = (4.0 * central(0.5 * h_) - central(h_)) / 3.0;
        }
        Mat ginv = g_raw(x).inverse();
        // dg[e](d,c) = eps * db[e] * P(d,c) with P(0,1) = P(1,0) = P(1,1) = 1
        auto P = [](int d, int c) { return (d == 1 && c <= 1) || (c == 1 && d == 0) ? 1.0 : 0.0; };
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = b; c < n; ++c) {
                    double s = 0.0;
                    for (int d = 0; d < n; ++d) {
                        if (ginv(a, d) == 0.0) continue;
                        double t = db[b] * P(d, c) + db[c] * P(d, b) - db[d] * P(b, c);
                        s += ginv(a, d) * t;
                    }
                    G(a, b, c) = G(a, c, b) = 0.5 * eps_ * s;
                }
        return G;
    }
    ChristoffelDerivative dchristoffel_raw(const Vec& x) const override {
        ChristoffelDerivative dG(dim());
        if (eps_ == 0.0) return dG;
        const int n = dim();
        for (int e = 0; e < n; ++e) {
            auto central = [&](double step) {
                Vec xp = x, xm = x;
                xp[e] += step;
                xm[e] -= step;
                Christoffel p = christoffel_raw(xp), m = christoffel_raw(xm);
                Christoffel d(n);
                for (std::size_t k = 0; k < d.v.size(); ++k) d.v[k] = (p.v[k] - m.v[k]) / (2.0 * step);
                return d;
            };
            Christoffel a = central(0.5 * h_), b = central(h_);
            for (std::size_t k = 0; k < a.v.size(); ++k) dG.by_axis[e].v[k] = (4.0 * a.v[k] - b.v[k]) / 3.0;
        }
        return dG;
    }
    bool is_flat_chart() const override { return eps_ == 0.0; }
    std::optional<double> past_boundary() const override {
        if (past_) return domain().lo[0];
        return std::nullopt;
    }

private:
    double eps_;
    Bump bump_;
    bool past_;
    double h_;
};

class Scaled final : public MetricField {
public:
    Scaled(MetricPtr base, double s) : MetricField(base->dim(), base->domain(), base->catalog_id()), base_(std::move(base)), s_(s) {}
    Mat g_raw(const Vec& x) const override { return s_ * base_->g_raw(x); }
    Christoffel christoffel_raw(const Vec& x) const override { return base_->christoffel_raw(x); }
    ChristoffelDerivative dchristoffel_raw(const Vec& x) const override { return base_->dchristoffel_raw(x); }
    bool is_flat_chart() const override { return base_->is_flat_chart(); }
    std::optional<double> past_boundary() const override { return base_->past_boundary(); }
    double past_extension(const Vec& x) const override { return std::sqrt(s_) * base_->past_extension(x); }

private:
    MetricPtr base_;
    double s_;
};

void check_signature(const MetricField& m, int samples) {
    Halton seq(m.dim());
    const Box& b = m.domain();
    for (int k = 0; k < samples; ++k) {
        Vec u = seq.next();
        Vec x = b.lo + u.cwiseProduct(b.hi - b.lo);
        Eigen::SelfAdjointEigenSolver<Mat> es(m.g_raw(x));
        const auto& ev = es.eigenvalues();
        int neg = 0, pos = 0;
        for (int i = 0; i < ev.size(); ++i) {
            if (ev[i] < 0)
                ++neg;
            else if (ev[i] > 0)
                ++pos;
        }
        if (neg != 1 || pos != m.dim() - 1) throw InvalidMetric("signature violation in " + m.catalog_id());
    }
}

json box_json(const Box& b) {
    json d = json::array();
    for (int i = 0; i < b.dim(); ++i) d.push_back({b.lo[i], b.hi[i]});
    return d;
}

}  // namespace

double Bump::operator()(const Vec& x) const {
    double s2 = (x - center).squaredNorm() / (radius * radius);
    if (s2 >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s2));
}

ScaleFactor ScaleFactor::power(double p) {
    ScaleFactor s;
    s.family = "power";
    s.param = p;
    s.a = [p](double t) { return std::pow(t, p); };
    s.da = [p](double t) { return p == 0.0 ? 0.0 : p * std::pow(t, p - 1.0); };
    s.dda = [p](double t) { return (p == 0.0 || p == 1.0) ? 0.0 : p * (p - 1.0) * std::pow(t, p - 2.0); };
    return s;
}

ScaleFactor ScaleFactor::exponential(double H) {
    ScaleFactor s;
    s.family = "exp";
    s.param = H;
    s.a = [H](double t) { return std::exp(H * t); };
    s.da = [H](double t) { return H * std::exp(H * t); };
    s.dda = [H](double t) { return H * H * std::exp(H * t); };
    return s;
}

MetricPtr make_minkowski(int n, std::optional<Box> domain) {
    if (n < 1) throw InvalidMetric("make_minkowski: n must be >= 1");
    Box b = domain ? *domain : cube(n + 1, -1.0, 1.0);
    if (b.dim() != n + 1) throw InvalidMetric("make_minkowski: domain dimension mismatch");
    auto m = std::make_shared<Minkowski>(n, b, std::nullopt);
    m->set_spec({{"catalog_id", "minkowski"}, {"dim", n + 1}, {"domain", box_json(b)}, {"params", json::object()}});
    return m;
}

MetricPtr make_flrw(const ScaleFactor& a, int n, double t_min, double t_max, double half_width) {
    if (n < 1) throw InvalidMetric("make_flrw: n must be >= 1");
    if (!(t_max > t_min)) throw InvalidMetric("make_flrw: empty time range");
    for (int k = 0; k <= 64; ++k) {
        double t = t_min + (t_max - t_min) * k / 64.0;
        double v = a.a(t);
        if (!(v > 0.0) || !std::isfinite(v)) throw InvalidMetric("make_flrw: scale factor not positive on range");
    }
    Box b = cube(n + 1, -half_width, half_width);
    b.lo[0] = t_min;
    b.hi[0] = t_max;
    auto m = std::make_shared<Flrw>(a, n, b);
    m->set_spec({{"catalog_id", "flrw"},
                 {"dim", n + 1},
                 {"domain", box_json(b)},
                 {"params", {{"scale_factor", {{a.family, a.param}}}}}});
    return m;
}

MetricPtr make_perturbed_minkowski(double epsilon, const Bump& bump, int n, std::optional<Box> domain, bool past) {
    if (n < 1) throw InvalidMetric("make_perturbed_minkowski: n must be >= 1");
    Box b = domain ? *domain : cube(n + 1, -1.0, 1.0);
    if (b.dim() != n + 1 || bump.center.size() != n + 1) throw InvalidMetric("make_perturbed_minkowski: dimension mismatch");
    if (!(bump.radius > 0)) throw InvalidMetric("make_perturbed_minkowski: bump radius must be positive");
    auto m = std::make_shared<Perturbed>(epsilon, bump, n, b, past);
    check_signature(*m, 1000);
    m->set_spec({{"catalog_id", "perturbed"},
                 {"dim", n + 1},
                 {"domain", box_json(b)},
                 {"params",
                  {{"epsilon", epsilon},
                   {"bump", {{"center", to_std(bump.center)}, {"radius", bump.radius}}},
                   {"past_boundary", past}}}});
    return m;
}

MetricPtr make_scaled(MetricPtr base, double s) {
    if (!(s > 0)) throw InvalidMetric("make_scaled: factor must be positive");
    json spec = base->spec();
    spec["params"]["scale"] = s;
    auto m = std::make_shared<Scaled>(std::move(base), s);
    m->set_spec(spec);
    return m;
}

MetricPtr metric_from_json(const json& spec) {
    try {
        const std::string id = spec.at("catalog_id").get<std::string>();
        const int dim = spec.at("dim").get<int>();
        if (dim < 2 || dim > kMaxDim) throw ConfigError("metric spec: dim must be in [2, 5]");
        const json params = spec.contains("params") ? spec["params"] : json::object();
        std::optional<Box> box;
        if (spec.contains("domain")) {
            const auto& d = spec["domain"];
            if (static_cast<int>(d.size()) != dim) throw ConfigError("metric spec: domain has wrong length");
            Box b{Vec(dim), Vec(dim)};
            for (int i = 0; i < dim; ++i) {
                b.lo[i] = d[i][0].get<double>();
                b.hi[i] = d[i][1].get<double>();
                if (!(b.hi[i] > b.lo[i])) throw ConfigError("metric spec: empty domain interval");
            }
            box = b;
        }
        MetricPtr m;
        if (id == "minkowski") {
            bool past = params.value("past_boundary", false);
            Box b = box ? *box : cube(dim, -1.0, 1.0);
            auto mk = std::make_shared<Minkowski>(dim - 1, b, past ? std::optional<double>(b.lo[0]) : std::nullopt);
            json s = spec;
            if (!spec.contains("domain")) s["domain"] = box_json(b);
            mk->set_spec(s);
            m = mk;
        } else if (id == "flrw") {
            json sf = params.contains("scale_factor") ? params["scale_factor"] : params;
            ScaleFactor a;
            if (sf.contains("power"))
                a = ScaleFactor::power(sf["power"].get<double>());
            else if (sf.contains("exp"))
                a = ScaleFactor::exponential(sf["exp"].get<double>());
            else
                throw ConfigError("flrw: scale factor must be {\"power\": p} or {\"exp\": H}");
            Box b = box ? *box : [&] {
                Box c = cube(dim, -1.0, 1.0);
                c.lo[0] = 0.5;
                c.hi[0] = 2.5;
                return c;
            }();
            for (int i = 2; i < dim; ++i)
                if (b.lo[i] != b.lo[1] || b.hi[i] != b.hi[1] || b.lo[1] != -b.hi[1])
                    throw ConfigError("flrw: spatial domain must be a symmetric cube");
            m = make_flrw(a, dim - 1, b.lo[0], b.hi[0], b.hi[1]);
            std::const_pointer_cast<MetricField>(m)->set_spec(spec);
        } else if (id == "perturbed") {
            double eps = params.value("epsilon", 0.05);
            Bump bump;
            bump.center = Vec::Zero(dim);
            bump.radius = 1.0;
            if (params.contains("bump")) {
                const auto& bj = params["bump"];
                if (bj.contains("center")) bump.center = from_std(bj["center"].get<std::vector<double>>());
                bump.radius = bj.value("radius", 1.0);
            }
            m = make_perturbed_minkowski(eps, bump, dim - 1, box, params.value("past_boundary", false));
            std::const_pointer_cast<MetricField>(m)->set_spec(spec);
        } else {
            throw ConfigError("unknown catalog_id '" + id + "'");
        }
        if (params.contains("scale")) {
            double s = params["scale"].get<double>();
            json keep = m->spec();
            m = make_scaled(m, s);
            std::const_pointer_cast<MetricField>(m)->set_spec(keep);
        }
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("metric spec: ") + e.what());
    }
}

Vec TimeFunction::gradient(const Vec& x, double h) const {
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (tau_eval(xp) - tau_eval(xm)) / (2.0 * h);
    }
    return g;
}

TimeFunction coordinate_time(const MetricField& metric) {
    Halton seq(metric.dim());
    const Box& b = metric.domain();
    for (int k = 0; k < 256; ++k) {
        Vec x = b.lo + seq.next().cwiseProduct(b.hi - b.lo);
        Mat ginv = metric.g_raw(x).inverse();
        if (!(ginv(0, 0) < 0)) throw InvalidTimeFunction("coordinate_time: x0 is not a time function on the domain");
    }
    TimeFunction t;
    t.tau_eval = [](const Vec& x) { return x[0]; };
    t.kind = TimeFunction::Kind::coordinate;
    t.name = "coordinate";
    return t;
}

TimeFunction cubic_time(const MetricField& metric) {
    coordinate_time(metric);
    TimeFunction t;
    t.tau_eval = [](const Vec& x) { return x[0] * x[0] * x[0]; };
    t.kind = TimeFunction::Kind::custom;
    t.name = "cubic";
    return t;
}

TimeFunction time_function_from_json(const json& spec, const MetricField& metric) {
    std::string kind = spec.is_string() ? spec.get<std::string>() : spec.value("kind", "coordinate");
    if (kind == "coordinate") return coordinate_time(metric);
    if (kind == "cubic") return cubic_time(metric);
    throw ConfigError("unknown time function '" + kind + "'");
}

}  // namespace temple
