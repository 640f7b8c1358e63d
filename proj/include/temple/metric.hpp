#pragma once

#include "temple/linalg.hpp"

#include <json.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace temple {

using json = nlohmann::ordered_json;

class MetricField {
public:
    MetricField(int dim, Box domain, std::string id) : dim_(dim), domain_(std::move(domain)), id_(std::move(id)) {}
    virtual ~MetricField() = default;

    int dim() const { return dim_; }
    const Box& domain() const { return domain_; }
    const std::string& catalog_id() const { return id_; }
    std::string signature_tag() const;
    bool contains(const Vec& x) const { return domain_.contains(x); }

    // Checked evaluators: out-of-box points raise DomainError.
    Mat g_eval(const Vec& x) const;
    Christoffel christoffel_eval(const Vec& x) const;
    Riemann riemann_eval(const Vec& x) const;

    // Unchecked evaluators for inner loops that already validated the point.
    virtual Mat g_raw(const Vec& x) const = 0;
    virtual Christoffel christoffel_raw(const Vec& x) const = 0;
    virtual ChristoffelDerivative dchristoffel_raw(const Vec& x) const = 0;
    Riemann riemann_raw(const Vec& x) const { return riemann_from(christoffel_raw(x), dchristoffel_raw(x)); }

    // True when Christoffels vanish identically.
    virtual bool is_flat_chart() const { return false; }
    // Coordinate time of a past boundary, if the spacetime has one, and the proper time
    // a comoving observer accumulated before reaching the domain's lower time face.
    virtual std::optional<double> past_boundary() const { return std::nullopt; }
    virtual double past_extension(const Vec&) const { return 0.0; }

    const json& spec() const { return spec_; }
    void set_spec(json s) { spec_ = std::move(s); }

protected:
    void require_inside(const Vec& x, const char* what) const;

private:
    int dim_;
    Box domain_;
    std::string id_;
    json spec_;
};

using MetricPtr = std::shared_ptr<const MetricField>;

struct ScaleFactor {
    std::function<double(double)> a;
    std::function<double(double)> da;
    std::function<double(double)> dda;
    std::string family;
    double param = 0.0;

    static ScaleFactor power(double p);
    static ScaleFactor exponential(double H);
};

struct Bump {
    Vec center;
    double radius = 1.0;

    // phi(s) = exp(1 - 1/(1 - s^2)) for s < 1, zero outside; value 1 at the center.
    double operator()(const Vec& x) const;
};

Box cube(int dim, double lo, double hi);

MetricPtr make_minkowski(int n, std::optional<Box> domain = std::nullopt);
MetricPtr make_flrw(const ScaleFactor& a, int n, double t_min, double t_max, double half_width = 1.0);
MetricPtr make_perturbed_minkowski(double epsilon, const Bump& bump, int n, std::optional<Box> domain = std::nullopt,
                                   bool past_boundary = false);
// g -> s*g with identical Christoffels and Riemann tensor.
MetricPtr make_scaled(MetricPtr base, double s);

// {"catalog_id", "dim", "domain", "params"}
MetricPtr metric_from_json(const json& spec);

// Finite-difference Christoffels of an arbitrary metric function, used as a test oracle and
// by the perturbed catalog entry.
Christoffel christoffel_fd(const std::function<Mat(const Vec&)>& g, const Vec& x, double h, bool richardson);

struct TimeFunction {
    enum class Kind { coordinate, cosmological, custom };

    std::function<double(const Vec&)> tau_eval;
    Kind kind = Kind::custom;
    std::optional<double> lipschitz_hint;
    std::string name;

    double operator()(const Vec& x) const { return tau_eval(x); }
    // Coordinate gradient by central differences.
    Vec gradient(const Vec& x, double h) const;
};

TimeFunction coordinate_time(const MetricField& metric);
// t -> t^3, strictly increasing but not anti-Lipschitz near t = 0.
TimeFunction cubic_time(const MetricField& metric);
TimeFunction time_function_from_json(const json& spec, const MetricField& metric);

struct CurveBudget {
    int levels = 3;
    int sweeps = 6;
};

struct CosmologicalTime {
    double value = 0.0;
    double comoving_value = 0.0;
    std::vector<Vec> witness;
    std::vector<double> level_values;
};

CosmologicalTime cosmological_time(const MetricField& metric, const Vec& p, const CurveBudget& budget);

}  // namespace temple
