#pragma once

#include "temple/metric.hpp"

#include <string>
#include <utility>
#include <vector>

namespace temple {

struct EstimateReport {
    std::string experiment;
    std::string verdict = "inconclusive";  // pass | fail | inconclusive
    json metrics = json::object();
    json table = json::array();
    std::vector<std::string> anomalies;
    std::vector<std::pair<std::string, std::string>> files;  // extra outputs: (file name, contents)
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

// Least squares y = slope * x + intercept.
LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y);

// Numbers in reports: non-finite values are written as strings ("inf", "-inf", "nan").
json number(double v);

json vec_json(const Vec& v);
Vec vec_from_json(const json& j);

}  // namespace temple
