#pragma once

#include <stdexcept>
#include <string>

namespace temple {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class DomainError : public Error {
public:
    using Error::Error;
};

// Geodesic left the metric's domain box; exit_param is the last valid affine parameter.
class BoundaryError : public DomainError {
public:
    BoundaryError(const std::string& what, double exit) : DomainError(what), exit_param(exit) {}
    double exit_param;
};

class InvalidMetric : public Error {
public:
    using Error::Error;
};

class InvalidTimeFunction : public Error {
public:
    using Error::Error;
};

class UnsupportedMetric : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& what, double residual) : Error(what), best_residual(residual) {}
    double best_residual;
};

class OutOfRadius : public Error {
public:
    using Error::Error;
};

class RadiusError : public Error {
public:
    using Error::Error;
};

class DegenerateFrame : public Error {
public:
    using Error::Error;
};

class ResolutionError : public Error {
public:
    using Error::Error;
};

class ConnectivityError : public Error {
public:
    using Error::Error;
};

class CoverageError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace temple
