#pragma once

#include <stdexcept>
#include <string>

namespace vfs {

/// Broad failure classes. The CLI maps them onto exit codes.
enum class ErrorKind {
    Parameter,        // invalid argument or configuration value
    Geometry,         // mismatched or degenerate grids
    UndefinedMetric,  // metric has no value for the inputs (zero variance, empty mask, ...)
    Io,               // file system failures, malformed files
    Numerical         // non-finite values during optimization
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(ErrorKind::Parameter, what) {}
};

class GeometryError : public Error {
public:
    explicit GeometryError(const std::string& what) : Error(ErrorKind::Geometry, what) {}
};

class UndefinedMetricError : public Error {
public:
    explicit UndefinedMetricError(const std::string& what) : Error(ErrorKind::UndefinedMetric, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

}  // namespace vfs
