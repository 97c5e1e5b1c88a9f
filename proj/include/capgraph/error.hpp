#pragma once
/**
 * @file error.hpp
 * @brief Exception types shared by the capgraph headers.
 */
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace capgraph {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite numbers, out-of-range parameters, non-unit conormals.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Mesh generation would exceed the vertex budget.
class ResourceError : public Error {
public:
    using Error::Error;
};

/// A distance field found vertices unreachable from the sources.
class UnreachableVertex : public Error {
public:
    using Error::Error;
};

/// Patch recovery could not fit a local quadratic.
class DegenerateStencil : public Error {
public:
    using Error::Error;
};

/// Expression syntax errors; carries the byte offset of the failure.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Domain violation while evaluating an expression (sqrt of negative, ...).
class EvalError : public Error {
public:
    using Error::Error;
};

/// Symbolic differentiation hit abs/min/max with a dependent argument.
class UnsupportedDerivative : public Error {
public:
    using Error::Error;
};

/// Bad or unknown configuration entries.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Base for solver failures; keeps the last iterate for diagnosis.
class SolverError : public Error {
public:
    SolverError(const std::string& what, std::vector<double> last_iterate)
        : Error(what), last_iterate_(std::move(last_iterate)) {}
    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }

private:
    std::vector<double> last_iterate_;
};

class SingularJacobian : public SolverError {
public:
    using SolverError::SolverError;
};

class LineSearchFailed : public SolverError {
public:
    using SolverError::SolverError;
};

class MaxIterationsExceeded : public SolverError {
public:
    using SolverError::SolverError;
};

}  // namespace capgraph
