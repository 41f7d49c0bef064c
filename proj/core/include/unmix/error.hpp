#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace unmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand sizes disagree.
class DimensionError : public Error {
public:
    DimensionError(const std::string& what, std::ptrdiff_t expected, std::ptrdiff_t actual)
        : Error(what + ": expected size " + std::to_string(expected) + ", got "
                + std::to_string(actual)),
          expected_(expected), actual_(actual) {}

    std::ptrdiff_t expected() const noexcept { return expected_; }
    std::ptrdiff_t actual() const noexcept { return actual_; }

private:
    std::ptrdiff_t expected_;
    std::ptrdiff_t actual_;
};

/// An argument violates a documented precondition (range, sign, finiteness).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A point lies outside the feasible set beyond tolerance.
class InfeasibleError : public DomainError {
public:
    using DomainError::DomainError;
};

/// An iterative method failed numerically. Carries the best point reached.
class SolverError : public Error {
public:
    SolverError(const std::string& what, Eigen::VectorXd best_point)
        : Error(what), best_point_(std::move(best_point)) {}

    const Eigen::VectorXd& best_point() const noexcept { return best_point_; }

private:
    Eigen::VectorXd best_point_;
};

/// Armijo backtracking exhausted its budget without sufficient decrease.
class LineSearchError : public SolverError {
public:
    LineSearchError(const std::string& what, Eigen::VectorXd best_point, double best_cost)
        : SolverError(what, std::move(best_point)), best_cost_(best_cost) {}

    double best_cost() const noexcept { return best_cost_; }

private:
    double best_cost_;
};

/// Malformed input file. Line and column are 1-based; 0 means "not applicable".
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, std::size_t column,
               const std::string& message)
        : Error(format(source, line, column, message)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& source, std::size_t line, std::size_t column,
                              const std::string& message) {
        std::string out = source;
        if (line > 0) out += ":" + std::to_string(line);
        if (column > 0) out += ":" + std::to_string(column);
        return out + ": " + message;
    }

    std::size_t line_;
    std::size_t column_;
};

}  // namespace unmix
