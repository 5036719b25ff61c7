#pragma once

// Shared types for expectation-consistent signal recovery: the Bernoulli-Gaussian
// prior, dense vector/matrix aliases and the exception hierarchy.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ecsr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad parameters or inconsistent dimensions.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A function was evaluated outside of its domain (e.g. past a branch point).
class DomainError : public Error {
public:
    using Error::Error;
};

/// An iterative scheme failed to converge within its budget.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared while iterating.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, std::size_t iteration)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t iteration_;
};

class QuadratureError : public Error {
public:
    using Error::Error;
};

/// Bernoulli-Gaussian prior P(x) = (1 - rho) delta(x) + rho N(x; 0, sigma_x2).
struct PriorBG {
    double rho = 0.1;
    double sigma_x2 = 1.0;

    /// Prior second moment Q0.
    double second_moment() const noexcept { return rho * sigma_x2; }

    void validate() const {
        if (!(rho >= 0.0 && rho <= 1.0))
            throw InvalidArgument("PriorBG: rho must lie in [0, 1], got " + std::to_string(rho));
        if (!(sigma_x2 > 0.0) || !std::isfinite(sigma_x2))
            throw InvalidArgument("PriorBG: sigma_x2 must be positive, got " + std::to_string(sigma_x2));
    }
};

}  // namespace ecsr
