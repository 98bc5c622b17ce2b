#pragma once

#include <stdexcept>
#include <string>

namespace openbath {

// Precondition violated by a caller-supplied value.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A numerical procedure failed to reach its tolerance.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what, double estimate = 0.0, double error_bound = 0.0)
        : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    double estimate_;
    double error_bound_;
};

// Adaptive integrator gave up: step size fell below the floor.
class StiffnessError : public NumericalError {
public:
    StiffnessError(const std::string& what, double time_reached)
        : NumericalError(what, time_reached, 0.0), time_reached_(time_reached) {}

    double time_reached() const noexcept { return time_reached_; }

private:
    double time_reached_;
};

// Requested problem does not fit the configured memory budget.
class CapacityError : public std::length_error {
public:
    using std::length_error::length_error;
};

} // namespace openbath
