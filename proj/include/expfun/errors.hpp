#pragma once

#include <stdexcept>

namespace expfun {

// Bad parameter values (construction/config time).
struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Evaluation outside the admissible argument range of an exponent/transform.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Monte Carlo machinery failed hard (iteration caps, impossible grids, ...).
struct SimulationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An estimator could not produce a trustworthy value (degenerate fits, ...).
struct EstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace expfun
