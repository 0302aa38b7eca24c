#pragma once

#include <stdexcept>
#include <string>

namespace nanonmr {

/// Raised when a (geometry, m) pair has no closed-form long-time constant.
struct NoClosedForm : std::domain_error {
  using std::domain_error::domain_error;
};

/// Quadrature or root finding failed to reach its tolerance.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid user-facing configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A simulation left its admissible state (escaped particle, energy blow-up).
struct IntegrityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Least-squares fit requested on data it cannot represent.
struct FitDomainError : std::domain_error {
  using std::domain_error::domain_error;
};

}  // namespace nanonmr
