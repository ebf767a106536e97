#ifndef GRIDPLAN_ERRORS_HPP
#define GRIDPLAN_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gridplan {

/// Malformed input: bad files, violated preconditions, mismatched dimensions.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Correlation requested for a constant (zero-variance) series.
class DegenerateSeriesError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// The optimizer could not produce a usable optimum.
class PlanningError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Upstream artifacts are stale or inconsistent with each other.
class ManifestError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Cost-sharing input violates the cooperation surplus guarantee.
class InconsistencyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace gridplan

#endif
