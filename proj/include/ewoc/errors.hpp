#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ewoc {

/// Argument outside the mathematical domain of a function (p outside (0,1), beta1 <= 0, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Parameter pair violates a model constraint (rho0 >= theta forces a nonpositive slope).
class ConstraintError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Posterior mass too small to normalize.
class UnderflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation called in the wrong trial phase.
class SequencingError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Recorded data disagrees with what the design prescribes (wrong dose, bad snapshot).
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Optimistic concurrency check failed; carries the stored revision.
class RevisionConflict : public std::runtime_error {
 public:
  RevisionConflict(std::size_t expected, std::size_t current)
      : std::runtime_error("expected revision " + std::to_string(expected) + " but the trial is at revision " +
                           std::to_string(current)),
        current_(current) {}

  std::size_t current() const noexcept { return current_; }

 private:
  std::size_t current_;
};

struct FieldError {
  std::string field;
  std::string message;
};

/// Configuration rejected; carries every violated field, not just the first.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(std::vector<FieldError> errors)
      : std::invalid_argument(summarize(errors)), errors_(std::move(errors)) {}

  const std::vector<FieldError>& errors() const noexcept { return errors_; }

 private:
  static std::string summarize(const std::vector<FieldError>& errors) {
    std::string out = "invalid configuration:";
    for (const auto& e : errors) out += " " + e.field + ": " + e.message + ";";
    return out;
  }

  std::vector<FieldError> errors_;
};

}  // namespace ewoc
