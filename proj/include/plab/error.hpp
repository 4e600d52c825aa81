#pragma once

#include <stdexcept>
#include <string>

namespace plab {

enum class ErrorKind {
  invalid_argument,
  dimension_mismatch,
  format,
  io,
  degenerate_gradient,
  non_finite,
  provenance,
};

const char* to_string(ErrorKind kind) noexcept;

/// Library error. `kind` lets the CLI map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by make_perturbation when the loss gradient w.r.t. the input vanishes.
class DegenerateGradient : public Error {
 public:
  DegenerateGradient(std::size_t index, const std::string& what)
      : Error(ErrorKind::degenerate_gradient, what), index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Raised by the trainer when the loss stops being finite.
class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::size_t step, const std::string& what)
      : Error(ErrorKind::non_finite, what), step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace plab
