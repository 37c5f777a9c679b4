#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace recal {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument outside its mathematical domain (probability not in [0,1],
// outcome not binary, dimension mismatch, non-finite covariate).
class DomainError : public Error {
 public:
  using Error::Error;
};

// step/observe called out of order.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// A statistic was requested before any observation was recorded.
class EmptyStateError : public Error {
 public:
  using Error::Error;
};

class FixedPointError : public Error {
 public:
  FixedPointError(double residual, std::size_t iterations)
      : Error("stationary distribution did not converge after " +
              std::to_string(iterations) +
              " iterations (residual " + std::to_string(residual) + ")"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  std::size_t iterations_;
};

// Malformed stream, transcript, snapshot, or report text. line() is 1-based;
// 0 when the error is not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace recal
