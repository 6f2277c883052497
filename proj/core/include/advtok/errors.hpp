#pragma once

#include <stdexcept>
#include <string>

namespace advtok {

/// Malformed or inconsistent input data (dataset, candidate, config files).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
  DataError(const std::string& file, int line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what) {}
};

/// Numerical failure: non-convergent bisection, divergent training, non-finite loss.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace advtok
