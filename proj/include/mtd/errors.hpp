#pragma once

#include <stdexcept>
#include <string>

namespace mtd {

/// Malformed or inconsistent input data (bad files, invalid parameters).
/// Mapped to process exit code 2 by the CLI.
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside a solver (non-finite cost, degenerate update,
/// exhausted placement attempts). Mapped to exit code 3 by the CLI.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mtd
