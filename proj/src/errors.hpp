#ifndef VCQR_ERRORS_HPP_
#define VCQR_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace vcqr {

// Invalid arguments and broken preconditions use std::invalid_argument.
// The two classes below separate problems with the data itself from
// numerical failures (singular systems, non-convergence), so callers can
// map them to distinct exit codes.

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vcqr

#endif  // VCQR_ERRORS_HPP_
