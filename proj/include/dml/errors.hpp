#pragma once

#include <stdexcept>
#include <string>

namespace dml {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed data, incompatible options, out-of-range arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// The moment equation cannot be solved (mean psi_a is numerically zero).
class IdentificationError : public Error {
 public:
  using Error::Error;
};

// A nuisance learner could not be fitted or used.
class LearnerError : public Error {
 public:
  using Error::Error;
};

}  // namespace dml
