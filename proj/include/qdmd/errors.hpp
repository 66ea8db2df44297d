#pragma once

#include <stdexcept>
#include <string>

namespace qdmd {

// Base of every error the library throws. The C API maps each subclass onto
// its own status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace qdmd
