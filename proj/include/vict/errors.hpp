#pragma once

#include <stdexcept>
#include <string>

namespace vict {

/// Malformed or unsupported input file content.
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Grid geometry that is invalid or that does not match another grid.
class GeometryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Landmark registration could not be computed.
class RegistrationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or inputs that violate an operation's precondition.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace vict
