#pragma once

#include <stdexcept>
#include <string>

namespace sobi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not line up, or a value outside its documented domain.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Malformed, truncated or unsupported input file.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Eigenvalues too close to be separated (signal subspace or Schur spectrum).
class DegenerateSpectrumError : public Error {
public:
  using Error::Error;
};

/// Iterative eigen/Schur solver ran out of its iteration budget.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

} // namespace sobi
