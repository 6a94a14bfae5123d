#pragma once

#include <stdexcept>
#include <string>

namespace mapjoin {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on user-supplied data does not hold.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// A referenced pose or feature is not available in the map at hand.
class MissingEntityError : public Error {
 public:
  using Error::Error;
};

/// Rotation-angle extraction hit the Euler singularity (|pitch| near pi/2).
class DegenerateRotationError : public Error {
 public:
  using Error::Error;
};

/// Frame-defining features are coincident or collinear.
class DegenerateFrameError : public Error {
 public:
  using Error::Error;
};

/// The common features of two maps do not span a usable frame.
class DegenerateCommonSetError : public Error {
 public:
  using Error::Error;
};

/// A linear system that must be positive definite is not.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// The block to be marginalized out is not invertible.
class SingularMarginalizationError : public Error {
 public:
  using Error::Error;
};

/// Two maps are in different frames and must be re-framed before joining.
class FrameMismatchError : public Error {
 public:
  using Error::Error;
};

/// Two maps do not share enough common elements to ever be joined.
class NotJoinableError : public Error {
 public:
  using Error::Error;
};

/// The Gauss-Newton iteration ran out of iterations. Carries no result; the
/// solvers report non-convergence through a flag instead of throwing this,
/// except where a converged result is a hard precondition.
class NotConvergedError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input, with the 1-based line number where parsing stopped.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, int line, const std::string& what)
      : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace mapjoin
