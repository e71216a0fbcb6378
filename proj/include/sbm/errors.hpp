#pragma once

#include <stdexcept>
#include <string>

namespace sbm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument or violated precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Scaling hypotheses could not be certified on the requested grid.
class CertificationError : public Error {
 public:
  using Error::Error;
};

// Quadrature, root finding or inversion did not converge, or produced a
// value that contradicts complete monotonicity.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Process exit statuses shared by the CLI and the Python layer.
enum ExitStatus : int {
  exit_ok = 0,
  exit_verification_failed = 1,
  exit_usage = 2,
  exit_certification_failed = 3,
  exit_nonconvergence = 4,
};

}  // namespace sbm
