#pragma once

#include <stdexcept>
#include <string>

namespace prfrl {

// Process exit codes used by the command line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitIo = 2,
  kExitNumerical = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return kExitUsage; }
};

// Invalid arguments, malformed records and contract violations.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kExitIo; }
};

// Non-finite losses or gradients, failed gradient checks.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return kExitNumerical; }
};

}  // namespace prfrl
