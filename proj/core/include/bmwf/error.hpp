#pragma once

#include <stdexcept>
#include <string>

namespace bmwf {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDesignFailure = 2,
  kSolverFailure = 3,
  kIoError = 4,
};

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code = ExitCode::kUsage)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Precondition violations: bad configuration, mismatched dimensions.
class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what, ExitCode::kUsage) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what, ExitCode::kIoError) {}
};

/// A binaural measure whose denominator vanishes (zero-power channel).
class DegenerateMeasure : public Error {
 public:
  explicit DegenerateMeasure(const std::string& what) : Error(what, ExitCode::kSolverFailure) {}
};

class SolverError : public Error {
 public:
  SolverError(const std::string& what, int bin = -1)
      : Error(bin >= 0 ? "bin " + std::to_string(bin) + ": " + what : what,
              ExitCode::kSolverFailure),
        bin_(bin) {}

  int bin() const noexcept { return bin_; }

 private:
  int bin_;
};

}  // namespace bmwf
