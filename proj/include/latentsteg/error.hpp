#pragma once

#include <stdexcept>
#include <string>

namespace lsteg {

enum class ErrorCode {
  InvalidArgument = 1,
  DimensionMismatch,
  DegenerateBasis,
  Config,
  Io,
  Channel,
  Unattainable,
  NoConvergence,
};

/// Every failure raised by the core library. The C API maps `code()` onto
/// its status enum one-to-one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lsteg
