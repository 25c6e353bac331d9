#pragma once

#include <stdexcept>
#include <string>

namespace alsim {

/// Base for every error raised by the library. `kind()` is a short stable tag
/// used by the CLI diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

#define ALSIM_DEFINE_ERROR(Name, tag)                            \
  class Name : public Error {                                    \
   public:                                                       \
    using Error::Error;                                          \
    const char* kind() const noexcept override { return tag; }   \
  }

ALSIM_DEFINE_ERROR(ConfigError, "config");
ALSIM_DEFINE_ERROR(SelectionError, "selection");
ALSIM_DEFINE_ERROR(TrainingError, "training");
ALSIM_DEFINE_ERROR(InferenceError, "inference");
ALSIM_DEFINE_ERROR(ShapeError, "shape");
ALSIM_DEFINE_ERROR(ValidationError, "validation");
ALSIM_DEFINE_ERROR(ParseError, "parse");
ALSIM_DEFINE_ERROR(IoError, "io");
ALSIM_DEFINE_ERROR(ComparisonError, "comparison");

#undef ALSIM_DEFINE_ERROR

}  // namespace alsim
