#pragma once

#include <stdexcept>
#include <string>

namespace resonant {

// Root of every error the library throws. Subclasses name the failure kind so
// callers (and the CLI exit-code mapping) can dispatch on type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define RESONANT_DEFINE_ERROR(Name)        \
  class Name : public Error {              \
   public:                                 \
    using Error::Error;                    \
  }

RESONANT_DEFINE_ERROR(FormatError);
RESONANT_DEFINE_ERROR(UnsupportedError);
RESONANT_DEFINE_ERROR(EmptyError);
RESONANT_DEFINE_ERROR(IoError);
RESONANT_DEFINE_ERROR(ManifestError);
RESONANT_DEFINE_ERROR(NoOnsetError);
RESONANT_DEFINE_ERROR(SilentSegmentError);
RESONANT_DEFINE_ERROR(ArgumentError);
RESONANT_DEFINE_ERROR(ShapeError);
RESONANT_DEFINE_ERROR(StateError);
RESONANT_DEFINE_ERROR(CompatibilityError);
RESONANT_DEFINE_ERROR(ConfigError);

#undef RESONANT_DEFINE_ERROR

}  // namespace resonant
