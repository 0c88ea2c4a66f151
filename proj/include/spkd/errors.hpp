// include/spkd/errors.hpp

// Copyright 2026  The spkd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef SPKD_ERRORS_HPP_
#define SPKD_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace spkd {

/// Base of every error raised by the library. The CLI maps ConfigError and
/// its relatives to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define SPKD_DEFINE_ERROR(Name, Base)        \
  class Name : public Base {                 \
   public:                                   \
    explicit Name(const std::string& what)   \
        : Base(#Name ": " + what) {}         \
  }

// Input validation failures (exit code 1 at the CLI).
class ValidationError : public Error {
 public:
  using Error::Error;
};

SPKD_DEFINE_ERROR(ConfigError, ValidationError);
SPKD_DEFINE_ERROR(ManifestError, ValidationError);

// Audio.
SPKD_DEFINE_ERROR(SilentInput, Error);
SPKD_DEFINE_ERROR(RateMismatch, Error);
SPKD_DEFINE_ERROR(TooShort, Error);
SPKD_DEFINE_ERROR(IoError, Error);

// Units.
SPKD_DEFINE_ERROR(InsufficientData, Error);

// Differentiation core and networks.
SPKD_DEFINE_ERROR(ShapeError, Error);
SPKD_DEFINE_ERROR(NumericsError, Error);
SPKD_DEFINE_ERROR(StateError, Error);
SPKD_DEFINE_ERROR(LabelError, Error);
SPKD_DEFINE_ERROR(UnitError, Error);

// Persistence.
SPKD_DEFINE_ERROR(FormatError, Error);

// Evaluation.
SPKD_DEFINE_ERROR(StratificationError, Error);

#undef SPKD_DEFINE_ERROR

}  // namespace spkd

#endif  // SPKD_ERRORS_HPP_
