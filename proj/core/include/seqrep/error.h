// seqrep/error.h

// Copyright 2026  seqrep authors
//
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

#ifndef SEQREP_ERROR_H_
#define SEQREP_ERROR_H_

#include <stdexcept>
#include <string>

namespace seqrep {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

/// Dimension or shape disagreement between operands.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string &what) : Error(what) {}
};

/// NaN/Inf produced somewhere in a computation, or an infeasible quantity
/// (e.g. a CTC transcript that no alignment can produce).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string &what) : Error(what) {}
};

/// Invalid configuration or argument value.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string &what) : Error(what) {}
};

/// File missing, truncated, or with a bad header.
class IoError : public Error {
 public:
  explicit IoError(const std::string &what) : Error(what) {}
};

#define SEQREP_CHECK_SHAPE(cond, msg)                            \
  do {                                                           \
    if (!(cond)) throw ::seqrep::ShapeError(std::string(msg));   \
  } while (0)

#define SEQREP_CHECK_CONFIG(cond, msg)                           \
  do {                                                           \
    if (!(cond)) throw ::seqrep::ConfigError(std::string(msg));  \
  } while (0)

}  // namespace seqrep

#endif  // SEQREP_ERROR_H_
