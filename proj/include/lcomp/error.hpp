// Copyright 2026 The lcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace lcomp {

// Base for every failure raised by the library. The CLI maps all of these to
// exit code 1 ("data error").
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk data (TensorFile, CurveFile, BitStream, JSON documents).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Invalid numeric argument (sigma <= 0, K out of range, bad dims, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Two objects that must share a support / shape do not.
class MismatchError : public Error {
 public:
  using Error::Error;
};

// A symbol with nonzero probability is coded under a zero-mass model.
class InfiniteRateError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Iterative fitting blew up.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace lcomp
