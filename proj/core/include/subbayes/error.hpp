// Copyright 2026 The subbayes Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SUBBAYES_ERROR_HPP_
#define SUBBAYES_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace subbayes {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Iteration caps, rank deficiency, non-finite values, divergence.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible on-disk artifact.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration or argument.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pipeline phase was asked to run before the phase it depends on.
class MissingArtifactError : public Error {
 public:
  MissingArtifactError(const std::string& phase, const std::string& path)
      : Error("missing prerequisite artifact from phase '" + phase + "': " + path),
        phase_(phase) {}
  const std::string& phase() const noexcept { return phase_; }

 private:
  std::string phase_;
};

}  // namespace subbayes

#endif  // SUBBAYES_ERROR_HPP_
