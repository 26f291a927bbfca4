// Copyright 2026 The GeoConv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace geoconv {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: wrong dimensions, malformed files, invalid configuration.
/// The CLI maps this family to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: solver non-convergence, degenerate geometry found while
/// computing, diverging training. The CLI maps this family to exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class UnsupportedFaceError : public ParseError {
 public:
  using ParseError::ParseError;
};

class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class GeometryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UnsupportedArchitectureError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PrecomputeIncompleteError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DegenerateClassError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, double residual, int iterations)
      : NumericalError(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

class TrainingFailure : public NumericalError {
 public:
  TrainingFailure(const std::string& what, int epoch)
      : NumericalError(what + " (epoch " + std::to_string(epoch) + ")"),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

}  // namespace geoconv
