/*
 * Copyright 2026 The ultr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef ULTR_ERRORS_H_
#define ULTR_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ultr {

// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input or configuration. The CLI maps these to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Syntactically malformed input line.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class EmptyDatasetError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// A NaN or infinity reached a place where it would corrupt state.
class NumericError : public Error {
 public:
  using Error::Error;
};

// An API was used out of order (e.g. backprop without a matching forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// An observation has zero probability under the current bias parameters.
class ZeroProbabilityError : public Error {
 public:
  ZeroProbabilityError(int pos_i, int pos_j, const std::string& what)
      : Error("pair (" + std::to_string(pos_i) + "," + std::to_string(pos_j) +
              "): " + what),
        pos_i_(pos_i),
        pos_j_(pos_j) {}

  int pos_i() const { return pos_i_; }
  int pos_j() const { return pos_j_; }

 private:
  int pos_i_;
  int pos_j_;
};

}  // namespace ultr

#endif  // ULTR_ERRORS_H_
