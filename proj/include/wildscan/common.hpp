/* Copyright 2026 The Wildscan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace wildscan {

// Base of every error the library throws. The service layer maps the
// subclasses onto HTTP status codes, the CLI onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Schema or invariant violation. `field` is a dotted path such as
// "annotations[3].box"; `index` is the offending record when there is one.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, std::optional<std::size_t> index,
                  const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)), index_(index) {}

  const std::string& field() const { return field_; }
  std::optional<std::size_t> index() const { return index_; }

 private:
  std::string field_;
  std::optional<std::size_t> index_;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

class ConflictError : public Error {
 public:
  using Error::Error;
};

class UnavailableError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or other numerical failure during optimisation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Exact half-up rounding of numerator/denominator expressed as a percentage
// with two decimals, e.g. (126, 138) -> "91.30". Denominator must be > 0.
std::string percent_half_up(std::int64_t numerator, std::int64_t denominator);

// Half-up rounding of a real value to `decimals` places. A relative nudge of
// 1e-9 absorbs binary representation error so that 0.7115 * 100 renders as
// 71.15 rather than 71.14.
std::string fixed_half_up(double value, int decimals);

// Shortest decimal text that parses back to the same double.
std::string shortest_repr(double value);

// Lower-case hex SHA-256 digest.
std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_hex(const std::string& text);

}  // namespace wildscan
