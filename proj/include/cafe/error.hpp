/* Copyright 2026 The CAFe Segmentation Authors. All Rights Reserved.

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

#include <stdexcept>
#include <string>

namespace cafe {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or image dimensions do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// User-facing input failed a precondition (empty template set, bad size, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A vector that has to be normalized has zero magnitude.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Invalid run configuration. Carries a location prefix when parsed from file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A pluggable component returned something violating its interface contract.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Training diverged or produced a non-finite value.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Metric cannot be computed (e.g. every class IoU undefined).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable file.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cafe
