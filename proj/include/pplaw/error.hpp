/*
Copyright 2026 The pplaw Authors. All rights reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#pragma once

#include <stdexcept>
#include <string>

namespace pplaw {

// Base of everything the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed files, records, or arguments supplied by the caller.
class InputError : public Error {
 public:
  using Error::Error;
};

// Numeric domain violations: non-positive law inputs, overflow, empty stats.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A selection problem with no feasible answer under the given budget.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace pplaw
