// Copyright 2026 The Bimodal Stereo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace bimodal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that violate a documented precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// Minimal samples or point sets whose linear system is rank deficient.
class DegenerateSample : public Error {
 public:
  using Error::Error;
};

class RegistrationFailure : public Error {
 public:
  using Error::Error;
};

class ReflectionError : public Error {
 public:
  using Error::Error;
};

class NotASimilarity : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace bimodal
