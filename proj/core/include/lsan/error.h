// Copyright 2026 The LSAN Authors.
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

#ifndef LSAN_ERROR_H_
#define LSAN_ERROR_H_

#include <stdexcept>
#include <string>

namespace lsan {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// A caller violated a documented precondition (shapes, lengths, ranges).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error(what) {}
};

// Softmax slice where every entry is masked out.
class DegenerateSliceError : public ContractError {
 public:
  explicit DegenerateSliceError(const std::string& what)
      : ContractError(what) {}
};

// NaN or infinity reached an operation that requires finite input.
class NumericDomainError : public Error {
 public:
  explicit NumericDomainError(const std::string& what) : Error(what) {}
};

class IndexError : public Error {
 public:
  explicit IndexError(const std::string& what) : Error(what) {}
};

// Invalid hyperparameters, unknown keys, inconsistent table sizes.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

// Input data is unusable (too many malformed lines, empty after filtering).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

}  // namespace lsan

#endif  // LSAN_ERROR_H_
