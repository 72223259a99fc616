// Copyright 2026 The LCA Toolkit Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace lca {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorClass {
  kUser = 1,     // bad arguments, missing files, refused overwrite
  kData = 2,     // data invariant violation
  kService = 3,  // external service failure
};

/// Base exception for the toolkit.
class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what)
      : std::runtime_error(what), class_(cls) {}

  ErrorClass error_class() const noexcept { return class_; }

 private:
  ErrorClass class_;
};

class UserError : public Error {
 public:
  explicit UserError(const std::string& what) : Error(ErrorClass::kUser, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorClass::kData, what) {}
};

class ServiceError : public Error {
 public:
  explicit ServiceError(const std::string& what)
      : Error(ErrorClass::kService, what) {}
};

}  // namespace lca
