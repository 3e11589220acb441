// Copyright 2026 The MEST Lab Authors.
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

namespace mest {

/// Failure categories. Each maps one-to-one onto a C API status code.
enum class ErrorKind {
  dimension,    // tensor/layer shape mismatch
  state,        // operation called in the wrong lifecycle state
  numeric,      // non-finite value
  feasibility,  // sparsity target not reachable for the scheme
  encoding,     // value or coordinate not representable in the chosen width
  format,       // malformed file
  config,       // invalid configuration
  io,           // filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

const char* to_string(ErrorKind kind) noexcept;

}  // namespace mest
