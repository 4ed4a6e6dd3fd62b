// Copyright 2026 The ToOT Authors. All Rights Reserved.
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

#ifndef TOOT_CORE_ERROR_HPP
#define TOOT_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace toot {

enum class ErrorKind {
  kConfig,
  kUsage,
  kNumeric,
  kParse,
  kValidation,
  kDegenerateMask,
  kUndefined,
  kIo,
  kProtocol,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the core carries a kind; the C API maps kinds
/// one-to-one onto status codes.
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

}  // namespace toot

#endif  // TOOT_CORE_ERROR_HPP
