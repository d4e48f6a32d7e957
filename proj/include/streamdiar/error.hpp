// Copyright 2026 The streamdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace streamdiar {

/// Coarse failure class. The CLI prints it and maps it to an exit code.
enum class ErrorCategory {
  kIo,           // file missing, unreadable, write failure
  kFormat,       // malformed container, bad magic, unparseable line
  kUnsupported,  // valid container, codec or layout we do not handle
  kEmptyInput,   // zero-length audio, too few frames for a window
  kData,         // not enough data / degenerate distribution for training
  kDimension,    // shape mismatch between models and inputs
  kConfig,       // invalid configuration value
  kState,        // operation not valid in the current object state
  kUsage,        // bad command-line usage
};

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kUnsupported: return "unsupported";
    case ErrorCategory::kEmptyInput: return "empty-input";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kDimension: return "dimension";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kState: return "state";
    case ErrorCategory::kUsage: return "usage";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& what) {
  throw Error(category, what);
}

}  // namespace streamdiar
