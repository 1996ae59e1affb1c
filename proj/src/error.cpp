// error.cpp

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

#include "scoh/error.hpp"

#include <atomic>
#include <iostream>

namespace scoh {

namespace {
std::atomic<bool> g_warnings{true};
}

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kSize: return "size";
    case ErrorKind::kIo: return "I/O";
    case ErrorKind::kGeometry: return "geometry";
    case ErrorKind::kSampling: return "sampling";
    case ErrorKind::kUndefined: return "undefined";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kConfiguration: return "configuration";
    case ErrorKind::kLowActivity: return "low-activity";
    case ErrorKind::kConditioning: return "conditioning";
    case ErrorKind::kNumeric: return "numeric";
  }
  return "unknown";
}

void Warn(const std::string &msg) {
  if (g_warnings.load(std::memory_order_relaxed)) std::cerr << "WARNING: " << msg << "\n";
}

void SetWarningsEnabled(bool enabled) { g_warnings.store(enabled); }

}  // namespace scoh
