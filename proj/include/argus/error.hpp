// Copyright 2026 The argus-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace argus {

enum class ErrorKind {
  validation,
  insufficient_pool,
  lookup,
  span,
  dimension,
  transport,
  protocol,
  singular,
  degenerate,
  undefined_metric,
  divergence,
  sweep_failure,
  dependency,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::insufficient_pool: return "insufficient-pool";
    case ErrorKind::lookup: return "lookup";
    case ErrorKind::span: return "span";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::transport: return "transport";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::singular: return "singular";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::undefined_metric: return "undefined-metric";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::sweep_failure: return "sweep-failure";
    case ErrorKind::dependency: return "dependency";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the CLI
/// exit-code mapping) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace argus
