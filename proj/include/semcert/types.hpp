// Copyright 2026 The semcert Authors
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

#ifndef SEMCERT_TYPES_HPP
#define SEMCERT_TYPES_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace semcert {

/// Error categories. The CLI maps each kind onto a distinct exit code.
enum class ErrorKind {
  domain,        // argument outside a function's mathematical domain
  config,        // invalid configuration or parameters
  io,            // unreadable or unwritable storage
  ledger_invalid,
  replay,
  provider,      // verdict provider failed (generic)
  timeout,
  malformed,     // wire response that does not parse
  id_mismatch,   // response id with no outstanding request
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::ledger_invalid: return "ledger_invalid";
    case ErrorKind::replay: return "replay";
    case ErrorKind::provider: return "provider";
    case ErrorKind::timeout: return "timeout";
    case ErrorKind::malformed: return "malformed";
    case ErrorKind::id_mismatch: return "id_mismatch";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Verdict provider failures (timeouts, protocol violations, refusals).
class ProviderError : public Error {
 public:
  using Error::Error;
};

enum class Verdict : std::uint8_t { assent, neutral, dissent };

inline constexpr std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::assent: return "assent";
    case Verdict::neutral: return "neutral";
    case Verdict::dissent: return "dissent";
  }
  return "neutral";
}

/// Strict parse: exactly one of the three lowercase words.
inline std::optional<Verdict> parse_verdict(std::string_view s) {
  if (s == "assent") return Verdict::assent;
  if (s == "neutral") return Verdict::neutral;
  if (s == "dissent") return Verdict::dissent;
  return std::nullopt;
}

inline constexpr bool decided(Verdict v) { return v != Verdict::neutral; }

/// Public event identifier. Non-empty by construction.
class EventId {
 public:
  EventId() = default;
  explicit EventId(std::string pei) : pei_(std::move(pei)) {
    if (pei_.empty()) throw Error(ErrorKind::domain, "empty event identifier");
  }
  const std::string& str() const noexcept { return pei_; }
  auto operator<=>(const EventId&) const = default;

 private:
  std::string pei_;
};

/// An observable event as presented to agents: identifier plus content.
struct Event {
  EventId id;
  std::string content;
};

/// Certification thresholds.
struct ProtocolParams {
  double tau = 0.05;
  double delta = 0.05;
  double rho_min = 0.10;

  void validate() const {
    if (!(tau >= 0.0 && tau <= 1.0))
      throw Error(ErrorKind::config, "tau must lie in [0,1]");
    if (!(delta > 0.0 && delta < 1.0))
      throw Error(ErrorKind::config, "delta must lie in (0,1)");
    if (!(rho_min >= 0.0 && rho_min <= 1.0))
      throw Error(ErrorKind::config, "rho_min must lie in [0,1]");
  }
  bool operator==(const ProtocolParams&) const = default;
};

}  // namespace semcert

#endif  // SEMCERT_TYPES_HPP
