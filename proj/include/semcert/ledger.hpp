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

#ifndef SEMCERT_LEDGER_HPP
#define SEMCERT_LEDGER_HPP

// Append-only hash-chained ledger of witnessed tests.
//
// Each entry's digest is SHA-256 over a canonical JSON rendering of
// (agent, epoch, pei, prev_hash, seq, term, verdict): keys sorted, no
// whitespace, digests as lowercase hex. On disk the ledger is JSON Lines with
// a fixed field order; a line that does not reproduce byte-for-byte from its
// parsed fields counts as corrupt.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semcert/digest.hpp"
#include "semcert/types.hpp"

namespace semcert {

struct WitnessedTest {
  std::uint64_t seq = 0;
  std::uint64_t epoch = 0;
  std::string agent;
  EventId event;
  std::string term;
  Verdict verdict = Verdict::neutral;
  Digest prev_hash{};
  Digest entry_hash{};

  bool operator==(const WitnessedTest&) const = default;
};

/// What a caller supplies to append; the ledger fills in seq and digests.
struct TestPayload {
  std::string agent;
  EventId event;
  std::string term;
  Verdict verdict = Verdict::neutral;
  std::uint64_t epoch = 0;
};

namespace detail {

inline bool plain_ascii(std::string_view s) {
  for (unsigned char c : s)
    if (c < 0x20 || c >= 0x7F || c == '"' || c == '\\') return false;
  return true;
}

/// Appends s as a JSON string literal, byte-identical to nlohmann's dump().
inline void append_json_string(std::string& out, std::string_view s) {
  if (plain_ascii(s)) {
    out += '"';
    out += s;
    out += '"';
    return;
  }
  try {
    out += nlohmann::json(std::string(s)).dump();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::domain, "ledger strings must be valid UTF-8");
  }
}

}  // namespace detail

/// Canonical payload digested into entry_hash.
inline std::string canonical_payload(const WitnessedTest& e) {
  std::string s;
  s.reserve(96 + 64 + e.agent.size() + e.term.size() + e.event.str().size());
  s += "{\"agent\":";
  detail::append_json_string(s, e.agent);
  s += ",\"epoch\":";
  s += std::to_string(e.epoch);
  s += ",\"pei\":";
  detail::append_json_string(s, e.event.str());
  s += ",\"prev_hash\":\"";
  s += to_hex(e.prev_hash);
  s += "\",\"seq\":";
  s += std::to_string(e.seq);
  s += ",\"term\":";
  detail::append_json_string(s, e.term);
  s += ",\"verdict\":\"";
  s += to_string(e.verdict);
  s += "\"}";
  return s;
}

inline Digest compute_entry_hash(const WitnessedTest& e) { return sha256(canonical_payload(e)); }

/// One JSON Lines record, without the trailing newline.
inline std::string to_jsonl(const WitnessedTest& e) {
  std::string s;
  s.reserve(256);
  s += "{\"seq\":";
  s += std::to_string(e.seq);
  s += ",\"epoch\":";
  s += std::to_string(e.epoch);
  s += ",\"agent\":";
  detail::append_json_string(s, e.agent);
  s += ",\"pei\":";
  detail::append_json_string(s, e.event.str());
  s += ",\"term\":";
  detail::append_json_string(s, e.term);
  s += ",\"verdict\":\"";
  s += to_string(e.verdict);
  s += "\",\"prev_hash\":\"";
  s += to_hex(e.prev_hash);
  s += "\",\"entry_hash\":\"";
  s += to_hex(e.entry_hash);
  s += "\"}";
  return s;
}

/// Strict parse of one record. Returns nullopt for anything that is not the
/// exact canonical rendering of a well-formed entry.
inline std::optional<WitnessedTest> parse_jsonl(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (!j.is_object() || j.size() != 8) return std::nullopt;
  try {
    const auto& seq = j.at("seq");
    const auto& epoch = j.at("epoch");
    if (!seq.is_number_unsigned() || !epoch.is_number_unsigned()) return std::nullopt;
    WitnessedTest e;
    e.seq = seq.get<std::uint64_t>();
    e.epoch = epoch.get<std::uint64_t>();
    e.agent = j.at("agent").get<std::string>();
    auto pei = j.at("pei").get<std::string>();
    if (pei.empty()) return std::nullopt;
    e.event = EventId(std::move(pei));
    e.term = j.at("term").get<std::string>();
    auto v = parse_verdict(j.at("verdict").get<std::string>());
    auto ph = from_hex(j.at("prev_hash").get<std::string>());
    auto eh = from_hex(j.at("entry_hash").get<std::string>());
    if (!v || !ph || !eh) return std::nullopt;
    e.verdict = *v;
    e.prev_hash = *ph;
    e.entry_hash = *eh;
    if (to_jsonl(e) != line) return std::nullopt;
    return e;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

struct VerifyResult {
  std::optional<std::uint64_t> invalid_at;  // first violating position

  bool valid() const { return !invalid_at.has_value(); }
};

/// Checks seq continuity, the prev_hash links, and every entry_hash.
inline VerifyResult verify_chain(std::span<const WitnessedTest> entries) {
  Digest prev{};
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.seq != i || e.prev_hash != prev || compute_entry_hash(e) != e.entry_hash)
      return {i};
    prev = e.entry_hash;
  }
  return {};
}

namespace detail {

struct ParsedFile {
  std::vector<WitnessedTest> entries;
  std::optional<std::uint64_t> bad_line;  // first line that failed to parse
};

inline ParsedFile read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open ledger: " + path.string());
  ParsedFile out;
  std::string line;
  std::uint64_t n = 0;
  while (std::getline(in, line)) {
    auto e = parse_jsonl(line);
    if (!e) {
      out.bad_line = n;
      return out;
    }
    out.entries.push_back(std::move(*e));
    ++n;
  }
  if (in.bad()) throw Error(ErrorKind::io, "read failure on ledger: " + path.string());
  return out;
}

}  // namespace detail

/// Verifies a ledger file. I/O failures throw; corruption is reported as
/// invalid_at with the position of the first bad line.
inline VerifyResult verify_file(const std::filesystem::path& path) {
  auto parsed = detail::read_jsonl(path);
  auto chain = verify_chain(parsed.entries);
  if (!chain.valid()) return chain;
  if (parsed.bad_line) return {parsed.bad_line};
  return {};
}

/// In-memory ledger with an optional JSON Lines file behind it.
///
/// Single writer: append() must be externally serialized. Readers take
/// entries() or snapshot(), which never change under them except by growth.
class Ledger {
 public:
  Ledger() = default;
  Ledger(Ledger&&) noexcept = default;
  Ledger& operator=(Ledger&&) noexcept = default;
  Ledger(const Ledger&) = delete;
  Ledger& operator=(const Ledger&) = delete;

  /// Loads and verifies an existing file (or starts an empty one) and keeps
  /// it open for appends.
  static Ledger open(const std::filesystem::path& path) {
    Ledger l = std::filesystem::exists(path) ? load(path) : Ledger{};
    l.sink_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::app);
    if (!*l.sink_) throw Error(ErrorKind::io, "cannot open ledger for append: " + path.string());
    return l;
  }

  /// Read-only load of a verified file; the result has no file attached.
  static Ledger load(const std::filesystem::path& path) {
    auto parsed = detail::read_jsonl(path);
    auto chain = verify_chain(parsed.entries);
    auto bad = chain.invalid_at ? chain.invalid_at : parsed.bad_line;
    if (bad)
      throw Error(ErrorKind::ledger_invalid, "ledger chain invalid at seq " + std::to_string(*bad));
    Ledger l;
    l.entries_ = std::move(parsed.entries);
    return l;
  }

  std::uint64_t append(const TestPayload& p) {
    WitnessedTest e;
    e.seq = entries_.size();
    e.epoch = p.epoch;
    e.agent = p.agent;
    e.event = p.event;
    e.term = p.term;
    e.verdict = p.verdict;
    e.prev_hash = entries_.empty() ? Digest{} : entries_.back().entry_hash;
    e.entry_hash = compute_entry_hash(e);
    if (sink_) {
      std::string line = to_jsonl(e);
      line += '\n';
      sink_->write(line.data(), static_cast<std::streamsize>(line.size()));
      sink_->flush();
      if (!*sink_) throw Error(ErrorKind::io, "ledger append failed");
    }
    entries_.push_back(std::move(e));
    return entries_.back().seq;
  }

  std::span<const WitnessedTest> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const WitnessedTest& operator[](std::size_t i) const { return entries_[i]; }

  /// Copy of the current contents, safe to hand to another thread.
  std::vector<WitnessedTest> snapshot() const { return entries_; }

  /// Writes the whole ledger to path (overwriting).
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write ledger: " + path.string());
    for (const auto& e : entries_) out << to_jsonl(e) << '\n';
    if (!out) throw Error(ErrorKind::io, "write failure on ledger: " + path.string());
  }

  static Ledger from_entries(std::vector<WitnessedTest> entries) {
    Ledger l;
    l.entries_ = std::move(entries);
    return l;
  }

 private:
  std::vector<WitnessedTest> entries_;
  std::unique_ptr<std::ofstream> sink_;
};

struct LedgerQuery {
  std::optional<std::string> term;
  std::optional<std::string> agent;
  std::optional<std::pair<std::uint64_t, std::uint64_t>> epochs;  // inclusive
};

inline bool matches(const WitnessedTest& e, const LedgerQuery& q) {
  if (q.term && e.term != *q.term) return false;
  if (q.agent && e.agent != *q.agent) return false;
  if (q.epochs && (e.epoch < q.epochs->first || e.epoch > q.epochs->second)) return false;
  return true;
}

inline std::vector<WitnessedTest> query(std::span<const WitnessedTest> entries,
                                        const LedgerQuery& q = {}) {
  std::vector<WitnessedTest> out;
  for (const auto& e : entries)
    if (matches(e, q)) out.push_back(e);
  return out;
}

inline std::vector<WitnessedTest> query(const Ledger& l, const LedgerQuery& q = {}) {
  return query(l.entries(), q);
}

}  // namespace semcert

#endif  // SEMCERT_LEDGER_HPP
