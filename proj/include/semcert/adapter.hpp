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

#ifndef SEMCERT_ADAPTER_HPP
#define SEMCERT_ADAPTER_HPP

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "semcert/certification.hpp"
#include "semcert/simagents.hpp"

namespace semcert::adapter {

// Wire format -----------------------------------------------------------------

struct VerdictRequest {
  std::uint64_t id = 0;
  std::string term;
  std::string pei;
  std::string content;
};

struct VerdictResponse {
  std::uint64_t id = 0;
  Verdict verdict = Verdict::neutral;
  std::optional<std::string> rationale;
};

inline std::string encode_request(const VerdictRequest& r) {
  return nlohmann::json{{"id", r.id}, {"term", r.term}, {"pei", r.pei}, {"content", r.content}}
      .dump();
}

inline VerdictRequest decode_request(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (!j.is_object() || !j.contains("id") || !j["id"].is_number_unsigned() ||
      !j.contains("term") || !j["term"].is_string() || !j.contains("pei") ||
      !j["pei"].is_string() || !j.contains("content") || !j["content"].is_string())
    throw ProviderError(ErrorKind::malformed, "malformed request: " + std::string(line));
  return {j["id"].get<std::uint64_t>(), j["term"].get<std::string>(), j["pei"].get<std::string>(),
          j["content"].get<std::string>()};
}

inline std::string encode_response(const VerdictResponse& r) {
  nlohmann::json j{{"id", r.id}, {"verdict", std::string(to_string(r.verdict))}};
  if (r.rationale) j["rationale"] = *r.rationale;
  return j.dump();
}

/// Strict: an object with an unsigned integer id and one of the three verdict
/// words. An optional string rationale is kept; other keys are ignored.
inline VerdictResponse decode_response(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  const auto bad = [&](const std::string& why) {
    return ProviderError(ErrorKind::malformed, "malformed response (" + why + "): " +
                                                   std::string(line.substr(0, 200)));
  };
  if (!j.is_object()) throw bad("not a JSON object");
  if (!j.contains("id") || !j["id"].is_number_unsigned()) throw bad("missing or invalid id");
  if (!j.contains("verdict") || !j["verdict"].is_string()) throw bad("missing verdict");
  auto v = parse_verdict(j["verdict"].get_ref<const std::string&>());
  if (!v) throw bad("unknown verdict");
  VerdictResponse r{j["id"].get<std::uint64_t>(), *v, std::nullopt};
  if (j.contains("rationale") && j["rationale"].is_string())
    r.rationale = j["rationale"].get<std::string>();
  return r;
}

// Channels --------------------------------------------------------------------

/// Bidirectional newline-delimited text stream.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Next line without its terminator, or nullopt if none arrives in time.
  virtual std::optional<std::string> recv_line(std::chrono::milliseconds timeout) = 0;
};

namespace detail {

/// Buffered line reader/writer over a pair of file descriptors.
class FdLines {
 public:
  FdLines(int read_fd, int write_fd, bool socket) : rfd_(read_fd), wfd_(write_fd), socket_(socket) {}

  void send(const std::string& line) {
    std::string buf = line;
    buf.push_back('\n');
    std::size_t off = 0;
    while (off < buf.size()) {
      ssize_t n = socket_ ? ::send(wfd_, buf.data() + off, buf.size() - off, MSG_NOSIGNAL)
                          : ::write(wfd_, buf.data() + off, buf.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ProviderError(ErrorKind::provider,
                            std::string("agent channel write failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::optional<std::string> recv(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto pos = buf_.find('\n'); pos != std::string::npos) {
        std::string line = buf_.substr(0, pos);
        buf_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      if (eof_) throw ProviderError(ErrorKind::provider, "agent closed its output stream");
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return std::nullopt;
      pollfd p{rfd_, POLLIN, 0};
      int rc = ::poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProviderError(ErrorKind::provider, std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) return std::nullopt;
      char chunk[4096];
      ssize_t n = ::read(rfd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw ProviderError(ErrorKind::provider, std::string("read failed: ") + std::strerror(errno));
      }
      if (n == 0)
        eof_ = true;
      else
        buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int rfd_;
  int wfd_;
  bool socket_;
  bool eof_ = false;
  std::string buf_;
};

}  // namespace detail

/// Shell-like argv split: whitespace separates, single and double quotes group,
/// backslash escapes the next character outside single quotes.
inline std::vector<std::string> split_argv(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  bool have = false;
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char ch = s[i];
    if (quote) {
      if (ch == quote) {
        quote = 0;
      } else if (ch == '\\' && quote == '"' && i + 1 < s.size()) {
        cur.push_back(s[++i]);
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '\'' || ch == '"') {
      quote = ch;
      have = true;
    } else if (ch == '\\' && i + 1 < s.size()) {
      cur.push_back(s[++i]);
      have = true;
    } else if (ch == ' ' || ch == '\t') {
      if (have) out.push_back(std::move(cur));
      cur.clear();
      have = false;
    } else {
      cur.push_back(ch);
      have = true;
    }
  }
  if (quote) throw Error(ErrorKind::config, "unterminated quote in command: " + std::string(s));
  if (have) out.push_back(std::move(cur));
  return out;
}

/// Child process speaking the protocol on its stdin/stdout. Stderr is inherited.
class ProcessChannel final : public LineChannel {
 public:
  explicit ProcessChannel(std::vector<std::string> argv) {
    if (argv.empty()) throw Error(ErrorKind::config, "empty agent command");
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2], from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0)
      throw Error(ErrorKind::io, std::string("pipe: ") + std::strerror(errno));
    if (::pipe2(from_child, O_CLOEXEC) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw Error(ErrorKind::io, std::string("pipe: ") + std::strerror(errno));
    }
    std::vector<char*> cargv;
    for (auto& a : argv) cargv.push_back(a.data());
    cargv.push_back(nullptr);
    pid_ = ::fork();
    if (pid_ < 0) throw Error(ErrorKind::io, std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::execvp(cargv[0], cargv.data());
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    wfd_ = to_child[1];
    rfd_ = from_child[0];
    lines_ = std::make_unique<detail::FdLines>(rfd_, wfd_, false);
  }

  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  ~ProcessChannel() override {
    if (wfd_ >= 0) ::close(wfd_);
    if (rfd_ >= 0) ::close(rfd_);
    if (pid_ <= 0) return;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }

  void send_line(const std::string& line) override { lines_->send(line); }
  std::optional<std::string> recv_line(std::chrono::milliseconds t) override {
    return lines_->recv(t);
  }

 private:
  pid_t pid_ = -1;
  int wfd_ = -1;
  int rfd_ = -1;
  std::unique_ptr<detail::FdLines> lines_;
};

/// TCP client connection to an agent server.
class TcpChannel final : public LineChannel {
 public:
  TcpChannel(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
      throw ProviderError(ErrorKind::provider,
                          "cannot resolve " + host + ":" + port + ": " + ::gai_strerror(rc));
    for (auto* ai = res; ai; ai = ai->ai_next) {
      int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw ProviderError(ErrorKind::provider, "cannot connect to " + host + ":" + port);
    lines_ = std::make_unique<detail::FdLines>(fd_, fd_, true);
  }

  TcpChannel(const TcpChannel&) = delete;
  TcpChannel& operator=(const TcpChannel&) = delete;
  ~TcpChannel() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send_line(const std::string& line) override { lines_->send(line); }
  std::optional<std::string> recv_line(std::chrono::milliseconds t) override {
    return lines_->recv(t);
  }

 private:
  int fd_ = -1;
  std::unique_ptr<detail::FdLines> lines_;
};

/// In-process channel: each sent line is handed to a handler whose returned
/// lines become readable. Used to script protocol behaviour in tests.
class MemoryChannel final : public LineChannel {
 public:
  using Handler = std::function<std::vector<std::string>(const std::string&)>;
  explicit MemoryChannel(Handler h) : handler_(std::move(h)) {}

  void send_line(const std::string& line) override {
    for (auto& out : handler_(line)) pending_.push_back(std::move(out));
  }
  std::optional<std::string> recv_line(std::chrono::milliseconds) override {
    if (pending_.empty()) return std::nullopt;
    auto line = std::move(pending_.front());
    pending_.pop_front();
    return line;
  }

 private:
  Handler handler_;
  std::deque<std::string> pending_;
};

// Providers ---------------------------------------------------------------------

struct ExternalOptions {
  std::chrono::milliseconds timeout{30'000};  // per verdict
};

/// VerdictProvider speaking the line protocol over a channel. One request is in
/// flight at a time through verdict(); verdicts() pipelines a batch and accepts
/// responses in any order.
class ExternalProvider final : public VerdictProvider {
 public:
  ExternalProvider(std::string id, std::unique_ptr<LineChannel> channel, ExternalOptions opts = {})
      : id_(std::move(id)), channel_(std::move(channel)), opts_(opts) {}

  const std::string& id() const override { return id_; }

  Verdict verdict(std::string_view term, const Event& event, std::uint64_t /*epoch*/) override {
    return verdicts(term, std::span<const Event>(&event, 1)).front();
  }

  std::vector<Verdict> verdicts(std::string_view term, std::span<const Event> events) {
    std::map<std::uint64_t, std::size_t> outstanding;
    for (std::size_t i = 0; i < events.size(); ++i) {
      const std::uint64_t rid = next_id_++;
      outstanding[rid] = i;
      channel_->send_line(
          encode_request({rid, std::string(term), events[i].id.str(), events[i].content}));
    }
    std::vector<Verdict> out(events.size(), Verdict::neutral);
    while (!outstanding.empty()) {
      auto line = channel_->recv_line(opts_.timeout);
      if (!line) {
        for (const auto& [rid, i] : outstanding) abandoned_.insert(rid);
        throw ProviderError(ErrorKind::timeout,
                            "agent " + id_ + " timed out after " +
                                std::to_string(opts_.timeout.count()) + " ms");
      }
      VerdictResponse r;
      try {
        r = decode_response(*line);
      } catch (const ProviderError&) {
        for (const auto& [rid, i] : outstanding) abandoned_.insert(rid);
        throw;
      }
      if (abandoned_.erase(r.id)) continue;  // late answer to a request already failed
      auto it = outstanding.find(r.id);
      if (it == outstanding.end()) {
        for (const auto& [rid, i] : outstanding) abandoned_.insert(rid);
        throw ProviderError(ErrorKind::id_mismatch, "agent " + id_ + " answered unknown request id " +
                                                        std::to_string(r.id));
      }
      out[it->second] = r.verdict;
      if (r.rationale) last_rationale_ = *r.rationale;
      outstanding.erase(it);
    }
    return out;
  }

  const std::string& last_rationale() const { return last_rationale_; }

 private:
  std::string id_;
  std::unique_ptr<LineChannel> channel_;
  ExternalOptions opts_;
  std::uint64_t next_id_ = 1;
  std::set<std::uint64_t> abandoned_;
  std::string last_rationale_;
};

/// Recorded verdict table: term -> pei -> verdict, with a fallback.
struct VerdictTable {
  std::string agent;
  Verdict fallback = Verdict::neutral;
  std::map<std::string, std::map<std::string, Verdict>> verdicts;

  Verdict lookup(std::string_view term, const std::string& pei) const {
    auto t = verdicts.find(std::string(term));
    if (t == verdicts.end()) return fallback;
    auto v = t->second.find(pei);
    return v == t->second.end() ? fallback : v->second;
  }
};

inline void to_json(nlohmann::json& j, const VerdictTable& t) {
  nlohmann::json v = nlohmann::json::object();
  for (const auto& [term, m] : t.verdicts)
    for (const auto& [pei, verdict] : m) v[term][pei] = std::string(to_string(verdict));
  j = nlohmann::json{{"agent", t.agent}, {"default", std::string(to_string(t.fallback))},
                     {"verdicts", v}};
}

inline void from_json(const nlohmann::json& j, VerdictTable& t) {
  const auto parse = [](const nlohmann::json& s) {
    auto v = parse_verdict(s.get<std::string>());
    if (!v) throw Error(ErrorKind::config, "verdict table has invalid verdict " + s.dump());
    return *v;
  };
  j.at("agent").get_to(t.agent);
  t.fallback = j.contains("default") ? parse(j.at("default")) : Verdict::neutral;
  t.verdicts.clear();
  for (const auto& [term, m] : j.at("verdicts").items())
    for (const auto& [pei, v] : m.items()) t.verdicts[term][pei] = parse(v);
}

/// In-process provider over a VerdictTable.
class TableProvider final : public VerdictProvider {
 public:
  explicit TableProvider(VerdictTable t) : table_(std::move(t)) {}
  const std::string& id() const override { return table_.agent; }
  Verdict verdict(std::string_view term, const Event& event, std::uint64_t) override {
    return table_.lookup(term, event.id.str());
  }

 private:
  VerdictTable table_;
};

// Adapter specs ---------------------------------------------------------------

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorKind::config, "invalid JSON in " + path.string());
  return j;
}

/// `sim:<policy-file>`, `cmd:<argv>`, or `tcp:<host:port>`. Simulated agents
/// take their id from the policy file; external ones use `default_id`.
inline std::unique_ptr<VerdictProvider> make_provider(std::string_view spec,
                                                      const std::string& default_id,
                                                      ExternalOptions opts = {}) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos)
    throw Error(ErrorKind::config, "adapter spec needs a scheme: " + std::string(spec));
  const auto scheme = spec.substr(0, colon);
  const std::string rest(spec.substr(colon + 1));
  if (rest.empty()) throw Error(ErrorKind::config, "empty adapter target: " + std::string(spec));
  if (scheme == "sim") {
    sim::AgentPolicy p;
    try {
      p = read_json_file(rest).get<sim::AgentPolicy>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::config, "invalid policy file " + rest + ": " + e.what());
    }
    return std::make_unique<sim::SimProvider>(std::move(p));
  }
  if (scheme == "cmd")
    return std::make_unique<ExternalProvider>(
        default_id, std::make_unique<ProcessChannel>(split_argv(rest)), opts);
  if (scheme == "tcp") {
    const auto c = rest.rfind(':');
    if (c == std::string::npos || c == 0 || c + 1 == rest.size())
      throw Error(ErrorKind::config, "tcp adapter needs host:port: " + rest);
    return std::make_unique<ExternalProvider>(
        default_id, std::make_unique<TcpChannel>(rest.substr(0, c), rest.substr(c + 1)), opts);
  }
  throw Error(ErrorKind::config, "unknown adapter scheme: " + std::string(scheme));
}

}  // namespace semcert::adapter

#endif  // SEMCERT_ADAPTER_HPP
