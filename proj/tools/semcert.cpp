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

// semcert: command-line front end.
//
// Exit codes: 0 ok, 1 internal, 2 usage, 3 config, 4 io, 5 ledger invalid,
// 6 replay, 7 provider, 8 domain.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "semcert/semcert.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace semcert;

namespace {

constexpr const char* kVersion = SEMCERT_VERSION;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return 3;
    case ErrorKind::io: return 4;
    case ErrorKind::ledger_invalid: return 5;
    case ErrorKind::replay: return 6;
    case ErrorKind::provider:
    case ErrorKind::timeout:
    case ErrorKind::malformed:
    case ErrorKind::id_mismatch: return 7;
    case ErrorKind::domain: return 8;
  }
  return 1;
}

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

// Config files ------------------------------------------------------------------

const std::map<std::string, std::set<std::string>> kCommands = {
    {"certify", {}},
    {"recertify", {}},
    {"renegotiate", {}},
    {"guard", {"measure"}},
    {"ledger", {"verify", "replay"}},
    {"exp", {"static", "timeseries", "tradeoff", "calibrate"}},
    {"sim", {"gen-events", "gen-agents"}},
    {"stats", {"wilson"}},
};

/// Inserts `--key value` tokens for every config entry whose flag is absent
/// from argv. A manifest is accepted too; its "config" member is used.
std::vector<std::string> apply_config(std::vector<std::string> args) {
  std::optional<std::string> path;
  std::set<std::string> present;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a.rfind("--", 0) != 0) continue;
    const auto eq = a.find('=');
    const std::string flag = a.substr(0, eq);
    present.insert(flag);
    if (flag == "--config") {
      if (eq != std::string::npos)
        path = a.substr(eq + 1);
      else if (i + 1 < args.size())
        path = args[i + 1];
    }
  }
  if (!path) return args;

  json cfg = adapter::read_json_file(*path);
  if (cfg.is_object() && cfg.contains("command") && cfg.contains("config")) cfg = cfg["config"];
  if (!cfg.is_object()) throw Error(ErrorKind::config, "config file must hold a JSON object");

  std::size_t insert_at = 1;
  if (insert_at < args.size()) {
    auto top = kCommands.find(args[insert_at]);
    if (top != kCommands.end()) {
      ++insert_at;
      if (insert_at < args.size() && top->second.contains(args[insert_at])) ++insert_at;
    }
  }

  std::vector<std::string> extra;
  for (const auto& [key, value] : cfg.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (flag == "--config" || present.contains(flag)) continue;
    const auto scalar = [&](const json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_number_integer() || v.is_number_unsigned() || v.is_number_float()) return v.dump();
      throw Error(ErrorKind::config, "config key '" + key + "' has an unsupported value");
    };
    if (value.is_boolean()) {
      if (value.get<bool>()) extra.push_back(flag);
    } else if (value.is_array()) {
      extra.push_back(flag);
      for (const auto& v : value) extra.push_back(scalar(v));
    } else {
      extra.push_back(flag);
      extra.push_back(scalar(value));
    }
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(insert_at), extra.begin(), extra.end());
  return args;
}

/// Effective option values of a leaf subcommand, in a form apply_config reads.
json effective_config(const CLI::App& app) {
  json out = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_lnames().empty()) continue;
    std::string key = opt->get_lnames().front();
    if (key == "help" || key == "out" || key == "config") continue;
    std::replace(key.begin(), key.end(), '-', '_');
    if (opt->get_expected_max() == 0) {
      out[key] = opt->count() > 0;
    } else if (opt->count() > 0) {
      const auto& r = opt->results();
      if (opt->get_expected_max() > 1)
        out[key] = r;
      else
        out[key] = r.back();
    } else if (!opt->get_default_str().empty()) {
      out[key] = opt->get_default_str();
    }
  }
  return out;
}

// Output ------------------------------------------------------------------------

fs::path resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SEMCERT_OUT"); env && *env) return env;
  return "semcert-out";
}

/// Collects files written by a command and seals them with a manifest.
class OutputDir {
 public:
  explicit OutputDir(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::io, "cannot create " + dir_.string() + ": " + ec.message());
  }
  fs::path path(const std::string& name) {
    files_.insert(name);
    return dir_ / name;
  }
  void json_file(const std::string& name, const json& j) { exp::write_json(j, path(name)); }

  void manifest(const std::string& command, const CLI::App& app) {
    json outputs = json::object();
    for (const auto& f : files_) outputs[f] = file_sha256(dir_ / f);
    json m{{"tool", "semcert"},
           {"version", kVersion},
           {"command", command},
           {"config", effective_config(app)},
           {"outputs", outputs}};
    exp::write_json(m, dir_ / "manifest.json");
  }

  const fs::path& dir() const { return dir_; }

 private:
  static std::string file_sha256(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return to_hex(sha256(ss.str()));
  }

  fs::path dir_;
  std::set<std::string> files_;
};

// Inputs ------------------------------------------------------------------------

std::vector<Event> load_events(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read events file " + path.string());
  std::vector<Event> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    auto j = json::parse(line, nullptr, false);
    if (!j.is_object() || !j.contains("pei") || !j["pei"].is_string())
      throw Error(ErrorKind::config, path.string() + ":" + std::to_string(n) + ": event needs a pei");
    std::string content;
    if (j.contains("content") && j["content"].is_string())
      content = j["content"].get<std::string>();
    else if (j.contains("hue") && j["hue"].is_number())
      content = sim::hue_content(j["hue"].get<double>());
    out.push_back({EventId(j["pei"].get<std::string>()), std::move(content)});
  }
  std::set<std::string> seen;
  for (const auto& e : out)
    if (!seen.insert(e.id.str()).second)
      throw Error(ErrorKind::config, "duplicate pei " + e.id.str() + " in " + path.string());
  return out;
}

std::vector<std::string> load_vocab(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read vocabulary file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<std::string> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    auto j = json::parse(text, nullptr, false);
    if (!j.is_array()) throw Error(ErrorKind::config, "invalid vocabulary JSON in " + path.string());
    for (const auto& t : j) out.push_back(t.get<std::string>());
  } else {
    std::istringstream ls(text);
    std::string line;
    while (std::getline(ls, line)) {
      while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
      if (!line.empty() && line.front() != '#') out.push_back(line);
    }
  }
  std::set<std::string> seen;
  for (const auto& t : out)
    if (!seen.insert(t).second) throw Error(ErrorKind::config, "duplicate term '" + t + "'");
  if (out.empty()) throw Error(ErrorKind::config, "empty vocabulary in " + path.string());
  return out;
}

CertifiedCore load_core(const fs::path& path) {
  try {
    return adapter::read_json_file(path).get<CertifiedCore>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::config, "invalid core file " + path.string() + ": " + e.what());
  }
}

/// "a:b:step" (inclusive) or "x,y,z".
std::vector<double> parse_grid(const std::string& s) {
  const auto num = [&](const std::string& t) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || t.empty()) throw Error(ErrorKind::config, "invalid number '" + t + "' in " + s);
    return v;
  };
  std::vector<double> out;
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw Error(ErrorKind::config, "grid must be lo:hi:step: " + s);
    const double lo = num(parts[0]), hi = num(parts[1]), step = num(parts[2]);
    if (!(step > 0) || hi < lo) throw Error(ErrorKind::config, "empty grid: " + s);
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i)
      out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12);
  } else {
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(num(p));
  }
  if (out.empty()) throw Error(ErrorKind::config, "empty grid: " + s);
  return out;
}

struct AgentPair {
  std::unique_ptr<VerdictProvider> a1;
  std::unique_ptr<VerdictProvider> a2;
};

AgentPair make_agents(const std::vector<std::string>& specs, std::int64_t timeout_ms) {
  if (specs.size() != 2) throw Error(ErrorKind::config, "--agents needs exactly two adapter specs");
  if (timeout_ms <= 0) throw Error(ErrorKind::config, "--timeout-ms must be positive");
  adapter::ExternalOptions opts{std::chrono::milliseconds(timeout_ms)};
  AgentPair p{adapter::make_provider(specs[0], "A1", opts), adapter::make_provider(specs[1], "A2", opts)};
  if (p.a1->id() == p.a2->id())
    throw Error(ErrorKind::config, "both agents have id '" + p.a1->id() + "'");
  return p;
}

std::uint64_t next_epoch(const Ledger& l) {
  if (l.empty()) return 0;
  std::uint64_t m = 0;
  for (const auto& e : l.entries()) m = std::max(m, e.epoch);
  return m + 1;
}

/// Writes updated simulated policies after renegotiation.
void save_sim_policies(OutputDir& out, const AgentPair& p) {
  int n = 1;
  for (const auto* a : {p.a1.get(), p.a2.get()}) {
    if (const auto* s = dynamic_cast<const sim::SimProvider*>(a))
      out.json_file("agent" + std::to_string(n) + ".json", json(s->policy()));
    ++n;
  }
}

struct Common {
  std::string out;
  std::string config;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--out", c.out, "Output directory (default: $SEMCERT_OUT, else ./semcert-out)");
  app->add_option("--config", c.config, "JSON file supplying omitted flags (a manifest also works)");
}

void add_params(CLI::App* app, ProtocolParams& p) {
  app->add_option("--tau", p.tau, "Contradiction-rate ceiling");
  app->add_option("--delta", p.delta, "Bound failure probability");
  app->add_option("--rho-min", p.rho_min, "Minimum coverage k/n_aud");
}

}  // namespace

int run(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  args = apply_config(std::move(args));

  CLI::App app{"semcert: certify shared term meanings between agent pairs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  Common common;
  ProtocolParams params;
  std::vector<std::string> agents;
  std::int64_t timeout_ms = 30'000;
  std::uint64_t seed = 0;
  std::size_t per_term = 192;

  // certify
  auto* certify_cmd = app.add_subcommand("certify", "Audit every term and emit the certified core");
  std::string ledger_path, vocab_path, events_path;
  std::size_t audit_size = 400;
  std::optional<std::uint64_t> epoch_opt;
  add_common(certify_cmd, common);
  add_params(certify_cmd, params);
  certify_cmd->add_option("--ledger", ledger_path, "Ledger to append to (default: <out>/ledger.jsonl)");
  certify_cmd->add_option("--vocab", vocab_path, "Vocabulary: one term per line or a JSON array")->required();
  certify_cmd->add_option("--events", events_path, "Events JSONL ({pei, content})")->required();
  certify_cmd->add_option("--audit", audit_size, "Audit pool: the first N events of the file");
  certify_cmd->add_option("--per-term", per_term, "Audit events sampled per term");
  certify_cmd->add_option("--seed", seed, "Root seed for audit sampling");
  certify_cmd->add_option("--epoch", epoch_opt, "Audit epoch (default: one past the ledger's last)");
  certify_cmd->add_option("--agents", agents, "Two adapter specs: sim:<policy> | cmd:<argv> | tcp:<host:port>")
      ->expected(2)
      ->required();
  certify_cmd->add_option("--timeout-ms", timeout_ms, "Per-verdict timeout for external agents");

  // guard measure
  auto* guard_cmd = app.add_subcommand("guard", "Core-guarded evaluation");
  guard_cmd->require_subcommand(1);
  auto* measure_cmd = guard_cmd->add_subcommand("measure", "Disagreement with and without the core guard");
  std::string core_path, eval_log;
  std::size_t skip = 0;
  std::uint64_t eval_epoch = 1;
  add_common(measure_cmd, common);
  measure_cmd->add_option("--core", core_path, "Certified core JSON")->required();
  measure_cmd->add_option("--events", events_path, "Held-out events JSONL")->required();
  measure_cmd->add_option("--skip", skip, "Ignore the first N events of the file");
  measure_cmd->add_option("--vocab", vocab_path, "Full vocabulary (default: the core's audited terms)");
  measure_cmd->add_option("--agents", agents, "Two adapter specs")->expected(2)->required();
  measure_cmd->add_option("--timeout-ms", timeout_ms, "Per-verdict timeout for external agents");
  measure_cmd->add_option("--epoch", eval_epoch, "Evaluation pass id (keys simulated noise)");
  measure_cmd->add_flag("--log", "Also write every evaluation verdict to evaluations.jsonl");

  // recertify
  auto* recert_cmd = app.add_subcommand("recertify", "Re-audit core terms on fresh events");
  add_common(recert_cmd, common);
  add_params(recert_cmd, params);
  recert_cmd->add_option("--core", core_path, "Certified core JSON")->required();
  recert_cmd->add_option("--ledger", ledger_path, "Ledger holding the prior audits")->required();
  recert_cmd->add_option("--events", events_path, "Fresh events JSONL")->required();
  recert_cmd->add_option("--per-term", per_term, "Audit events sampled per term");
  recert_cmd->add_option("--seed", seed, "Root seed for audit sampling");
  recert_cmd->add_option("--epoch", epoch_opt, "Recertification epoch (default: one past the ledger's last)");
  recert_cmd->add_option("--agents", agents, "Two adapter specs")->expected(2)->required();
  recert_cmd->add_option("--timeout-ms", timeout_ms, "Per-verdict timeout for external agents");

  // renegotiate
  auto* reneg_cmd = app.add_subcommand("renegotiate", "Align one excluded term and re-audit it");
  std::string term;
  add_common(reneg_cmd, common);
  add_params(reneg_cmd, params);
  reneg_cmd->add_option("--term", term, "Term to renegotiate")->required();
  reneg_cmd->add_option("--core", core_path, "Certified core JSON")->required();
  reneg_cmd->add_option("--ledger", ledger_path, "Ledger (entrenchment source; audit appended)")->required();
  reneg_cmd->add_option("--events", events_path, "Fresh events JSONL")->required();
  reneg_cmd->add_option("--per-term", per_term, "Audit events sampled for the term");
  reneg_cmd->add_option("--seed", seed, "Root seed for audit sampling");
  reneg_cmd->add_option("--epoch", epoch_opt, "Audit epoch (default: one past the ledger's last)");
  reneg_cmd->add_option("--agents", agents, "Two adapter specs")->expected(2)->required();
  reneg_cmd->add_option("--timeout-ms", timeout_ms, "Per-verdict timeout for external agents");

  // ledger
  auto* ledger_cmd = app.add_subcommand("ledger", "Ledger tooling");
  ledger_cmd->require_subcommand(1);
  auto* verify_cmd = ledger_cmd->add_subcommand("verify", "Check the hash chain; report the first bad seq");
  verify_cmd->add_option("ledger,--ledger", ledger_path, "Ledger JSONL")->required();
  auto* replay_cmd = ledger_cmd->add_subcommand("replay", "Recompute certificates from the ledger alone");
  std::uint64_t replay_epoch = 0;
  add_common(replay_cmd, common);
  add_params(replay_cmd, params);
  replay_cmd->add_option("ledger,--ledger", ledger_path, "Ledger JSONL")->required();
  replay_cmd->add_option("--epoch", replay_epoch, "Epoch to replay");

  // exp
  auto* exp_cmd = app.add_subcommand("exp", "Simulation experiments");
  exp_cmd->require_subcommand(1);
  unsigned threads = 0;
  std::size_t runs = 100;

  auto* static_cmd = exp_cmd->add_subcommand("static", "Unguarded vs guarded disagreement per condition");
  exp::StaticConfig scfg;
  std::string condition = "noise-only";
  add_common(static_cmd, common);
  add_params(static_cmd, scfg.params);
  static_cmd->add_option("--condition", condition, "noise-only | moderate | high | all");
  static_cmd->add_option("--runs", runs, "Independent runs per condition");
  static_cmd->add_option("--seed", seed, "Root seed");
  static_cmd->add_option("--audit", scfg.audit_events, "Audit pool size");
  static_cmd->add_option("--heldout", scfg.heldout_events, "Held-out pool size");
  static_cmd->add_option("--per-term", scfg.per_term_size, "Audit events sampled per term");
  static_cmd->add_option("--drift-shift", scfg.condition.drift_shift, "Moderate drift: center shift in degrees");
  static_cmd->add_option("--drift-terms", scfg.condition.drift_terms, "Moderate drift: number of shifted terms");
  static_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

  auto* ts_cmd = exp_cmd->add_subcommand("timeseries", "Drift over epochs with lifecycle interventions");
  exp::TimeseriesConfig tcfg;
  std::string scenario = "all";
  add_common(ts_cmd, common);
  add_params(ts_cmd, tcfg.params);
  ts_cmd->add_option("--scenario", scenario, "baseline | frozen | recert | renegotiate | all");
  ts_cmd->add_option("--runs", tcfg.runs, "Independent runs averaged per epoch");
  ts_cmd->add_option("--seed", seed, "Root seed");
  ts_cmd->add_option("--epochs", tcfg.epochs, "Number of epochs");
  ts_cmd->add_option("--drift-epoch", tcfg.drift_epoch, "Epoch at which drift starts");
  ts_cmd->add_option("--drift-magnitude", tcfg.drift_magnitude, "Center shift of the drifted term, degrees");
  ts_cmd->add_option("--audit", tcfg.audit_events, "Initial audit pool size");
  ts_cmd->add_option("--heldout", tcfg.heldout_events, "Held-out events per epoch");
  ts_cmd->add_option("--per-term", tcfg.per_term_size, "Initial audit events per term");
  ts_cmd->add_option("--recert-pool", tcfg.recert_pool, "Fresh events per recertification");
  ts_cmd->add_option("--recert-per-term", tcfg.recert_per_term, "Recertification audit events per term");
  ts_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

  auto* to_cmd = exp_cmd->add_subcommand("tradeoff", "Coverage vs guarded disagreement over tau");
  std::string pi_list = "0.3,0.5,0.7,0.9", tau_grid = "0.01:0.20:0.01";
  exp::TwoPopulationModel model;
  std::uint64_t k_audit = 120, n_mc = 100'000;
  double to_delta = 0.05;
  add_common(to_cmd, common);
  to_cmd->add_option("--pi", pi_list, "Fractions of low-contradiction terms");
  to_cmd->add_option("--tau-grid", tau_grid, "lo:hi:step or comma list");
  to_cmd->add_option("--p-lo", model.p_lo, "Contradiction rate of aligned terms");
  to_cmd->add_option("--p-hi", model.p_hi, "Contradiction rate of misaligned terms");
  to_cmd->add_option("--k", k_audit, "Eligible comparisons per audited term");
  to_cmd->add_option("--delta", to_delta, "Bound failure probability");
  to_cmd->add_option("--mc", n_mc, "Monte Carlo trials per pi (0 = off)");
  to_cmd->add_option("--seed", seed, "Monte Carlo seed");

  auto* cal_cmd = exp_cmd->add_subcommand("calibrate", "Sweep the moderate-drift shift against a target rate");
  std::string shifts = "20:40:2";
  double target = 0.074;
  add_common(cal_cmd, common);
  cal_cmd->add_option("--shifts", shifts, "Shift grid in degrees, lo:hi:step or list");
  cal_cmd->add_option("--target", target, "Target mean unguarded rate");
  cal_cmd->add_option("--runs", runs, "Runs per shift");
  cal_cmd->add_option("--seed", seed, "Root seed");
  cal_cmd->add_option("--threads", threads, "Worker threads (0 = hardware)");

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "Simulated events and agents");
  sim_cmd->require_subcommand(1);
  auto* gen_ev_cmd = sim_cmd->add_subcommand("gen-events", "Write hue events as JSONL");
  std::size_t n_events = 1000;
  add_common(gen_ev_cmd, common);
  gen_ev_cmd->add_option("--n", n_events, "Number of events");
  gen_ev_cmd->add_option("--seed", seed, "Seed");
  auto* gen_ag_cmd = sim_cmd->add_subcommand("gen-agents", "Write an agent policy pair");
  sim::ConditionConfig ccfg;
  std::string ag_condition = "noise-only";
  add_common(gen_ag_cmd, common);
  gen_ag_cmd->add_option("--condition", ag_condition, "noise-only | moderate | high");
  gen_ag_cmd->add_option("--seed", seed, "Seed");
  gen_ag_cmd->add_option("--drift-shift", ccfg.drift_shift, "Moderate drift: center shift in degrees");
  gen_ag_cmd->add_option("--drift-terms", ccfg.drift_terms, "Moderate drift: number of shifted terms");

  // stats
  auto* stats_cmd = app.add_subcommand("stats", "Statistics helpers");
  stats_cmd->require_subcommand(1);
  auto* wilson_cmd = stats_cmd->add_subcommand("wilson", "One-sided Wilson upper bound");
  std::uint64_t wc = 0, wk = 0;
  double wdelta = 0.05;
  wilson_cmd->add_option("--c", wc, "Contradictions")->required();
  wilson_cmd->add_option("--k", wk, "Eligible comparisons")->required();
  wilson_cmd->add_option("--delta", wdelta, "Failure probability");

  std::vector<const char*> cargv;
  for (const auto& a : args) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error("usage", e.what());
    return 2;
  }

  // --- dispatch ---

  if (*certify_cmd) {
    params.validate();
    OutputDir out(resolve_out(common.out));
    const fs::path lpath = ledger_path.empty() ? out.path("ledger.jsonl") : fs::path(ledger_path);
    auto vocab = load_vocab(vocab_path);
    auto events = load_events(events_path);
    if (audit_size > events.size())
      throw Error(ErrorKind::config, "--audit " + std::to_string(audit_size) + " exceeds the " +
                                         std::to_string(events.size()) + " events in the file");
    auto pair = make_agents(agents, timeout_ms);
    Ledger ledger = Ledger::open(lpath);
    const std::uint64_t epoch = epoch_opt.value_or(next_epoch(ledger));
    auto plan = sample_audit_plan(std::span<const Event>(events.data(), audit_size), vocab, per_term, seed);
    auto core = certify(*pair.a1, *pair.a2, plan, params, ledger, epoch);
    out.json_file("core.json", json(core));
    out.manifest("certify", *certify_cmd);
    std::cout << json(core).dump(2) << '\n';
    return 0;
  }

  if (*measure_cmd) {
    OutputDir out(resolve_out(common.out));
    auto core = load_core(core_path);
    auto events = load_events(events_path);
    if (skip > events.size()) throw Error(ErrorKind::config, "--skip exceeds the events in the file");
    std::vector<std::string> vocab;
    if (!vocab_path.empty())
      vocab = load_vocab(vocab_path);
    else
      for (const auto& [t, c] : core.certificates) vocab.push_back(t);
    auto pair = make_agents(agents, timeout_ms);
    std::unique_ptr<std::ofstream> log_stream;
    std::unique_ptr<JsonlEvaluationLog> log;
    if (measure_cmd->count("--log") > 0) {
      log_stream = std::make_unique<std::ofstream>(out.path("evaluations.jsonl"), std::ios::binary);
      log = std::make_unique<JsonlEvaluationLog>(*log_stream);
    }
    const std::set<std::string> all(vocab.begin(), vocab.end());
    const std::span<const Event> heldout(events.data() + skip, events.size() - skip);
    auto unguarded = measure_disagreement(*pair.a1, *pair.a2, all, heldout, eval_epoch, log.get());
    auto guarded = restrict_report(unguarded, guarded_vocabulary(core, vocab));
    json report{{"unguarded", unguarded}, {"guarded", guarded}};
    report["reduction"] = unguarded.rate > 0 && !guarded.no_vocabulary
                              ? json(1.0 - guarded.rate / unguarded.rate)
                              : json(nullptr);
    if (log_stream) {
      log_stream->close();
      if (!*log_stream) throw Error(ErrorKind::io, "cannot write evaluation log");
    }
    out.json_file("report.json", report);
    out.manifest("guard measure", *measure_cmd);
    std::cout << report.dump(2) << '\n';
    if (unguarded.incomplete) {
      report_error(to_string(unguarded.failure_kind), unguarded.failure);
      return exit_code(unguarded.failure_kind);
    }
    return 0;
  }

  if (*recert_cmd) {
    params.validate();
    OutputDir out(resolve_out(common.out));
    auto core = load_core(core_path);
    auto events = load_events(events_path);
    auto pair = make_agents(agents, timeout_ms);
    Ledger ledger = Ledger::open(ledger_path);
    const std::uint64_t epoch = epoch_opt.value_or(std::max(next_epoch(ledger), core.epoch + 1));
    auto [updated, outcomes] =
        recertify(core, *pair.a1, *pair.a2, events, params, ledger, epoch, {per_term, seed});
    out.json_file("core.json", json(updated));
    out.json_file("recert.json", json(outcomes));
    out.manifest("recertify", *recert_cmd);
    std::cout << json{{"core", updated}, {"outcomes", outcomes}}.dump(2) << '\n';
    return 0;
  }

  if (*reneg_cmd) {
    params.validate();
    OutputDir out(resolve_out(common.out));
    auto core = load_core(core_path);
    auto events = load_events(events_path);
    auto pair = make_agents(agents, timeout_ms);
    Ledger ledger = Ledger::open(ledger_path);
    const std::uint64_t epoch = epoch_opt.value_or(std::max(next_epoch(ledger), core.epoch + 1));
    auto outcome = renegotiate(term, *pair.a1, *pair.a2, ledger, events, params, epoch,
                               {per_term, seed}, core);
    auto updated = apply_renegotiation(core, outcome, epoch);
    out.json_file("core.json", json(updated));
    out.json_file("renegotiation.json", json(outcome));
    save_sim_policies(out, pair);
    out.manifest("renegotiate", *reneg_cmd);
    std::cout << json(outcome).dump(2) << '\n';
    return 0;
  }

  if (*verify_cmd) {
    auto r = verify_file(ledger_path);
    if (!r.valid()) {
      std::cout << json{{"valid", false}, {"first_bad_seq", *r.invalid_at}}.dump() << '\n';
      report_error("ledger_invalid", "ledger chain invalid at seq " + std::to_string(*r.invalid_at));
      return exit_code(ErrorKind::ledger_invalid);
    }
    const auto n = Ledger::load(ledger_path).size();
    std::cout << json{{"valid", true}, {"entries", n}}.dump() << '\n';
    return 0;
  }

  if (*replay_cmd) {
    params.validate();
    auto ledger = Ledger::load(ledger_path);
    OutputDir out(resolve_out(common.out));
    auto core = replay_certification(ledger, params, replay_epoch);
    out.json_file("core.json", json(core));
    out.manifest("ledger replay", *replay_cmd);
    std::cout << json(core).dump(2) << '\n';
    return 0;
  }

  if (*static_cmd) {
    scfg.threads = threads;
    std::vector<sim::Condition> conds;
    if (condition == "all") {
      conds = {sim::Condition::NoiseOnly, sim::Condition::ModerateDrift, sim::Condition::HighDivergence};
    } else if (auto c = sim::parse_condition(condition)) {
      conds = {*c};
    } else {
      throw Error(ErrorKind::config, "unknown condition '" + condition + "'");
    }
    OutputDir out(resolve_out(common.out));
    std::vector<exp::StaticRunRecord> all_runs;
    std::vector<exp::StaticSummary> summaries;
    json summary_json = json::array();
    for (auto c : conds) {
      auto res = exp::run_static(c, runs, scfg, derive_seed(seed, {fnv1a64(sim::to_string(c))}));
      all_runs.insert(all_runs.end(), res.records.begin(), res.records.end());
      summaries.push_back(res.summary);
      summary_json.push_back(exp::summary_json(res.summary));
    }
    exp::write_static_runs_csv(all_runs, out.path("runs.csv"));
    exp::write_static_summary_csv(summaries, out.path("summary.csv"));
    out.json_file("summary.json", summary_json);
    out.manifest("exp static", *static_cmd);
    std::cout << summary_json.dump(2) << '\n';
    return 0;
  }

  if (*ts_cmd) {
    tcfg.threads = threads;
    std::vector<exp::Scenario> scenarios;
    if (scenario == "all") {
      scenarios = {exp::Scenario::baseline, exp::Scenario::frozen, exp::Scenario::recert,
                   exp::Scenario::renegotiate};
    } else if (auto s = exp::parse_scenario(scenario)) {
      scenarios = {*s};
    } else {
      throw Error(ErrorKind::config, "unknown scenario '" + scenario + "'");
    }
    OutputDir out(resolve_out(common.out));
    std::vector<exp::TimeseriesRecord> records;
    json j = json::array();
    for (auto s : scenarios) {
      // every scenario shares the seed so runs differ only by intervention
      auto rs = exp::run_timeseries(s, tcfg, seed);
      for (const auto& r : rs)
        j.push_back({{"scenario", std::string(exp::to_string(r.scenario))},
                     {"epoch", r.epoch},
                     {"drift", r.drift},
                     {"core", r.core_size},
                     {"guarded", r.guarded_rate},
                     {"unguarded", r.unguarded_rate},
                     {"runs_with_core", r.runs_with_core}});
      records.insert(records.end(), rs.begin(), rs.end());
    }
    exp::write_timeseries_csv(records, out.path("timeseries.csv"));
    out.json_file("timeseries.json", j);
    out.manifest("exp timeseries", *ts_cmd);
    return 0;
  }

  if (*to_cmd) {
    const auto pis = parse_grid(pi_list);
    const auto taus = parse_grid(tau_grid);
    if (!(to_delta > 0 && to_delta < 1)) throw Error(ErrorKind::config, "delta must lie in (0,1)");
    OutputDir out(resolve_out(common.out));
    auto pts = exp::run_tradeoff(pis, taus, model, k_audit, to_delta, n_mc, seed);
    exp::write_tradeoff_csv(pts, out.path("tradeoff.csv"));
    json j = json::array();
    for (const auto& p : pts)
      j.push_back({{"pi", p.pi},
                   {"tau", p.tau},
                   {"coverage", p.coverage},
                   {"guarded", p.guarded_disagreement},
                   {"unguarded", p.unguarded_baseline},
                   {"coverage_mc", p.coverage_mc},
                   {"guarded_mc", p.guarded_disagreement_mc}});
    out.json_file("tradeoff.json", j);
    out.manifest("exp tradeoff", *to_cmd);
    return 0;
  }

  if (*cal_cmd) {
    exp::StaticConfig cfg;
    cfg.threads = threads;
    const auto grid = parse_grid(shifts);
    OutputDir out(resolve_out(common.out));
    auto res = exp::calibrate_moderate_drift(
        grid, runs, cfg, derive_seed(seed, {fnv1a64(sim::to_string(sim::Condition::ModerateDrift))}),
        target);
    {
      auto p = out.path("calibration.csv");
      std::ofstream csv(p, std::ios::binary);
      if (!csv) throw Error(ErrorKind::io, "cannot write " + p.string());
      csv << "shift,mean_unguarded,mean_core\n";
      for (const auto& pt : res.points)
        csv << exp::fmt_num(pt.shift) << ',' << exp::fmt_num(pt.mean_unguarded) << ','
            << exp::fmt_num(pt.mean_core) << '\n';
    }
    json j{{"chosen_shift", res.chosen}, {"in_band", res.in_band}, {"target", target}};
    out.json_file("calibration.json", j);
    out.manifest("exp calibrate", *cal_cmd);
    std::cout << j.dump(2) << '\n';
    return 0;
  }

  if (*gen_ev_cmd) {
    OutputDir out(resolve_out(common.out));
    auto evs = sim::gen_events(n_events, seed);
    {
      auto p = out.path("events.jsonl");
      std::ofstream f(p, std::ios::binary);
      if (!f) throw Error(ErrorKind::io, "cannot write " + p.string());
      for (const auto& e : evs) f << json(e).dump() << '\n';
    }
    out.manifest("sim gen-events", *gen_ev_cmd);
    return 0;
  }

  if (*gen_ag_cmd) {
    auto c = sim::parse_condition(ag_condition);
    if (!c) throw Error(ErrorKind::config, "unknown condition '" + ag_condition + "'");
    OutputDir out(resolve_out(common.out));
    auto [p1, p2] = sim::gen_policies(*c, seed, ccfg);
    out.json_file("agent1.json", json(p1));
    out.json_file("agent2.json", json(p2));
    out.manifest("sim gen-agents", *gen_ag_cmd);
    return 0;
  }

  if (*wilson_cmd) {
    const double u = wilson_upper(wc, wk, wdelta);
    std::cout << json{{"c", wc}, {"k", wk}, {"delta", wdelta}, {"u", u}}.dump() << '\n';
    return 0;
  }

  report_error("usage", "no command given");
  return 2;
}

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    report_error("config", e.what());
    return 3;
  } catch (const fs::filesystem_error& e) {
    report_error("io", e.what());
    return 4;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
}
