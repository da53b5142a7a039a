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

#ifndef SEMCERT_SIMAGENTS_HPP
#define SEMCERT_SIMAGENTS_HPP

// Synthetic agents over a circular hue space.
//
// Each of six color terms is an arc (center, half-width in degrees): an agent
// assents when the event's hue falls on the arc and dissents otherwise. A
// noise process then neutralizes some verdicts and flips some of the rest.
// The noise draws are keyed by (agent seed, term, pei, epoch), so a query
// repeats exactly and audit order never matters.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "semcert/certification.hpp"
#include "semcert/rng.hpp"
#include "semcert/types.hpp"

namespace semcert::sim {

inline const std::vector<std::string>& color_vocabulary() {
  static const std::vector<std::string> v{"red", "yellow", "green", "cyan", "blue", "magenta"};
  return v;
}

struct SimEvent {
  EventId id;
  double hue = 0.0;  // [0, 360)
};

inline std::string hue_content(double hue) {
  std::array<char, 64> buf{};
  auto r = std::to_chars(buf.data(), buf.data() + buf.size(), hue);
  return "hue=" + std::string(buf.data(), r.ptr);
}

inline std::optional<double> parse_hue_content(std::string_view content) {
  if (!content.starts_with("hue=")) return std::nullopt;
  content.remove_prefix(4);
  double h = 0;
  auto r = std::from_chars(content.data(), content.data() + content.size(), h);
  if (r.ec != std::errc{} || r.ptr != content.data() + content.size()) return std::nullopt;
  if (!(h >= 0.0 && h < 360.0)) return std::nullopt;
  return h;
}

inline Event to_event(const SimEvent& e) { return Event{e.id, hue_content(e.hue)}; }

inline std::vector<Event> to_events(std::span<const SimEvent> evs) {
  std::vector<Event> out;
  out.reserve(evs.size());
  for (const auto& e : evs) out.push_back(to_event(e));
  return out;
}

/// n events with i.i.d. uniform hues. Identifiers are "sim-<seed>-<index>".
inline std::vector<SimEvent> gen_events(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::config, "gen_events: n must be at least 1");
  std::vector<SimEvent> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double hue = 360.0 * to_unit(derive_seed(seed, {i}));
    if (hue >= 360.0) hue = 0.0;
    out.push_back({EventId("sim-" + std::to_string(seed) + "-" + std::to_string(i)), hue});
  }
  return out;
}

struct NoiseParams {
  double neutral_rate = 0.05;
  double flip_rate = 0.01;
  bool operator==(const NoiseParams&) const = default;
};

struct Arc {
  double center = 0.0;      // degrees
  double half_width = 30.0; // degrees; 180 covers the circle

  bool contains(double hue) const {
    double d = std::fmod(std::fabs(hue - center), 360.0);
    if (d > 180.0) d = 360.0 - d;
    return d <= half_width;
  }
  bool operator==(const Arc&) const = default;
};

struct TermRule {
  std::string term;
  Arc arc;
  bool operator==(const TermRule&) const = default;
};

struct AgentPolicy {
  std::string agent;
  std::vector<TermRule> rules;
  NoiseParams noise;
  std::uint64_t seed = 0;

  const Arc& arc(std::string_view term) const {
    for (const auto& r : rules)
      if (r.term == term) return r.arc;
    throw Error(ErrorKind::domain, "unknown term '" + std::string(term) + "'");
  }
  Arc& arc(std::string_view term) {
    return const_cast<Arc&>(std::as_const(*this).arc(term));
  }
  bool operator==(const AgentPolicy&) const = default;
};

enum class Condition { NoiseOnly, ModerateDrift, HighDivergence };

inline std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::NoiseOnly: return "noise-only";
    case Condition::ModerateDrift: return "moderate";
    case Condition::HighDivergence: return "high";
  }
  return "noise-only";
}

inline std::optional<Condition> parse_condition(std::string_view s) {
  if (s == "noise-only") return Condition::NoiseOnly;
  if (s == "moderate") return Condition::ModerateDrift;
  if (s == "high") return Condition::HighDivergence;
  return std::nullopt;
}

/// Knobs for gen_policies; the defaults are the calibrated values.
struct ConditionConfig {
  NoiseParams noise;
  std::size_t drift_terms = 2;      // ModerateDrift: how many terms agent 2 shifts
  double drift_shift = 30.0;        // ModerateDrift: center shift in degrees
  int divergence_centers = 12;      // HighDivergence: centers on a 360/n grid
  int divergence_widths = 6;        // HighDivergence: half-widths min, min+step, ... (n values)
  double divergence_min_half_width = 25.0;
  double divergence_width_step = 10.0;
};

/// Six evenly spaced 60-degree arcs that tile the circle.
inline std::vector<TermRule> reference_rules() {
  std::vector<TermRule> rules;
  const auto& vocab = color_vocabulary();
  for (std::size_t i = 0; i < vocab.size(); ++i)
    rules.push_back({vocab[i], Arc{60.0 * static_cast<double>(i), 30.0}});
  return rules;
}

inline std::pair<AgentPolicy, AgentPolicy> gen_policies(Condition condition, std::uint64_t seed,
                                                        const ConditionConfig& cfg = {}) {
  AgentPolicy a1{"A1", reference_rules(), cfg.noise, derive_seed(seed, {1})};
  AgentPolicy a2{"A2", reference_rules(), cfg.noise, derive_seed(seed, {2})};
  Rng rng(derive_seed(seed, {3}));

  switch (condition) {
    case Condition::NoiseOnly:
      break;
    case Condition::ModerateDrift: {
      std::vector<std::size_t> idx(a2.rules.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      rng.shuffle(idx);
      const auto n = std::min(cfg.drift_terms, idx.size());
      for (std::size_t i = 0; i < n; ++i) {
        auto& arc = a2.rules[idx[i]].arc;
        arc.center = std::fmod(arc.center + cfg.drift_shift, 360.0);
      }
      break;
    }
    case Condition::HighDivergence: {
      const double step = 360.0 / cfg.divergence_centers;
      for (auto* policy : {&a1, &a2}) {
        for (auto& r : policy->rules) {
          r.arc.center = step * static_cast<double>(rng.below(cfg.divergence_centers));
          r.arc.half_width = cfg.divergence_min_half_width +
                             cfg.divergence_width_step * static_cast<double>(rng.below(cfg.divergence_widths));
        }
      }
      break;
    }
  }
  return {std::move(a1), std::move(a2)};
}

/// Verdict before noise.
inline Verdict base_verdict(const AgentPolicy& policy, std::string_view term, double hue) {
  return policy.arc(term).contains(hue) ? Verdict::assent : Verdict::dissent;
}

/// Applies the noise process with explicit uniforms: neutralize with
/// probability neutral_rate, otherwise flip with probability flip_rate.
inline Verdict sim_verdict(const AgentPolicy& policy, std::string_view term, const SimEvent& event,
                           double u_neutral, double u_flip) {
  const Verdict base = base_verdict(policy, term, event.hue);
  if (u_neutral < policy.noise.neutral_rate) return Verdict::neutral;
  if (u_flip < policy.noise.flip_rate)
    return base == Verdict::assent ? Verdict::dissent : Verdict::assent;
  return base;
}

/// Same, with the draws taken from the policy's keyed stream.
inline Verdict sim_verdict(const AgentPolicy& policy, std::string_view term, const SimEvent& event,
                           std::uint64_t epoch) {
  Rng rng(derive_seed(policy.seed, {fnv1a64(term), fnv1a64(event.id.str()), epoch}));
  const double u1 = rng.uniform();
  const double u2 = rng.uniform();
  return sim_verdict(policy, term, event, u1, u2);
}

inline AgentPolicy inject_drift(AgentPolicy policy, std::string_view term, double magnitude) {
  auto& arc = policy.arc(term);
  double c = std::fmod(arc.center + magnitude, 360.0);
  if (c < 0) c += 360.0;
  arc.center = c;
  return policy;
}

/// Exact fraction of the circle on which exactly one of two arcs holds,
/// i.e. the pre-noise contradiction probability under uniform hues.
inline double disagreement_mass(const Arc& a, const Arc& b) {
  std::vector<double> cuts{0.0, 360.0};
  for (const Arc* arc : {&a, &b}) {
    if (arc->half_width >= 180.0) continue;
    for (double x : {arc->center - arc->half_width, arc->center + arc->half_width}) {
      x = std::fmod(x, 360.0);
      if (x < 0) x += 360.0;
      cuts.push_back(x);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  double mass = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i], hi = cuts[i + 1];
    if (hi <= lo) continue;
    const double mid = 0.5 * (lo + hi);
    if (a.contains(mid) != b.contains(mid)) mass += hi - lo;
  }
  return mass / 360.0;
}

/// Contradiction probability per eligible comparison once both agents'
/// flip noise is applied, given pre-noise disagreement q.
inline double noisy_contradiction(double q, double flip1, double flip2) {
  const double same_flip = flip1 * flip2 + (1 - flip1) * (1 - flip2);
  return q * same_flip + (1 - q) * (1 - same_flip);
}

/// In-process provider backed by an AgentPolicy.
class SimProvider final : public VerdictProvider {
 public:
  explicit SimProvider(AgentPolicy policy) : policy_(std::move(policy)) {}

  const std::string& id() const override { return policy_.agent; }

  Verdict verdict(std::string_view term, const Event& event, std::uint64_t epoch) override {
    auto hue = parse_hue_content(event.content);
    if (!hue) throw ProviderError(ErrorKind::provider, "event " + event.id.str() + " has no hue");
    return sim_verdict(policy_, term, SimEvent{event.id, *hue}, epoch);
  }

  std::optional<nlohmann::json> export_policy(std::string_view term) const override {
    const auto& a = policy_.arc(term);
    return nlohmann::json{{"center", a.center}, {"half_width", a.half_width}};
  }

  /// Copies the arc; this agent's noise process and seed are kept.
  bool adopt_policy(std::string_view term, const nlohmann::json& rule) override {
    if (!rule.contains("center") || !rule.contains("half_width")) return false;
    auto& a = policy_.arc(term);
    a.center = rule.at("center").get<double>();
    a.half_width = rule.at("half_width").get<double>();
    return true;
  }

  const AgentPolicy& policy() const { return policy_; }
  void set_policy(AgentPolicy p) { policy_ = std::move(p); }

 private:
  AgentPolicy policy_;
};

// JSON --------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const AgentPolicy& p) {
  nlohmann::json rules = nlohmann::json::array();
  for (const auto& r : p.rules)
    rules.push_back({{"term", r.term}, {"center", r.arc.center}, {"half_width", r.arc.half_width}});
  j = nlohmann::json{{"agent", p.agent},
                     {"seed", p.seed},
                     {"noise", {{"neutral_rate", p.noise.neutral_rate},
                                {"flip_rate", p.noise.flip_rate}}},
                     {"rules", rules}};
}

inline void from_json(const nlohmann::json& j, AgentPolicy& p) {
  j.at("agent").get_to(p.agent);
  j.at("seed").get_to(p.seed);
  j.at("noise").at("neutral_rate").get_to(p.noise.neutral_rate);
  j.at("noise").at("flip_rate").get_to(p.noise.flip_rate);
  p.rules.clear();
  for (const auto& r : j.at("rules"))
    p.rules.push_back({r.at("term").get<std::string>(),
                       Arc{r.at("center").get<double>(), r.at("half_width").get<double>()}});
}

inline void to_json(nlohmann::json& j, const SimEvent& e) {
  j = nlohmann::json{{"pei", e.id.str()}, {"hue", e.hue}, {"content", hue_content(e.hue)}};
}

}  // namespace semcert::sim

#endif  // SEMCERT_SIMAGENTS_HPP
