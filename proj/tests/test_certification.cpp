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

#include <gtest/gtest.h>

#include "semcert/adapter.hpp"
#include "semcert/certification.hpp"
#include "semcert/experiments.hpp"
#include "semcert/simagents.hpp"
#include "test_support.hpp"

namespace {

using namespace semcert;
using adapter::TableProvider;
using adapter::VerdictTable;

std::vector<Event> make_events(std::size_t n, const std::string& prefix = "e") {
  std::vector<Event> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({EventId(prefix + std::to_string(i)), ""});
  return out;
}

/// Provider that fails on one term.
class FailingOn final : public VerdictProvider {
 public:
  FailingOn(std::string id, std::string term) : id_(std::move(id)), term_(std::move(term)) {}
  const std::string& id() const override { return id_; }
  Verdict verdict(std::string_view term, const Event&, std::uint64_t) override {
    if (term == term_) throw ProviderError(ErrorKind::timeout, "no answer");
    return Verdict::assent;
  }

 private:
  std::string id_, term_;
};

TEST(Classify, InclusiveThresholds) {
  const ProtocolParams p{0.05, 0.05, 0.10};
  EXPECT_EQ(classify(0.05, 0.10, p), CertStatus::certified);
  EXPECT_EQ(classify(0.0500001, 0.5, p), CertStatus::rejected_bound);
  EXPECT_EQ(classify(0.01, 0.0999, p), CertStatus::rejected_coverage);
  EXPECT_EQ(classify(0.9, 0.0, p), CertStatus::rejected_both);
}

TEST(Params, Validation) {
  EXPECT_NO_THROW((ProtocolParams{0.05, 0.05, 0.1}.validate()));
  EXPECT_THROW((ProtocolParams{-0.1, 0.05, 0.1}.validate()), Error);
  EXPECT_THROW((ProtocolParams{0.05, 0.0, 0.1}.validate()), Error);
  EXPECT_THROW((ProtocolParams{0.05, 0.05, 1.5}.validate()), Error);
}

TEST(AuditPlan, SampleProperties) {
  const auto pool = make_events(400);
  const std::vector<std::string> vocab{"a", "b", "c"};
  const auto plan = sample_audit_plan(pool, vocab, 120, 9);
  ASSERT_EQ(plan.terms.size(), 3u);
  for (const auto& tp : plan.terms) {
    EXPECT_EQ(tp.events.size(), 120u);
    std::set<std::string> ids;
    for (const auto& e : tp.events) ids.insert(e.id.str());
    EXPECT_EQ(ids.size(), 120u) << "sampled with replacement";
  }
  EXPECT_NE(plan.terms[0].events.front().id, plan.terms[1].events.front().id);

  // a term's sample does not depend on the rest of the vocabulary
  const std::vector<std::string> other{"z", "c"};
  const auto plan2 = sample_audit_plan(pool, other, 120, 9);
  for (std::size_t i = 0; i < 120; ++i)
    EXPECT_EQ(plan2.terms[1].events[i].id, plan.terms[2].events[i].id);

  EXPECT_THROW(sample_audit_plan(pool, vocab, 401, 9), Error);
  EXPECT_NO_THROW(sample_audit_plan(pool, vocab, 400, 9));
}

TEST(Audit, TalliesAndLedgerOrder) {
  // 10 events: 0-5 agree, 6-7 contradict, 8 one neutral, 9 both neutral
  VerdictTable t1{"P", Verdict::assent, {}}, t2{"Q", Verdict::assent, {}};
  t2.verdicts["x"]["e6"] = Verdict::dissent;
  t2.verdicts["x"]["e7"] = Verdict::dissent;
  t2.verdicts["x"]["e8"] = Verdict::neutral;
  t1.verdicts["x"]["e9"] = Verdict::neutral;
  t2.verdicts["x"]["e9"] = Verdict::neutral;
  TableProvider a1(t1), a2(t2);
  Ledger l;
  const auto events = make_events(10);
  const auto tally = audit_term(a1, a2, "x", events, l, 3);
  EXPECT_EQ(tally, (TermTally{9, 8, 2}));
  ASSERT_EQ(l.size(), 20u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(l[2 * i].agent, "P");
    EXPECT_EQ(l[2 * i + 1].agent, "Q");
    EXPECT_EQ(l[2 * i].event, events[i].id);
    EXPECT_EQ(l[2 * i].epoch, 3u);
  }
}

TEST(Certify, ExpectedCertificates) {
  VerdictTable t1{"P", Verdict::assent, {}}, t2{"Q", Verdict::assent, {}};
  for (int i = 0; i < 20; ++i) t2.verdicts["noisy"]["e" + std::to_string(i)] = Verdict::dissent;
  for (int i = 0; i < 100; ++i) t2.verdicts["sparse"]["e" + std::to_string(i)] = Verdict::neutral;
  TableProvider a1(t1), a2(t2);
  Ledger l;
  const auto pool = make_events(200);
  const std::vector<std::string> vocab{"clean", "noisy", "sparse"};
  const auto core = certify(a1, a2, sample_audit_plan(pool, vocab, 200, 1), {0.05, 0.05, 0.6}, l, 0);
  EXPECT_EQ(core.core, (std::set<std::string>{"clean"}));
  EXPECT_EQ(core.certificates.at("clean").tally, (TermTally{200, 200, 0}));
  EXPECT_EQ(core.certificates.at("clean").u, wilson_upper(0, 200, 0.05));
  EXPECT_EQ(core.certificates.at("noisy").status, CertStatus::rejected_bound);
  EXPECT_EQ(core.certificates.at("sparse").status, CertStatus::rejected_coverage);
  EXPECT_DOUBLE_EQ(core.certificates.at("sparse").s, 0.5);
  EXPECT_EQ(core.certificates.at("clean").ledger_span, (std::pair<std::uint64_t, std::uint64_t>{0, 399}));
  EXPECT_EQ(core.certificates.at("noisy").ledger_span, (std::pair<std::uint64_t, std::uint64_t>{400, 799}));
}

TEST(Certify, ProviderFailureIsPerTerm) {
  TableProvider a1(VerdictTable{"P", Verdict::assent, {}});
  FailingOn a2("Q", "b");
  Ledger l;
  const auto pool = make_events(50);
  const std::vector<std::string> vocab{"a", "b", "c"};
  const auto core = certify(a1, a2, sample_audit_plan(pool, vocab, 50, 1), {0.1, 0.05, 0.1}, l, 0);
  EXPECT_EQ(core.core, (std::set<std::string>{"a", "c"}));
  EXPECT_TRUE(core.errors.contains("b"));
  EXPECT_FALSE(core.certificates.contains("b"));
}

TEST(Certify, ZeroEligibleNeverCertifies) {
  TableProvider a1(VerdictTable{"P", Verdict::neutral, {}});
  TableProvider a2(VerdictTable{"Q", Verdict::neutral, {}});
  Ledger l;
  const auto pool = make_events(30);
  const std::vector<std::string> vocab{"a"};
  const auto core = certify(a1, a2, sample_audit_plan(pool, vocab, 30, 1), {0.5, 0.05, 0.0}, l, 0);
  EXPECT_TRUE(core.core.empty());
  EXPECT_EQ(core.certificates.at("a").u, 1.0);
  EXPECT_EQ(core.certificates.at("a").s, 0.0);
}

CertifiedCore sim_certify(std::uint64_t seed, sim::Condition cond, Ledger& l) {
  const auto events = sim::to_events(sim::gen_events(400, seed));
  auto [p1, p2] = sim::gen_policies(cond, seed);
  sim::SimProvider a1(p1), a2(p2);
  const auto& vocab = sim::color_vocabulary();
  return certify(a1, a2, sample_audit_plan(events, vocab, 192, seed), {}, l, 0);
}

TEST(Replay, EqualsLiveCertificationBitExact) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    for (auto cond : {sim::Condition::NoiseOnly, sim::Condition::ModerateDrift, sim::Condition::HighDivergence}) {
      Ledger l;
      const auto live = sim_certify(seed, cond, l);
      const auto replayed = replay_certification(l, {}, 0);
      ASSERT_EQ(nlohmann::json(replayed).dump(), nlohmann::json(live).dump()) << seed;
    }
  }
}

TEST(Replay, RejectsTamperedLedger) {
  Ledger l;
  (void)sim_certify(1, sim::Condition::NoiseOnly, l);
  auto entries = l.snapshot();
  entries[100].verdict = Verdict::neutral;
  try {
    (void)replay_certification(entries, {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ledger_invalid);
  }
}

TEST(Replay, RejectsOrphanedVerdict) {
  Ledger l;
  l.append({"A1", EventId("e1"), "t", Verdict::assent, 0});
  l.append({"A2", EventId("e1"), "t", Verdict::assent, 0});
  l.append({"A1", EventId("e2"), "t", Verdict::assent, 0});
  try {
    (void)replay_certification(l, {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::replay);
    EXPECT_NE(std::string(e.what()).find("seq 2"), std::string::npos);
  }
}

TEST(Replay, RejectsThirdAgent) {
  Ledger l;
  l.append({"A1", EventId("e1"), "t", Verdict::assent, 0});
  l.append({"A2", EventId("e1"), "t", Verdict::assent, 0});
  l.append({"A1", EventId("e2"), "t", Verdict::assent, 0});
  l.append({"A3", EventId("e2"), "t", Verdict::assent, 0});
  EXPECT_THROW((void)replay_certification(l, {}, 0), Error);
}

TEST(Replay, SelectsEpoch) {
  Ledger l;
  for (std::uint64_t ep : {0u, 1u}) {
    for (int i = 0; i < 40; ++i) {
      l.append({"A1", EventId("e" + std::to_string(i)), "t", Verdict::assent, ep});
      l.append({"A2", EventId("e" + std::to_string(i)), "t", ep == 0 ? Verdict::assent : Verdict::dissent, ep});
    }
  }
  EXPECT_TRUE(replay_certification(l, {0.2, 0.05, 0.1}, 0).contains("t"));
  EXPECT_FALSE(replay_certification(l, {0.2, 0.05, 0.1}, 1).contains("t"));
  EXPECT_EQ(replay_certification(l, {}, 1).certificates.at("t").ledger_span,
            (std::pair<std::uint64_t, std::uint64_t>{80, 159}));
}

TEST(StimulusMeaningTest, PartitionsLatestVerdicts) {
  Ledger l;
  l.append({"A1", EventId("e1"), "t", Verdict::assent, 0});
  l.append({"A1", EventId("e2"), "t", Verdict::dissent, 0});
  l.append({"A1", EventId("e3"), "t", Verdict::neutral, 0});
  l.append({"A2", EventId("e1"), "t", Verdict::dissent, 0});
  l.append({"A1", EventId("e1"), "t", Verdict::neutral, 1});
  auto m = stimulus_meaning(l.entries(), "A1", "t");
  EXPECT_EQ(m.positive, std::set<EventId>{});
  EXPECT_EQ(m.negative, std::set<EventId>{EventId("e2")});
  EXPECT_EQ(m.neutral, (std::set<EventId>{EventId("e1"), EventId("e3")}));
  auto m0 = stimulus_meaning(l.entries(), "A1", "t", std::pair<std::uint64_t, std::uint64_t>{0, 0});
  EXPECT_EQ(m0.positive, std::set<EventId>{EventId("e1")});
}

TEST(Json, CoreRoundTrip) {
  Ledger l;
  auto core = sim_certify(4, sim::Condition::ModerateDrift, l);
  core.errors["x"] = "boom";
  core.revoked["y"] = 3;
  const auto j = nlohmann::json(core);
  EXPECT_EQ(j.get<CertifiedCore>(), core);
  auto bad = j;
  bad["core"] = nlohmann::json::array({"nonexistent"});
  EXPECT_THROW((void)bad.get<CertifiedCore>(), Error);
}

// Exact probability that a noise-only term certifies at the default
// parameters, by enumeration over (both decided, one decided, contradictions).
double noise_only_pass_probability(std::uint64_t n, double neutral, double flip, const ProtocolParams& p) {
  const double pb = (1 - neutral) * (1 - neutral);
  const double po = 2 * neutral * (1 - neutral);
  const double pn = neutral * neutral;
  const double q = 2 * flip * (1 - flip);
  std::vector<double> lf(n + 1, 0.0);
  for (std::uint64_t i = 1; i <= n; ++i) lf[i] = lf[i - 1] + std::log(static_cast<double>(i));
  double total = 0;
  for (std::uint64_t b = 0; b <= n; ++b) {
    for (std::uint64_t o = 0; b + o <= n; ++o) {
      const std::uint64_t z = n - b - o;
      const double s = static_cast<double>(b) / static_cast<double>(std::max<std::uint64_t>(b + o, 1));
      if (s < p.rho_min) continue;
      const double lm = lf[n] - lf[b] - lf[o] - lf[z] + static_cast<double>(b) * std::log(pb) +
                        static_cast<double>(o) * std::log(po) + static_cast<double>(z) * std::log(pn);
      const double pm = std::exp(lm);
      if (pm < 1e-300) continue;
      for (std::uint64_t c = 0; c <= b; ++c) {
        if (wilson_upper(c, b, p.delta) > p.tau) break;
        const double lc = lf[b] - lf[c] - lf[b - c] + static_cast<double>(c) * std::log(q) +
                          static_cast<double>(b - c) * std::log1p(-q);
        total += pm * std::exp(lc);
      }
    }
  }
  return total;
}

TEST(CertifyOracle, NoiseOnlyPassRateMatchesExactEnumeration) {
  const double p = noise_only_pass_probability(192, 0.05, 0.01, {});
  EXPECT_NEAR(p, 0.626, 0.005);
  exp::StaticConfig cfg;
  cfg.threads = 1;
  const auto res = exp::run_static(sim::Condition::NoiseOnly, 400, cfg, 2024);
  EXPECT_NEAR(res.summary.mean_core / 6.0, p, 0.035);
}

}  // namespace
