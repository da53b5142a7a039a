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
#include "semcert/lifecycle.hpp"
#include "semcert/simagents.hpp"

namespace {

using namespace semcert;

struct Fixture {
  sim::SimProvider a1;
  sim::SimProvider a2;
  Ledger ledger;
  CertifiedCore core;
  std::vector<Event> audit;
};

Fixture make_fixture(std::uint64_t seed, sim::Condition cond = sim::Condition::NoiseOnly) {
  auto [p1, p2] = sim::gen_policies(cond, seed);
  Fixture f{sim::SimProvider(p1), sim::SimProvider(p2), Ledger{}, {}, {}};
  f.audit = sim::to_events(sim::gen_events(400, seed));
  f.core = certify(f.a1, f.a2, sample_audit_plan(f.audit, sim::color_vocabulary(), 216, seed), {},
                   f.ledger, 0);
  return f;
}

std::vector<Event> fresh(std::size_t n, std::uint64_t seed) {
  return sim::to_events(sim::gen_events(n, derive_seed(seed, {0xf5e5})));
}

TEST(Recertify, NeverAddsTerms) {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    auto f = make_fixture(seed, sim::Condition::ModerateDrift);
    auto [next, outcomes] = recertify(f.core, f.a1, f.a2, fresh(500, seed), {}, f.ledger, 1, {400, seed});
    for (const auto& t : next.core) EXPECT_TRUE(f.core.contains(t)) << t;
    EXPECT_EQ(outcomes.size(), f.core.core.size());
    EXPECT_EQ(next.epoch, 1u);
  }
}

TEST(Recertify, RevokesADriftedTerm) {
  auto f = make_fixture(3);
  ASSERT_FALSE(f.core.core.empty());
  const std::string term = *f.core.core.begin();
  f.a2.set_policy(sim::inject_drift(f.a2.policy(), term, 40));
  auto [next, outcomes] = recertify(f.core, f.a1, f.a2, fresh(1000, 3), {}, f.ledger, 1, {1000, 3});
  EXPECT_FALSE(next.contains(term));
  EXPECT_EQ(next.revoked.at(term), 1u);
  for (const auto& o : outcomes) {
    if (o.term == term) {
      EXPECT_EQ(o.action, RecertAction::revoked_bound);
      EXPECT_GT(o.u_prime, 0.05);
    } else {
      EXPECT_EQ(o.action, RecertAction::retained) << o.term;
      EXPECT_EQ(next.certificates.at(o.term).epoch, 1u);
    }
  }
  // the fresh audit is on the ledger and replays to the same certificates
  const auto replayed = replay_certification(f.ledger, {}, 1);
  for (const auto& o : outcomes)
    EXPECT_EQ(replayed.certificates.at(o.term), next.certificates.at(o.term));
}

TEST(Recertify, RejectsStaleEpochAndReusedEvents) {
  auto f = make_fixture(4);
  EXPECT_THROW(recertify(f.core, f.a1, f.a2, fresh(500, 4), {}, f.ledger, 0, {100, 1}), Error);
  try {
    (void)recertify(f.core, f.a1, f.a2, f.audit, {}, f.ledger, 1, {100, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::config);
  }
}

class Broken final : public VerdictProvider {
 public:
  const std::string& id() const override { return id_; }
  Verdict verdict(std::string_view, const Event&, std::uint64_t) override {
    throw ProviderError(ErrorKind::timeout, "down");
  }

 private:
  std::string id_ = "A2";
};

TEST(Recertify, ProviderFailureRevokesConservatively) {
  auto f = make_fixture(5);
  ASSERT_FALSE(f.core.core.empty());
  Broken b;
  auto [next, outcomes] = recertify(f.core, f.a1, b, fresh(300, 5), {}, f.ledger, 1, {100, 1});
  EXPECT_TRUE(next.core.empty());
  for (const auto& o : outcomes) {
    EXPECT_TRUE(o.error);
    EXPECT_TRUE(next.revoked.contains(o.term));
    EXPECT_TRUE(next.errors.contains(o.term));
  }
  EXPECT_NO_THROW((void)nlohmann::json(next).get<CertifiedCore>());
}

TEST(Entrenchment, CountsDecidedVerdicts) {
  Ledger l;
  l.append({"A1", EventId("e1"), "t", Verdict::assent, 0});
  l.append({"A1", EventId("e2"), "t", Verdict::neutral, 0});
  l.append({"A1", EventId("e3"), "t", Verdict::dissent, 3});
  l.append({"A2", EventId("e1"), "t", Verdict::assent, 0});
  l.append({"A1", EventId("e1"), "u", Verdict::assent, 0});
  EXPECT_EQ(entrenchment(l.entries(), "t", "A1"), 2u);
  EXPECT_EQ(entrenchment(l.entries(), "t", "A2"), 1u);
  EXPECT_EQ(entrenchment(l.entries(), "t", "A3"), 0u);

  std::map<std::string, std::uint64_t> counts;
  EntrenchmentCriterion crit;
  EXPECT_EQ(crit.reference_agent(l.entries(), "t", "A2", "A1", counts), "A1");
  EXPECT_EQ(counts.at("A1"), 2u);
  EXPECT_EQ(crit.reference_agent(l.entries(), "zz", "B", "A", counts), "A");  // tie
}

TEST(Renegotiate, RestoresARevokedTerm) {
  auto f = make_fixture(6);
  ASSERT_FALSE(f.core.core.empty());
  const std::string term = *f.core.core.begin();
  f.a2.set_policy(sim::inject_drift(f.a2.policy(), term, 60));
  auto [revoked, _] = recertify(f.core, f.a1, f.a2, fresh(1000, 6), {}, f.ledger, 1, {1000, 1});
  ASSERT_FALSE(revoked.contains(term));

  const auto pool = sim::to_events(sim::gen_events(1000, 777));
  auto o = renegotiate(term, f.a1, f.a2, f.ledger, pool, {}, 2, {1000, 2}, revoked);
  EXPECT_EQ(o.path, RenegotiationPath::revoked);
  EXPECT_TRUE(o.adopted);
  EXPECT_TRUE(o.restored);
  EXPECT_EQ(f.a1.policy().arc(term), f.a2.policy().arc(term));
  const auto restored = apply_renegotiation(revoked, o, 2);
  EXPECT_TRUE(restored.contains(term));
  EXPECT_FALSE(restored.revoked.contains(term));
  EXPECT_EQ(restored.epoch, 2u);
}

TEST(Renegotiate, NeverCertifiedPathAndGuards) {
  auto f = make_fixture(7, sim::Condition::HighDivergence);
  std::string excluded;
  for (const auto& t : sim::color_vocabulary())
    if (!f.core.contains(t)) excluded = t;
  ASSERT_FALSE(excluded.empty());
  const auto pool = sim::to_events(sim::gen_events(1000, 778));
  auto o = renegotiate(excluded, f.a1, f.a2, f.ledger, pool, {}, 1, {1000, 2}, f.core);
  EXPECT_EQ(o.path, RenegotiationPath::never_certified);
  EXPECT_TRUE(o.adopted);
  ASSERT_TRUE(o.certificate.has_value());
  const auto& winner = o.reference_agent == "A1" ? f.a1 : f.a2;
  const auto& loser = o.reference_agent == "A1" ? f.a2 : f.a1;
  EXPECT_EQ(loser.policy().arc(excluded), winner.policy().arc(excluded));
  const auto counts = o.entrenchment_counts;
  EXPECT_GE(counts.at(o.reference_agent), counts.at(o.reference_agent == "A1" ? "A2" : "A1"));

  if (!f.core.core.empty())
    EXPECT_THROW(renegotiate(*f.core.core.begin(), f.a1, f.a2, f.ledger, pool, {}, 2, {10, 1}, f.core), Error);
  EXPECT_THROW(renegotiate(excluded, f.a1, f.a2, f.ledger, pool, {}, 0, {10, 1}, f.core), Error);
}

TEST(Renegotiate, RefusalIsReported) {
  adapter::TableProvider a1(adapter::VerdictTable{"P", Verdict::assent, {}});
  adapter::TableProvider a2(adapter::VerdictTable{"Q", Verdict::dissent, {}});
  Ledger l;
  CertifiedCore core;
  std::vector<Event> pool{{EventId("x"), ""}};
  auto o = renegotiate("t", a1, a2, l, pool, {}, 1, {1, 1}, core);
  EXPECT_FALSE(o.adopted);
  EXPECT_FALSE(o.restored);
  EXPECT_FALSE(o.message.empty());
  EXPECT_TRUE(l.empty());
  const auto same = apply_renegotiation(core, o, 1);
  EXPECT_TRUE(same.certificates.empty());
}

TEST(Json, OutcomeShapes) {
  RecertOutcome r{"red", 0.2, 0.9, RecertAction::revoked_bound, false, ""};
  const nlohmann::json jr = r;
  EXPECT_EQ(jr["action"], "revoked_bound");
  RenegotiationOutcome o;
  o.term = "red";
  const nlohmann::json jo = o;
  EXPECT_TRUE(jo["certificate"].is_null());
  EXPECT_EQ(jo["path"], "never_certified");
}

}  // namespace
