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

// Certifies a simulated agent pair, then compares guarded and unguarded
// disagreement on held-out events.

#include <iostream>

#include "semcert/semcert.hpp"

int main() {
  using namespace semcert;
  const auto events = sim::to_events(sim::gen_events(1000, 42));
  const std::span<const Event> audit(events.data(), 400);
  const std::span<const Event> heldout(events.data() + 400, 600);

  auto [p1, p2] = sim::gen_policies(sim::Condition::ModerateDrift, 42);
  sim::SimProvider a1(std::move(p1)), a2(std::move(p2));
  const auto& vocab = sim::color_vocabulary();

  Ledger ledger;
  const auto plan = sample_audit_plan(audit, vocab, 192, 42);
  const auto core = certify(a1, a2, plan, ProtocolParams{}, ledger, 0);

  for (const auto& [term, cert] : core.certificates)
    std::cout << term << ": u=" << cert.u << " s=" << cert.s << ' ' << to_string(cert.status) << '\n';

  const std::set<std::string> all(vocab.begin(), vocab.end());
  const auto unguarded = measure_disagreement(a1, a2, all, heldout, 1);
  const auto guarded = restrict_report(unguarded, guarded_vocabulary(core, vocab));
  std::cout << "unguarded " << unguarded.rate << ", guarded " << guarded.rate << " over "
            << core.core.size() << " certified terms\n";

  const auto replayed = replay_certification(ledger, ProtocolParams{}, 0);
  std::cout << "ledger entries " << ledger.size() << ", replay matches: " << (replayed == core) << '\n';
}
