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

// Scripted agent speaking the verdict line protocol on stdin/stdout.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "semcert/adapter.hpp"

using namespace semcert;
using namespace semcert::adapter;

int main(int argc, char** argv) {
  CLI::App app{"mock verdict agent"};
  app.option_defaults()->always_capture_default();
  std::string mode = "always", verdict = "assent", table_path, rationale;
  std::size_t batch = 2;
  app.add_option("--mode", mode, "Scripted behaviour")
      ->check(CLI::IsMember({"always", "table", "garbage", "silent", "wrong-id", "reorder", "exit"}));
  app.add_option("--verdict", verdict, "Verdict for --mode always");
  app.add_option("--table", table_path, "Verdict table JSON for --mode table");
  app.add_option("--batch", batch, "Requests buffered then answered in reverse (reorder)");
  app.add_option("--rationale", rationale, "Rationale text attached to every response");
  CLI11_PARSE(app, argc, argv);

  const auto fixed = parse_verdict(verdict);
  if (!fixed) {
    std::cerr << "invalid --verdict\n";
    return 2;
  }
  VerdictTable table;
  if (mode == "table") {
    try {
      table = read_json_file(table_path).get<VerdictTable>();
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return 3;
    }
  }

  const auto answer = [&](const VerdictRequest& r) {
    VerdictResponse resp{r.id, *fixed, std::nullopt};
    if (mode == "table") resp.verdict = table.lookup(r.term, r.pei);
    if (!rationale.empty()) resp.rationale = rationale;
    return resp;
  };

  std::vector<VerdictRequest> held;
  std::string line;
  while (std::getline(std::cin, line)) {
    VerdictRequest r;
    try {
      r = decode_request(line);
    } catch (const std::exception& e) {
      std::cerr << e.what() << '\n';
      return 3;
    }
    if (mode == "silent") continue;
    if (mode == "exit") return 0;
    if (mode == "garbage") {
      std::cout << nlohmann::json{{"id", r.id}, {"verdict", "maybe"}}.dump() << std::endl;
    } else if (mode == "wrong-id") {
      auto resp = answer(r);
      resp.id += 1000;
      std::cout << encode_response(resp) << std::endl;
    } else if (mode == "reorder") {
      held.push_back(r);
      if (held.size() >= batch) {
        for (auto it = held.rbegin(); it != held.rend(); ++it)
          std::cout << encode_response(answer(*it)) << '\n';
        std::cout.flush();
        held.clear();
      }
    } else {
      std::cout << encode_response(answer(r)) << std::endl;
    }
  }
  return 0;
}
