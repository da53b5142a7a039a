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

#ifndef SEMCERT_SEMCERT_HPP
#define SEMCERT_SEMCERT_HPP

#include "semcert/adapter.hpp"
#include "semcert/certification.hpp"
#include "semcert/digest.hpp"
#include "semcert/experiments.hpp"
#include "semcert/guard.hpp"
#include "semcert/ledger.hpp"
#include "semcert/lifecycle.hpp"
#include "semcert/rng.hpp"
#include "semcert/simagents.hpp"
#include "semcert/stats.hpp"
#include "semcert/types.hpp"

#endif  // SEMCERT_SEMCERT_HPP
