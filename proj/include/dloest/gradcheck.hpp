// Copyright 2026 The dloest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "dloest/numkit/gradcheck.hpp"

namespace dloest::gradcheck {

// Finite-difference audit of the whole stack: one entry per tape op, the
// encoder layers, both heads, and the composed toy network (32 points,
// 4 nodes) trained end to end through the orientation-symmetric loss.
struct SuiteResult {
  std::vector<numkit::GradCheckReport> reports;
  double max_rel_err = 0.0;
  bool pass = false;
};

std::vector<std::string> entry_names();

// corrupt_entry (a name from entry_names) perturbs that entry's analytic
// gradient so callers can prove the audit catches wrong gradients.
SuiteResult run_suite(std::uint64_t seed, const std::string& corrupt_entry = "");

}  // namespace dloest::gradcheck
