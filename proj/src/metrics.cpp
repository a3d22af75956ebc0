// Copyright 2026 The tplscan Authors. All Rights Reserved.
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

#include "tplscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace tplscan {

double halstead_volume(const FunctionRecord& f) {
  std::size_t total_ops = 0, total_operands = 0;
  std::unordered_set<std::string> ops, operands;
  for (const auto& b : f.blocks) {
    for (const auto& insn : b.instructions) {
      ++total_ops;
      ops.insert(insn.mnemonic);
      total_operands += insn.operands.size();
      operands.insert(insn.operands.begin(), insn.operands.end());
    }
  }
  const auto length = static_cast<double>(total_ops + total_operands);
  const auto vocabulary = ops.size() + operands.size();
  if (vocabulary <= 1) return 0.0;
  return length * std::log2(static_cast<double>(vocabulary));
}

std::int64_t lines_of_code(const FunctionRecord& f) {
  return static_cast<std::int64_t>(f.instruction_count());
}

std::int64_t cyclomatic_complexity(const FunctionRecord& f) {
  const auto e = static_cast<std::int64_t>(f.edges.size());
  const auto n = static_cast<std::int64_t>(f.blocks.size());
  return std::max<std::int64_t>(1, e - n + 2);
}

double maintainability_index(double hv, std::int64_t cc, std::int64_t loc) {
  return 171.0 - 5.2 * std::log(std::max(hv, 1.0)) - 0.23 * static_cast<double>(cc) -
         16.2 * std::log(static_cast<double>(loc));
}

ComplexityProfile compute_profile(const FunctionRecord& f) {
  ComplexityProfile p;
  p.hv = halstead_volume(f);
  p.loc = lines_of_code(f);
  p.cc = cyclomatic_complexity(f);
  p.mi = maintainability_index(p.hv, p.cc, p.loc);
  return p;
}

}  // namespace tplscan
