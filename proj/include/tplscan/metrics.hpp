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

// Source-level complexity metrics carried over to disassembled functions.
// Operators are instruction mnemonics, operands are the raw operand strings,
// nodes are basic blocks.

#ifndef TPLSCAN_METRICS_HPP
#define TPLSCAN_METRICS_HPP

#include <cstdint>

#include "tplscan/interchange.hpp"

namespace tplscan {

struct ComplexityProfile {
  double hv = 0.0;        // Halstead volume
  std::int64_t loc = 1;   // instruction count
  std::int64_t cc = 1;    // cyclomatic complexity, clamped to >= 1
  double mi = 0.0;        // maintainability index

  bool operator==(const ComplexityProfile&) const = default;
};

// N * log2(n) with N = total mnemonics + total operands and n = distinct
// mnemonics + distinct operand strings. Zero when n == 1.
double halstead_volume(const FunctionRecord& f);

std::int64_t lines_of_code(const FunctionRecord& f);

// E - N + 2, clamped to a minimum of 1 for disconnected graphs.
std::int64_t cyclomatic_complexity(const FunctionRecord& f);

// 171 - 5.2 ln(max(hv, 1)) - 0.23 cc - 16.2 ln(loc).
double maintainability_index(double hv, std::int64_t cc, std::int64_t loc);

ComplexityProfile compute_profile(const FunctionRecord& f);

}  // namespace tplscan

#endif  // TPLSCAN_METRICS_HPP
