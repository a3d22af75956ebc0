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

// Serial reference kernels. The OpenMP versions in similarity_omp.cpp
// are tested against these.

#include <algorithm>
#include <vector>

#include "tplscan/kernels.hpp"

namespace tplscan::kernels {

void cosine_rows_serial(const PackedRows& queries, const PackedRows& keys,
                        std::size_t row_begin, std::size_t row_end, SimilarityMatrix& out) {
  for (std::size_t i = row_begin; i < row_end; ++i)
    for (std::size_t j = 0; j < keys.rows; ++j) out(i, j) = cosine_cell(queries, i, keys, j);
}

NeighbourCounts count_neighbours_serial(const PackedRows& features,
                                        const std::vector<std::size_t>& library_of,
                                        std::size_t library_count, double threshold) {
  const std::size_t n = features.rows;
  NeighbourCounts out;
  out.same_library.assign(n, 1);
  out.other_libraries.assign(n, 0);
  std::vector<char> seen(library_count);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || cosine_cell(features, i, features, j) < threshold) continue;
      if (library_of[j] == library_of[i]) {
        ++out.same_library[i];
      } else if (!seen[library_of[j]]) {
        seen[library_of[j]] = 1;
        ++out.other_libraries[i];
      }
    }
  }
  return out;
}

}  // namespace tplscan::kernels
