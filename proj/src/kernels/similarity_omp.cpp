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

#include <omp.h>

#include <algorithm>
#include <cstdint>
#include <vector>

#include "tplscan/kernels.hpp"

namespace tplscan::kernels {

void cosine_rows_omp(const PackedRows& queries, const PackedRows& keys,
                     std::size_t row_begin, std::size_t row_end, SimilarityMatrix& out) {
  const auto begin = static_cast<std::int64_t>(row_begin);
  const auto end = static_cast<std::int64_t>(row_end);
  const std::size_t ncols = keys.rows;
#pragma omp parallel for schedule(static)
  for (std::int64_t i = begin; i < end; ++i) {
    const auto row = static_cast<std::size_t>(i);
    for (std::size_t j = 0; j < ncols; ++j) out(row, j) = cosine_cell(queries, row, keys, j);
  }
}

NeighbourCounts count_neighbours_omp(const PackedRows& features,
                                     const std::vector<std::size_t>& library_of,
                                     std::size_t library_count, double threshold) {
  const auto n = static_cast<std::int64_t>(features.rows);
  NeighbourCounts out;
  out.same_library.assign(features.rows, 1);
  out.other_libraries.assign(features.rows, 0);
#pragma omp parallel
  {
    std::vector<char> seen(library_count);
#pragma omp for schedule(dynamic, 16)
    for (std::int64_t ii = 0; ii < n; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      std::fill(seen.begin(), seen.end(), 0);
      std::int64_t same = 1, other = 0;
      for (std::size_t j = 0; j < features.rows; ++j) {
        if (j == i || cosine_cell(features, i, features, j) < threshold) continue;
        if (library_of[j] == library_of[i]) {
          ++same;
        } else if (!seen[library_of[j]]) {
          seen[library_of[j]] = 1;
          ++other;
        }
      }
      out.same_library[i] = same;
      out.other_libraries[i] = other;
    }
  }
  return out;
}

int max_threads() { return omp_get_max_threads(); }

void set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

}  // namespace tplscan::kernels

namespace tplscan {

NeighbourCounts count_neighbours(const PackedRows& features,
                                 const std::vector<std::size_t>& library_of,
                                 std::size_t library_count, double threshold,
                                 ExecPolicy policy) {
  if (policy == ExecPolicy::kSerial)
    return kernels::count_neighbours_serial(features, library_of, library_count, threshold);
  return kernels::count_neighbours_omp(features, library_of, library_count, threshold);
}

}  // namespace tplscan
