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

// Dense similarity kernels. Every kernel has a serial reference version and
// an OpenMP version; both evaluate each cell with the same arithmetic in the
// same order, so their outputs are bitwise identical.

#ifndef TPLSCAN_KERNELS_HPP
#define TPLSCAN_KERNELS_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

namespace tplscan {

enum class ExecPolicy { kSerial, kParallel };

// Row-major vectors plus their Euclidean norms.
struct PackedRows {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<double> norms;

  const double* row(std::size_t i) const { return data.data() + i * cols; }
};

struct SimilarityMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
};

// Per-feature neighbour counts used by TF-IDF weighting.
struct NeighbourCounts {
  std::vector<std::int64_t> same_library;    // includes the feature itself
  std::vector<std::int64_t> other_libraries; // distinct libraries != own
};

namespace kernels {

// Fills rows [row_begin, row_end) of `out` with cosine similarities.
void cosine_rows_serial(const PackedRows& queries, const PackedRows& keys,
                        std::size_t row_begin, std::size_t row_end, SimilarityMatrix& out);
void cosine_rows_omp(const PackedRows& queries, const PackedRows& keys,
                     std::size_t row_begin, std::size_t row_end, SimilarityMatrix& out);

// For each feature i: the number of features g in its own library with
// cosine(i, g) >= threshold (i itself always counted), and the number of
// other libraries holding at least one such g. `library_of[i]` is in
// [0, library_count).
NeighbourCounts count_neighbours_serial(const PackedRows& features,
                                        const std::vector<std::size_t>& library_of,
                                        std::size_t library_count, double threshold);
NeighbourCounts count_neighbours_omp(const PackedRows& features,
                                     const std::vector<std::size_t>& library_of,
                                     std::size_t library_count, double threshold);

inline double cosine_cell(const PackedRows& a, std::size_t i, const PackedRows& b,
                          std::size_t j) {
  const double* x = a.row(i);
  const double* y = b.row(j);
  double dot = 0.0;
  for (std::size_t k = 0; k < a.cols; ++k) dot += x[k] * y[k];
  return dot / (a.norms[i] * b.norms[j]);
}

int max_threads();
void set_threads(int n);

}  // namespace kernels

NeighbourCounts count_neighbours(const PackedRows& features,
                                 const std::vector<std::size_t>& library_of,
                                 std::size_t library_count, double threshold,
                                 ExecPolicy policy = ExecPolicy::kParallel);

}  // namespace tplscan

#endif  // TPLSCAN_KERNELS_HPP
