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


// Serial reference kernels against their OpenMP versions: the batched
// cosine matrix and the TF-IDF neighbour counts.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tplscan/embedding.hpp"
#include "tplscan/kernels.hpp"

using namespace tplscan;

namespace {

using Clock = std::chrono::steady_clock;

PackedRows random_rows(std::mt19937_64& rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<Embedding> v;
  v.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<double> x(cols);
    for (auto& e : x) e = g(rng);
    v.push_back(Embedding::unit(std::move(x)));
  }
  return pack(v);
}

// Best of `reps` wall-clock runs, in seconds.
template <typename F>
double best_of(int reps, F&& f) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto start = Clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(Clock::now() - start).count());
  }
  return best;
}

void report(const char* kernel, int threads, double serial, double parallel, bool same) {
  std::printf("%-18s %7d %12.4f %12.4f %8.2fx  %s\n", kernel, threads, serial, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"benchmark serial and OpenMP similarity kernels"};
  std::size_t queries = 1000;
  std::size_t keys = 4000;
  std::size_t features = 4000;
  std::size_t libraries = 40;
  std::size_t dim = kDefaultDim;
  int reps = 3;
  std::vector<int> threads;
  std::uint64_t seed = 1;
  app.add_option("--queries", queries, "binary functions");
  app.add_option("--keys", keys, "library features");
  app.add_option("--features", features, "repository features for neighbour counting");
  app.add_option("--libraries", libraries, "libraries the features are spread over");
  app.add_option("--dim", dim, "embedding dimension");
  app.add_option("--reps", reps, "repetitions per measurement");
  app.add_option("--threads", threads, "thread counts to try (default: 1..max)");
  app.add_option("--seed", seed, "random seed");
  CLI11_PARSE(app, argc, argv);

  if (threads.empty())
    for (int t = 1; t <= kernels::max_threads(); t *= 2) threads.push_back(t);

  std::mt19937_64 rng(seed);
  const PackedRows q = random_rows(rng, queries, dim);
  const PackedRows k = random_rows(rng, keys, dim);
  const PackedRows f = random_rows(rng, features, dim);
  std::vector<std::size_t> library_of(features);
  for (std::size_t i = 0; i < features; ++i) library_of[i] = i % libraries;

  std::printf("cosine %zux%zu, neighbours %zu features in %zu libraries, dim %zu, best of %d\n",
              queries, keys, features, libraries, dim, reps);
  std::printf("%-18s %7s %12s %12s %9s\n", "kernel", "threads", "serial s", "omp s", "speedup");

  SimilarityMatrix serial_m{queries, keys, std::vector<double>(queries * keys)};
  const double cos_serial =
      best_of(reps, [&] { kernels::cosine_rows_serial(q, k, 0, queries, serial_m); });
  NeighbourCounts serial_n;
  const double nb_serial = best_of(reps, [&] {
    serial_n = kernels::count_neighbours_serial(f, library_of, libraries, 0.8);
  });

  for (int t : threads) {
    kernels::set_threads(t);
    SimilarityMatrix omp_m{queries, keys, std::vector<double>(queries * keys)};
    const double cos_omp = best_of(reps, [&] { kernels::cosine_rows_omp(q, k, 0, queries, omp_m); });
    report("cosine_rows", t, cos_serial, cos_omp, omp_m.data == serial_m.data);
    NeighbourCounts omp_n;
    const double nb_omp = best_of(reps, [&] {
      omp_n = kernels::count_neighbours_omp(f, library_of, libraries, 0.8);
    });
    report("count_neighbours", t, nb_serial, nb_omp,
           omp_n.same_library == serial_n.same_library &&
               omp_n.other_libraries == serial_n.other_libraries);
  }
  return 0;
}
