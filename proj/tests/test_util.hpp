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


// Random instance generators and small builders shared by the tests.

#ifndef TPLSCAN_TESTS_TEST_UTIL_HPP
#define TPLSCAN_TESTS_TEST_UTIL_HPP

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tplscan/detector.hpp"
#include "tplscan/embedding.hpp"
#include "tplscan/interchange.hpp"
#include "tplscan/repository.hpp"

namespace tplscan::testing {

using Rand = std::mt19937_64;

inline std::size_t pick(Rand& r, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(r);
}

inline double uniform(Rand& r, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(r);
}

// Builds a single-block function from {mnemonic, operands...} rows.
inline FunctionRecord make_function(const std::string& name,
                                    const std::vector<std::vector<std::string>>& rows) {
  FunctionRecord f;
  f.name = name;
  BasicBlock b;
  for (const auto& row : rows) b.instructions.push_back({row[0], {row.begin() + 1, row.end()}});
  f.blocks.push_back(std::move(b));
  return f;
}

// A function with the given block sizes and edge list; instruction content
// is filler.
inline FunctionRecord make_cfg(const std::string& name, const std::vector<std::size_t>& sizes,
                               const std::vector<std::pair<int, int>>& edges) {
  FunctionRecord f;
  f.name = name;
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    BasicBlock block;
    block.id = static_cast<std::int64_t>(b);
    for (std::size_t k = 0; k < sizes[b]; ++k)
      block.instructions.push_back({"add", {"rax", std::to_string(k)}});
    f.blocks.push_back(std::move(block));
  }
  for (auto [from, to] : edges) f.edges.push_back({from, to});
  return f;
}

inline std::string random_token(Rand& r) {
  static const std::vector<std::string> kPool = {
      "rax", "rbx", "ecx", "0x10", "0x20", "42", "[rsp+8]", "qword ptr [rip+0x1000]",
      "memcpy", ".L3", "sub_401000", "x0", "w1", "#4", "\"quoted\"", "back\\slash",
      "caf\xc3\xa9", "tab\there", ""};
  return kPool[pick(r, kPool.size())];
}

inline FunctionRecord random_function(Rand& r, const std::string& name) {
  static const std::vector<std::string> kMnemonics = {"mov", "add", "sub", "xor", "cmp", "jne",
                                                      "call", "ret", "push", "lea", "ldr", "bl"};
  static const std::vector<std::string> kSections = {".text", ".text", ".text", ".plt",
                                                     "extern", ".init", ".fini", ".text.hot"};
  FunctionRecord f;
  f.name = name;
  f.section = kSections[pick(r, kSections.size())];
  f.is_export = pick(r, 2) == 1;
  const std::size_t nblocks = 1 + pick(r, 5);
  for (std::size_t b = 0; b < nblocks; ++b) {
    BasicBlock block;
    // Non-contiguous, possibly negative ids.
    block.id = static_cast<std::int64_t>(b * 3) - 2;
    const std::size_t len = 1 + pick(r, 6);
    for (std::size_t k = 0; k < len; ++k) {
      Instruction insn{kMnemonics[pick(r, kMnemonics.size())], {}};
      const std::size_t nops = pick(r, 4);
      for (std::size_t o = 0; o < nops; ++o) insn.operands.push_back(random_token(r));
      block.instructions.push_back(std::move(insn));
    }
    f.blocks.push_back(std::move(block));
  }
  const std::size_t nedges = pick(r, 2 * nblocks);
  for (std::size_t e = 0; e < nedges; ++e)
    f.edges.push_back({f.blocks[pick(r, nblocks)].id, f.blocks[pick(r, nblocks)].id});
  return f;
}

inline BinaryDocument random_document(Rand& r, std::size_t max_functions) {
  BinaryDocument doc;
  doc.binary_id = "bin-" + std::to_string(r() % 100000) + random_token(r);
  doc.kind = pick(r, 2) ? BinaryKind::kTpl : BinaryKind::kTarget;
  const std::size_t n = pick(r, max_functions + 1);
  for (std::size_t i = 0; i < n; ++i)
    doc.functions.push_back(random_function(r, "fn_" + std::to_string(i) + "|" + random_token(r)));
  return doc;
}

inline std::vector<double> random_vector(Rand& r, std::size_t dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  for (auto& x : v) x = g(r);
  return v;
}

inline Embedding random_embedding(Rand& r, std::size_t dim) {
  return Embedding(random_vector(r, dim));
}

inline ComplexityProfile random_profile(Rand& r) {
  ComplexityProfile p;
  p.hv = uniform(r, 0.0, 500.0);
  p.loc = 1 + static_cast<std::int64_t>(pick(r, 200));
  p.cc = 1 + static_cast<std::int64_t>(pick(r, 20));
  p.mi = uniform(r, -20.0, 171.0);
  return p;
}

inline TplRepository random_repository(Rand& r, std::size_t dim) {
  TplRepository repo;
  repo.config.theta1 = uniform(r, 0.5, 1.0);
  repo.config.theta2 = uniform(r, 0.05, 1.0);
  repo.config.dim = dim;
  repo.config.embedder_id = "emb-" + random_token(r);
  repo.config.embedder_seed = r();
  repo.config.stages = {pick(r, 2) == 1, pick(r, 2) == 1, pick(r, 2) == 1};
  const std::size_t libs = 1 + pick(r, 4);
  for (std::size_t l = 0; l < libs; ++l) {
    const std::string id = "lib" + std::to_string(l) + random_token(r);
    auto& features = repo.libraries[id];
    const std::size_t n = pick(r, 5);
    for (std::size_t i = 0; i < n; ++i) {
      FunctionFeature f;
      f.library_id = id;
      f.function_name = "f" + std::to_string(i) + random_token(r);
      f.embedding = Embedding::unit(random_vector(r, dim));
      f.profile = random_profile(r);
      f.is_export = pick(r, 2) == 1;
      f.weight = uniform(r, 0.0, 3.0);
      f.df = static_cast<std::int64_t>(pick(r, 10));
      f.n_in_library = 1 + static_cast<std::int64_t>(pick(r, 10));
      features.push_back(std::move(f));
    }
  }
  repo.stats = {static_cast<std::int64_t>(r() % 1000), static_cast<std::int64_t>(r() % 500),
                static_cast<std::int64_t>(r() % 100), uniform(r, 0.0, 171.0)};
  return repo;
}

inline DetectionReport random_report(Rand& r) {
  DetectionReport rep;
  rep.binary_id = "target-" + random_token(r);
  rep.theta3 = uniform(r, -1.0, 1.0);
  rep.mode = pick(r, 2) ? AggregationMode::kCoreWeightedMean : AggregationMode::kLiteralSum;
  const std::size_t libs = pick(r, 5);
  for (std::size_t l = 0; l < libs; ++l) {
    LibraryVerdict v;
    v.library_id = "lib" + std::to_string(l) + random_token(r);
    v.score = uniform(r, -1.0, 1.0);
    v.raw_score = uniform(r, -10.0, 10.0);
    v.weight_total = uniform(r, 0.0, 10.0);
    v.reused = pick(r, 2) == 1;
    const std::size_t ev = pick(r, 4);
    for (std::size_t e = 0; e < ev; ++e)
      v.evidence.push_back({"sub_" + random_token(r), "fn" + random_token(r),
                            uniform(r, -1.0, 1.0), uniform(r, 0.0, 2.0), uniform(r, -2.0, 2.0)});
    rep.libraries.push_back(std::move(v));
  }
  return rep;
}

// A scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("tplscan-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace tplscan::testing

#endif  // TPLSCAN_TESTS_TEST_UTIL_HPP
