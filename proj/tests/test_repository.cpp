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


#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "tplscan/errors.hpp"
#include "tplscan/repository.hpp"

using namespace tplscan;
using tplscan::testing::make_function;

namespace {

FunctionFeature feature(const std::string& lib, const std::string& name, std::vector<double> v,
                        double mi = 100.0, bool exported = true) {
  FunctionFeature f;
  f.library_id = lib;
  f.function_name = name;
  f.embedding = Embedding::unit(std::move(v));
  f.profile.mi = mi;
  f.is_export = exported;
  return f;
}

std::vector<double> one_hot(std::size_t dim, std::size_t k) {
  std::vector<double> v(dim, 0.0);
  v[k] = 1.0;
  return v;
}

BinaryDocument library(const std::string& id, std::size_t functions) {
  BinaryDocument d;
  d.binary_id = id;
  for (std::size_t i = 0; i < functions; ++i) {
    auto f = make_function(id + "_f" + std::to_string(i),
                           {{"mov", "rax", std::to_string(i)}, {"add", "rbx", "r" + std::to_string(i % 16)}, {"ret"}});
    f.is_export = i % 2 == 0;
    d.functions.push_back(std::move(f));
  }
  return d;
}

// Brute-force reading of the retention rule: among population values v,
// take the largest whose share of strictly smaller values is <= theta2.
double cutoff_oracle(const std::vector<double>& values, double theta2) {
  double best = -1e300;
  bool found = false;
  for (double v : values) {
    std::size_t below = 0;
    for (double w : values) below += w < v;
    if (static_cast<double>(below) / static_cast<double>(values.size()) <= theta2 && (!found || v > best)) {
      best = v;
      found = true;
    }
  }
  return best;
}

// Weights recomputed by brute force over the whole repository.
void check_weights_by_double_loop(const TplRepository& repo, double theta1) {
  const double L = static_cast<double>(repo.libraries.size());
  for (const auto& [id, features] : repo.libraries) {
    for (const auto& f : features) {
      std::int64_t n = 0;
      std::int64_t df = 0;
      for (const auto& [other_id, others] : repo.libraries) {
        bool hit = false;
        for (const auto& g : others) {
          const bool self = other_id == id && &g == &f;
          if (!self && cosine(f.embedding, g.embedding) < theta1) continue;
          if (other_id == id) ++n;
          else hit = true;
        }
        df += hit;
      }
      CHECK(f.n_in_library == n);
      CHECK(f.df == df);
      const double expected =
          std::max(0.0, static_cast<double>(n) / static_cast<double>(features.size()) *
                            std::log(L / static_cast<double>(df + 1)));
      CHECK(f.weight == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

}  // namespace

TEST_CASE("build_origin") {
  const HashingEmbedder emb(64);
  const auto repo = build_origin({library("a", 3), library("b", 3)}, emb);
  CHECK(repo.feature_count() == 6);
  CHECK(repo.stats.origin == 6);
  CHECK(repo.config.embedder_id == emb.id());
  CHECK(repo.config.dim == 64);
  for (const auto& [id, features] : repo.libraries)
    for (const auto& f : features) {
      CHECK(f.weight == 1.0);
      CHECK(f.df == 0);
      CHECK(f.n_in_library == 1);
      CHECK(f.embedding.dim() == 64);
      CHECK(f.profile.mi == maintainability_index(f.profile.hv, f.profile.cc, f.profile.loc));
    }

  std::vector<std::string> warnings;
  const auto with_empty =
      build_origin({library("a", 2), library("empty", 0)}, emb, [&](const std::string& w) { warnings.push_back(w); });
  CHECK(with_empty.libraries.at("empty").empty());
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("empty") != std::string::npos);

  CHECK_THROWS_AS(build_origin({}, emb), ValidationError);
  CHECK_THROWS_AS(build_origin({library("a", 1), library("a", 2)}, emb), ValidationError);
  auto target = library("t", 1);
  target.kind = BinaryKind::kTarget;
  CHECK_THROWS_AS(build_origin({target}, emb), ValidationError);
}

TEST_CASE("purify_export") {
  TplRepository repo;
  for (int i = 0; i < 4; ++i) repo.libraries["l"].push_back(feature("l", "f" + std::to_string(i), one_hot(4, i), 100, i == 2));
  repo.stats = {4, 4, 4, 0.0};
  const auto out = purify_export(repo);
  REQUIRE(out.libraries.at("l").size() == 1);
  CHECK(out.libraries.at("l")[0].function_name == "f2");
  CHECK(out.stats.after_export == 1);
  CHECK(out.config.stages.export_filter);

  for (auto& f : repo.libraries["l"]) f.is_export = true;
  CHECK(purify_export(repo).libraries == repo.libraries);
}

TEST_CASE("MI cutoff matches a brute-force percentile oracle") {
  testing::Rand r(100);
  for (int it = 0; it < 300; ++it) {
    std::vector<double> values(1 + testing::pick(r, 100));
    const bool ties = it % 2 == 0;
    for (auto& v : values)
      v = ties ? static_cast<double>(testing::pick(r, 12)) : testing::uniform(r, 0.0, 171.0);
    const double theta2 = it % 7 == 0 ? 1.0 : testing::uniform(r, 0.01, 1.0);
    const double cut = mi_cutoff(values, theta2);
    CHECK(cut == cutoff_oracle(values, theta2));
    std::size_t kept = 0;
    for (double v : values) kept += v < cut;
    CHECK(static_cast<double>(kept) <= theta2 * static_cast<double>(values.size()));
  }
  CHECK_THROWS_AS(mi_cutoff({1.0}, 0.0), ConfigError);
  CHECK_THROWS_AS(mi_cutoff({1.0}, 1.5), ConfigError);
  CHECK_THROWS_AS(mi_cutoff({1.0}, -0.2), ConfigError);
}

TEST_CASE("purify_mi keeps everything but the maximum at theta2 = 1") {
  testing::Rand r(101);
  TplRepository repo;
  for (int i = 0; i < 100; ++i)
    repo.libraries["l" + std::to_string(i % 3)].push_back(
        feature("l", "f" + std::to_string(i), testing::random_vector(r, 8), 50.0 + i * 0.5));
  const auto out = purify_mi(repo, 1.0);
  CHECK(out.feature_count() == 99);
  for (const auto& [id, features] : out.libraries)
    for (const auto& f : features) CHECK(f.profile.mi < 50.0 + 99 * 0.5);
}

TEST_CASE("purify_mi drops ties at the cutoff") {
  TplRepository repo;
  // MI values 1..10 with 4 copies of 3: sorted 1 2 3 3 3 3 4 ... 10.
  std::vector<double> mis{1, 2, 3, 3, 3, 3, 4, 5, 6, 7, 8, 9, 10};
  for (std::size_t i = 0; i < mis.size(); ++i)
    repo.libraries["l"].push_back(feature("l", "f" + std::to_string(i), one_hot(16, i), mis[i]));
  const auto out = purify_mi(repo, 0.2);
  // 2 of 13 values lie below 3 (0.154 <= 0.2); 6 lie below 4 (0.46 > 0.2).
  CHECK(out.stats.mi_cutoff == 3.0);
  CHECK(out.feature_count() == 2);

  TplRepository flat;
  for (int i = 0; i < 10; ++i) flat.libraries["l"].push_back(feature("l", "f" + std::to_string(i), one_hot(16, i), 42.0));
  std::vector<std::string> warnings;
  const auto none = purify_mi(flat, 0.2, [&](const std::string& w) { warnings.push_back(w); });
  CHECK(none.feature_count() == 0);
  CHECK_FALSE(warnings.empty());
  CHECK_THROWS_AS(purify_mi(flat, 0.0), ConfigError);
}

TEST_CASE("TF-IDF weight of a unique function") {
  // 102 libraries; library "a" holds 100 mutually orthogonal features and
  // every other library one more orthogonal feature.
  TplRepository repo;
  const std::size_t dim = 256;
  std::size_t k = 0;
  for (int i = 0; i < 100; ++i) repo.libraries["a"].push_back(feature("a", "f" + std::to_string(i), one_hot(dim, k++)));
  for (int l = 0; l < 101; ++l) {
    const std::string id = "z" + std::to_string(l);
    repo.libraries[id].push_back(feature(id, "g", one_hot(dim, k++)));
  }
  REQUIRE(repo.libraries.size() == 102);
  const auto out = compute_weights(repo, 0.8);
  for (const auto& f : out.libraries.at("a")) {
    CHECK(f.n_in_library == 1);
    CHECK(f.df == 0);
    CHECK(f.weight == doctest::Approx(0.01 * std::log(102.0)).epsilon(1e-12));
    CHECK(f.weight == doctest::Approx(0.04625).epsilon(1e-3));
  }
}

TEST_CASE("a function cloned into every library weighs exactly zero") {
  TplRepository repo;
  const std::size_t dim = 256;
  for (int l = 0; l < 102; ++l) {
    const std::string id = "lib" + std::to_string(l);
    repo.libraries[id].push_back(feature(id, "shared", one_hot(dim, 0)));
    repo.libraries[id].push_back(feature(id, "own", one_hot(dim, 1 + static_cast<std::size_t>(l))));
  }
  const auto out = compute_weights(repo, 0.8);
  for (const auto& [id, features] : out.libraries) {
    CHECK(features[0].df == 101);
    CHECK(features[0].weight == 0.0);
    CHECK(features[1].weight > 0.0);
  }
}

TEST_CASE("theta1 above one disables counting") {
  testing::Rand r(102);
  TplRepository repo;
  for (int i = 0; i < 30; ++i) {
    const std::string id = "l" + std::to_string(i % 3);
    repo.libraries[id].push_back(feature(id, "f" + std::to_string(i), one_hot(4, 0)));
  }
  const auto out = compute_weights(repo, 1.0 + 1e-9);
  for (const auto& [id, features] : out.libraries)
    for (const auto& f : features) {
      CHECK(f.df == 0);
      CHECK(f.n_in_library == 1);
      CHECK(f.weight > 0.0);
    }
}

TEST_CASE("weights match a double-loop oracle") {
  testing::Rand r(103);
  for (int it = 0; it < 15; ++it) {
    const std::size_t dim = 16;
    std::vector<std::vector<double>> centres;
    for (int c = 0; c < 4; ++c) centres.push_back(testing::random_vector(r, dim));
    TplRepository repo;
    const std::size_t libs = 2 + testing::pick(r, 6);
    const std::size_t n = 10 + testing::pick(r, 190);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = centres[testing::pick(r, centres.size())];
      for (auto& x : v) x += 0.5 * testing::uniform(r, -1.0, 1.0);
      const std::string id = "lib" + std::to_string(testing::pick(r, libs));
      repo.libraries[id].push_back(feature(id, "f" + std::to_string(i), v));
    }
    const double theta1 = testing::uniform(r, 0.5, 0.95);
    for (auto policy : {ExecPolicy::kSerial, ExecPolicy::kParallel}) {
      const auto out = compute_weights(repo, theta1, policy);
      CHECK(out.config.theta1 == theta1);
      check_weights_by_double_loop(out, theta1);
    }
  }
}

TEST_CASE("weights do not depend on insertion or feature order") {
  testing::Rand r(104);
  std::vector<BinaryDocument> docs;
  for (int l = 0; l < 5; ++l) {
    BinaryDocument d;
    d.binary_id = "lib" + std::to_string(l);
    for (int i = 0; i < 12; ++i) {
      auto f = testing::random_function(r, d.binary_id + "_" + std::to_string(i));
      f.section = ".text";
      d.functions.push_back(std::move(f));
    }
    // A shared thunk in every library.
    d.functions.push_back(make_function(d.binary_id + "_thunk", {{"jmp", "free"}}));
    docs.push_back(std::move(d));
  }
  const HashingEmbedder emb(128);
  auto weights_of = [&](std::vector<BinaryDocument> ds) {
    std::map<std::string, double> w;
    const auto repo = compute_weights(build_origin(ds, emb), 0.8);
    for (const auto& [id, features] : repo.libraries)
      for (const auto& f : features) w[f.function_name] = f.weight;
    return w;
  };
  const auto base = weights_of(docs);
  for (int it = 0; it < 5; ++it) {
    auto shuffled = docs;
    std::shuffle(shuffled.begin(), shuffled.end(), r);
    for (auto& d : shuffled) std::shuffle(d.functions.begin(), d.functions.end(), r);
    CHECK(weights_of(shuffled) == base);
  }
  CHECK(base.at("lib0_thunk") == 0.0);
}

TEST_CASE("uniform weights") {
  testing::Rand r(105);
  const auto repo = testing::random_repository(r, 8);
  const auto out = uniform_weights(repo);
  CHECK_FALSE(out.config.stages.weights);
  for (const auto& [id, features] : out.libraries)
    for (const auto& f : features) CHECK(f.weight == 1.0);
}

TEST_CASE("stage monotonicity on a generated corpus") {
  testing::Rand r(106);
  std::vector<BinaryDocument> docs;
  for (int l = 0; l < 4; ++l) {
    BinaryDocument d;
    d.binary_id = "lib" + std::to_string(l);
    for (int i = 0; i < 30; ++i) d.functions.push_back(testing::random_function(r, "f" + std::to_string(i)));
    docs.push_back(filter_sections(d));
  }
  const auto origin = build_origin(docs, HashingEmbedder(64));
  const auto exported = purify_export(origin);
  const auto mi = purify_mi(exported, 0.2);
  CHECK(exported.feature_count() <= origin.feature_count());
  CHECK(mi.feature_count() <= exported.feature_count());
  CHECK(mi.stats.origin >= mi.stats.after_export);
  CHECK(mi.stats.after_export >= mi.stats.after_mi);
  CHECK(static_cast<double>(mi.stats.after_mi) <= 0.2 * static_cast<double>(mi.stats.after_export));
  for (const auto& [id, features] : mi.libraries)
    for (const auto& f : features) CHECK(f.is_export);
}

TEST_CASE("persist round-trip") {
  testing::Rand r(107);
  for (int it = 0; it < 200; ++it) {
    const auto repo = testing::random_repository(r, 1 + testing::pick(r, 24));
    std::stringstream ss;
    persist(repo, ss);
    const auto back = load(ss);
    CHECK(back == repo);
  }
  testing::TempDir dir("repo");
  const auto repo = testing::random_repository(r, 32);
  persist_file(repo, dir.file("r.tpls"));
  CHECK(load_file(dir.file("r.tpls")) == repo);
}

TEST_CASE("corrupted repositories are rejected") {
  testing::Rand r(108);
  const auto repo = testing::random_repository(r, 16);
  std::stringstream ss;
  persist(repo, ss);
  const std::string bytes = ss.str();
  auto load_bytes = [](const std::string& b) {
    std::istringstream in(b);
    return load(in);
  };
  std::string version = bytes;
  version[8] = 2;
  CHECK_THROWS_AS(load_bytes(version), VersionError);
  CHECK_THROWS_AS(load_bytes(bytes.substr(0, bytes.size() - 10)), ChecksumError);
  CHECK_THROWS_AS(load_bytes(bytes.substr(0, bytes.size() / 2)), ChecksumError);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x40;
  CHECK_THROWS_AS(load_bytes(flipped), ChecksumError);
  CHECK_THROWS_AS(load_bytes("hello world, not a repository"), FormatError);
  CHECK_THROWS_AS(load_bytes(""), FormatError);
  CHECK_THROWS_AS(load_bytes(bytes + "x"), ChecksumError);
}

TEST_CASE("manifest") {
  GroundTruthManifest m{{"bin1", {"liba", "libb"}}, {"bin2", {}}};
  std::stringstream ss;
  write_manifest(m, ss);
  CHECK(parse_manifest(ss) == m);

  std::istringstream bad("[1, 2]");
  CHECK_THROWS_AS(parse_manifest(bad), ParseError);
  std::istringstream bad2(R"({"b": [1]})");
  CHECK_THROWS_AS(parse_manifest(bad2), ParseError);

  TplRepository repo;
  repo.libraries["liba"];
  repo.libraries["libb"];
  CHECK_NOTHROW(validate_manifest(m, repo));
  m["bin3"] = {"libz"};
  CHECK_THROWS_AS(validate_manifest(m, repo), ValidationError);
}
