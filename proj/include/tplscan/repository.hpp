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

// The library feature repository and its purification stages:
//
//   1. purify_export   keep only functions from the export table
//   2. purify_mi       drop simple functions by maintainability-index
//                      percentile
//   3. compute_weights TF-IDF weights that marginalize functions shared
//                      across libraries
//
// Stages run in that order. The repository is a value; every stage returns
// a new one.

#ifndef TPLSCAN_REPOSITORY_HPP
#define TPLSCAN_REPOSITORY_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tplscan/embedding.hpp"
#include "tplscan/errors.hpp"
#include "tplscan/interchange.hpp"
#include "tplscan/metrics.hpp"

namespace tplscan {

inline constexpr std::uint32_t kRepositoryFormatVersion = 1;

struct FunctionFeature {
  std::string library_id;
  std::string function_name;
  Embedding embedding;
  ComplexityProfile profile;
  bool is_export = false;
  double weight = 1.0;
  std::int64_t df = 0;
  std::int64_t n_in_library = 1;

  bool operator==(const FunctionFeature&) const = default;
};

struct StageFlags {
  bool export_filter = true;
  bool mi_filter = true;
  bool weights = true;

  bool operator==(const StageFlags&) const = default;
};

struct RepositoryConfig {
  double theta1 = 0.8;  // function similarity threshold for TF-IDF counting
  double theta2 = 0.2;  // MI retention fraction
  std::size_t dim = kDefaultDim;
  std::string embedder_id;
  std::uint64_t embedder_seed = 0;
  StageFlags stages;

  bool operator==(const RepositoryConfig&) const = default;
};

// Feature counts after each stage. A stage that did not run carries the
// previous count forward.
struct RetentionStats {
  std::int64_t origin = 0;
  std::int64_t after_export = 0;
  std::int64_t after_mi = 0;
  double mi_cutoff = 0.0;  // m*: features with MI < m* survive

  bool operator==(const RetentionStats&) const = default;
};

struct TplRepository {
  std::map<std::string, std::vector<FunctionFeature>> libraries;
  RepositoryConfig config;
  RetentionStats stats;

  std::size_t feature_count() const;
  bool operator==(const TplRepository&) const = default;
};

// Builds the unpurified repository from section-filtered library documents.
// Throws ValidationError on an empty corpus, a duplicate library id, or a
// document that is not a library.
TplRepository build_origin(const std::vector<BinaryDocument>& docs, const Embedder& embedder,
                           const WarningSink& warn = {});

TplRepository purify_export(const TplRepository& repo);

// Finds m*, the population MI value for which the fraction of features with
// MI strictly below it is the largest fraction not exceeding `theta2`, and
// keeps exactly those features. Ties at m* are dropped. Throws ConfigError
// unless 0 < theta2 <= 1.
TplRepository purify_mi(const TplRepository& repo, double theta2, const WarningSink& warn = {});

// The cutoff used by purify_mi, exposed for tests and reporting.
double mi_cutoff(std::vector<double> mi_values, double theta2);

TplRepository compute_weights(const TplRepository& repo, double theta1,
                              ExecPolicy policy = ExecPolicy::kParallel);

// Sets every weight to 1 (the "weights off" configuration).
TplRepository uniform_weights(const TplRepository& repo);

void persist(const TplRepository& repo, std::ostream& out);
void persist_file(const TplRepository& repo, const std::string& path);
// Throws FormatError on bad magic, version mismatch, truncation, or a
// checksum mismatch.
TplRepository load(std::istream& in);
TplRepository load_file(const std::string& path);

using GroundTruthManifest = std::map<std::string, std::set<std::string>>;

// JSON object: binary_id -> array of library ids.
GroundTruthManifest parse_manifest(std::istream& in);
GroundTruthManifest read_manifest_file(const std::string& path);
void write_manifest(const GroundTruthManifest& manifest, std::ostream& out);
// Throws ValidationError when the manifest names a library absent from the
// repository.
void validate_manifest(const GroundTruthManifest& manifest, const TplRepository& repo);

}  // namespace tplscan

#endif  // TPLSCAN_REPOSITORY_HPP
