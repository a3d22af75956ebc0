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

// Library reuse detection by weighted best-match aggregation.
//
// Two aggregation modes are offered:
//
//   kCoreWeightedMean (default)
//       For each library feature j take m_j, its best cosine against any
//       binary function. Score = sum_j w_j m_j / sum_j w_j, or 0 when all
//       weights are 0.
//   kLiteralSum
//       For each binary function i take max_j w_j cos(i, j) and sum over i.
//
// A library is reported as reused when its score is >= theta3.

#ifndef TPLSCAN_DETECTOR_HPP
#define TPLSCAN_DETECTOR_HPP

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "tplscan/embedding.hpp"
#include "tplscan/repository.hpp"

namespace tplscan {

enum class AggregationMode { kCoreWeightedMean, kLiteralSum };

std::string_view to_string(AggregationMode mode);
AggregationMode parse_aggregation_mode(std::string_view text);

struct Evidence {
  std::string binary_function;
  std::string library_function;
  double cosine = 0.0;
  double weight = 0.0;
  double contribution = 0.0;

  bool operator==(const Evidence&) const = default;
};

struct LibraryVerdict {
  std::string library_id;
  double score = 0.0;
  // Sum of evidence contributions (the score before normalization).
  double raw_score = 0.0;
  double weight_total = 0.0;
  bool reused = false;
  std::vector<Evidence> evidence;

  bool operator==(const LibraryVerdict&) const = default;
};

struct DetectionReport {
  std::string binary_id;
  double theta3 = 0.89;
  AggregationMode mode = AggregationMode::kCoreWeightedMean;
  std::vector<LibraryVerdict> libraries;  // sorted by library_id

  bool operator==(const DetectionReport&) const = default;
};

// weight * cosine. Throws DimensionError on mismatched dimensions.
double score_pairwise(const Embedding& binary_function, const FunctionFeature& feature);

struct Aggregate {
  double score = 0.0;
  double raw_score = 0.0;
  double weight_total = 0.0;
  std::vector<Evidence> evidence;
};

// Throws ValidationError when either side is empty.
Aggregate aggregate(const EmbeddedBinary& binary, const std::vector<FunctionFeature>& library,
                    AggregationMode mode, ExecPolicy policy = ExecPolicy::kParallel);

// Aggregates from a precomputed similarity matrix (rows: binary functions,
// cols: library features).
Aggregate aggregate_from_similarity(const SimilarityMatrix& sim,
                                    const std::vector<std::string>& binary_functions,
                                    const std::vector<FunctionFeature>& library,
                                    AggregationMode mode);

// Scores the binary against every library. Throws ConfigError when the
// binary was embedded with a different embedder or dimension than the
// repository. An empty binary yields a report with no entries.
DetectionReport detect(const EmbeddedBinary& binary, const TplRepository& repo, double theta3,
                       AggregationMode mode = AggregationMode::kCoreWeightedMean,
                       const WarningSink& warn = {}, ExecPolicy policy = ExecPolicy::kParallel);

void check_embedder_matches(const EmbeddedBinary& binary, const RepositoryConfig& config);

// JSON lines: one report header, then one record per library.
void write_report(const DetectionReport& report, std::ostream& out);
DetectionReport read_report(std::istream& in);
std::vector<DetectionReport> read_reports(std::istream& in);

// Fixed-width human summary.
void print_summary(const DetectionReport& report, std::ostream& out);

}  // namespace tplscan

#endif  // TPLSCAN_DETECTOR_HPP
