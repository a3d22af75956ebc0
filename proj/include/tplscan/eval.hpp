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

// Evaluation harness: ground-truth scoring, threshold sweeps, the stage
// ablation matrix, stage timing, and a synthetic corpus generator with
// planted library reuse.

#ifndef TPLSCAN_EVAL_HPP
#define TPLSCAN_EVAL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tplscan/detector.hpp"
#include "tplscan/repository.hpp"

namespace tplscan {

// ---------------------------------------------------------------------------
// Metrics

struct ConfusionCounts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  bool operator==(const ConfusionCounts&) const = default;
};

// Undefined ratios are reported as 0 with the matching flag cleared.
struct DetectionMetrics {
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = false;
  bool recall_defined = false;
};

DetectionMetrics metrics_from_counts(const ConfusionCounts& c);

// Counts (binary, library) decisions against the manifest. A manifest
// library missing from a report counts as a miss. Throws ValidationError
// when a report's binary is absent from the manifest.
DetectionMetrics score_metrics(const std::vector<DetectionReport>& reports,
                               const GroundTruthManifest& manifest);

// ---------------------------------------------------------------------------
// Purification pipeline

struct StageTimings {
  double t1_export = 0.0;    // seconds
  double t2_weighting = 0.0;
  double t3_mi = 0.0;
  double total = 0.0;

  bool operator==(const StageTimings&) const = default;
};

// Runs the enabled stages on an origin repository in the fixed order
// export -> MI -> weights. With weights disabled every weight is 1.
TplRepository run_purification(const TplRepository& origin, const StageFlags& stages,
                               double theta1, double theta2, const WarningSink& warn = {},
                               StageTimings* timings = nullptr,
                               ExecPolicy policy = ExecPolicy::kParallel);

StageTimings time_stages(const TplRepository& origin, double theta1, double theta2,
                         ExecPolicy policy = ExecPolicy::kParallel);

void write_timings(const StageTimings& t, std::ostream& out);
StageTimings read_timings(std::istream& in);

// ---------------------------------------------------------------------------
// Sweeps

// An origin repository plus embedded target binaries and ground truth.
// Embeddings are computed once and shared by every sweep cell.
struct EmbeddedCorpus {
  TplRepository origin;
  std::vector<EmbeddedBinary> targets;
  GroundTruthManifest manifest;
};

struct SweepAxes {
  std::vector<double> theta1;
  std::vector<double> theta2;
  std::vector<double> theta3;

  // 0.75..0.95 by 0.05, 0.1..0.7 by 0.1, 0.70..0.95 by 0.01.
  static SweepAxes default_grid();
  std::size_t cell_count() const { return theta1.size() * theta2.size() * theta3.size(); }
};

struct SweepCell {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  double retained_fraction = 0.0;
  DetectionMetrics metrics;
};

struct SweepGrid {
  SweepAxes axes;
  std::vector<SweepCell> cells;  // theta1-major, theta3 fastest
};

SweepGrid sweep(const EmbeddedCorpus& corpus, const SweepAxes& axes,
                AggregationMode mode = AggregationMode::kCoreWeightedMean,
                const StageFlags& stages = {},
                ExecPolicy policy = ExecPolicy::kParallel);

struct SweepSelection {
  std::size_t index = 0;
  // Cells sharing the best (F1, retained fraction) pair.
  std::size_t tied = 0;
};

// Highest F1; ties go to the larger retained fraction; any remaining tie is
// settled by the median tied cell in grid order, which sits in the middle
// of a flat threshold plateau.
SweepSelection select_cell(const SweepGrid& grid);

void write_sweep_csv(const SweepGrid& grid, std::ostream& out);

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
  std::string config;  // Origin, Export, MI, Export+MI
  bool weighted = false;
  std::int64_t func_count = 0;
  double leave_percent = 0.0;
  DetectionMetrics metrics;
};

// Eight rows: {Origin, Export, MI, Export+MI} x {weights off, weights on}.
std::vector<AblationRow> run_ablation(const EmbeddedCorpus& corpus, double theta1,
                                      double theta2, double theta3,
                                      AggregationMode mode = AggregationMode::kCoreWeightedMean,
                                      ExecPolicy policy = ExecPolicy::kParallel);

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out);
void print_ablation_table(const std::vector<AblationRow>& rows, std::ostream& out);

// ---------------------------------------------------------------------------
// Synthetic corpora

struct PlantedReuse {
  std::size_t library = 0;  // index into the generated libraries
  double fraction = 1.0;    // share of the library's functions copied
};

struct PlantedBinary {
  std::string binary_id;
  std::vector<PlantedReuse> reuse;
};

struct SyntheticCorpusSpec {
  std::size_t library_count = 10;
  std::size_t functions_per_library = 50;
  double clone_rate = 0.05;      // functions copied from another library
  double simple_fn_rate = 0.3;   // 1-3 instruction thunks and stubs
  double export_rate = 0.5;
  // Probability that an instruction follows its library's own coding style
  // rather than the shared instruction mix.
  double style_strength = 0.8;
  std::size_t distractors_per_target = 40;
  std::vector<PlantedBinary> planted;
  std::uint64_t rng_seed = 1;
};

// Fills spec.planted with `count` binaries named "<prefix>NNN", each
// reusing between min_libs and max_libs distinct libraries at fractions
// drawn uniformly from [min_fraction, max_fraction].
void plant_random_reuse(SyntheticCorpusSpec& spec, std::size_t count, std::size_t min_libs,
                        std::size_t max_libs, double min_fraction, double max_fraction,
                        const std::string& prefix, std::uint64_t seed);

struct SyntheticCorpus {
  std::vector<BinaryDocument> libraries;
  std::vector<BinaryDocument> targets;
  GroundTruthManifest manifest;
};

// Throws ConfigError for rates outside [0, 1] or out-of-range library
// indices.
SyntheticCorpus generate_corpus(const SyntheticCorpusSpec& spec);

// Section-filters, embeds, and builds the origin repository.
EmbeddedCorpus embed_corpus(const std::vector<BinaryDocument>& libraries,
                            const std::vector<BinaryDocument>& targets,
                            const GroundTruthManifest& manifest, const Embedder& embedder,
                            const WarningSink& warn = {});

}  // namespace tplscan

#endif  // TPLSCAN_EVAL_HPP
