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

#include "tplscan/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

#include "json.hpp"

namespace tplscan {

// ---------------------------------------------------------------------------
// Metrics

DetectionMetrics metrics_from_counts(const ConfusionCounts& c) {
  DetectionMetrics m;
  m.counts = c;
  if (c.tp + c.fp > 0) {
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    m.precision_defined = true;
  }
  if (c.tp + c.fn > 0) {
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    m.recall_defined = true;
  }
  if (m.precision + m.recall > 0.0)
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

namespace {

// Adds one binary's decisions to `c`.
void tally(const std::set<std::string>& decided, const std::set<std::string>& truth,
           ConfusionCounts& c) {
  for (const auto& lib : decided) {
    if (truth.count(lib))
      ++c.tp;
    else
      ++c.fp;
  }
  for (const auto& lib : truth)
    if (!decided.count(lib)) ++c.fn;
}

}  // namespace

DetectionMetrics score_metrics(const std::vector<DetectionReport>& reports,
                               const GroundTruthManifest& manifest) {
  ConfusionCounts c;
  for (const auto& r : reports) {
    auto it = manifest.find(r.binary_id);
    if (it == manifest.end())
      throw ValidationError("binary '" + r.binary_id + "' is not in the ground-truth manifest");
    std::set<std::string> decided;
    for (const auto& v : r.libraries)
      if (v.reused) decided.insert(v.library_id);
    tally(decided, it->second, c);
  }
  return metrics_from_counts(c);
}

// ---------------------------------------------------------------------------
// Purification pipeline and timing

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

TplRepository run_purification(const TplRepository& origin, const StageFlags& stages,
                               double theta1, double theta2, const WarningSink& warn,
                               StageTimings* timings, ExecPolicy policy) {
  StageTimings t;
  TplRepository repo = origin;
  if (stages.export_filter) {
    const auto start = Clock::now();
    repo = purify_export(repo);
    t.t1_export = seconds_since(start);
  }
  if (stages.mi_filter) {
    const auto start = Clock::now();
    repo = purify_mi(repo, theta2, warn);
    t.t3_mi = seconds_since(start);
  }
  {
    const auto start = Clock::now();
    repo = stages.weights ? compute_weights(repo, theta1, policy) : uniform_weights(repo);
    t.t2_weighting = seconds_since(start);
  }
  repo.config.theta1 = theta1;
  repo.config.theta2 = theta2;
  t.total = t.t1_export + t.t2_weighting + t.t3_mi;
  if (timings) *timings = t;
  return repo;
}

StageTimings time_stages(const TplRepository& origin, double theta1, double theta2,
                         ExecPolicy policy) {
  StageTimings t;
  run_purification(origin, StageFlags{}, theta1, theta2, {}, &t, policy);
  return t;
}

void write_timings(const StageTimings& t, std::ostream& out) {
  nlohmann::ordered_json j{{"type", "timings"},
                           {"t1_export", t.t1_export},
                           {"t2_weighting", t.t2_weighting},
                           {"t3_mi", t.t3_mi},
                           {"total", t.total}};
  out << j.dump() << '\n';
}

StageTimings read_timings(std::istream& in) {
  try {
    const auto j = nlohmann::json::parse(in);
    if (j.at("type").get<std::string>() != "timings")
      throw ParseError("not a timings record", 0);
    return {j.at("t1_export").get<double>(), j.at("t2_weighting").get<double>(),
            j.at("t3_mi").get<double>(), j.at("total").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad timings record: ") + e.what(), 0);
  }
}

// ---------------------------------------------------------------------------
// Sweeps

SweepAxes SweepAxes::default_grid() {
  SweepAxes a;
  for (int k = 75; k <= 95; k += 5) a.theta1.push_back(k / 100.0);
  for (int k = 1; k <= 7; ++k) a.theta2.push_back(k / 10.0);
  for (int k = 70; k <= 95; ++k) a.theta3.push_back(k / 100.0);
  return a;
}

namespace {

// Similarities of every target against every origin feature, computed once
// and reused by every purified repository derived from that origin.
class OriginSimilarity {
 public:
  OriginSimilarity(const EmbeddedCorpus& corpus, ExecPolicy policy) {
    std::vector<Embedding> keys;
    for (const auto& [id, features] : corpus.origin.libraries) {
      auto& cols = column_[id];
      for (const auto& f : features) {
        cols.emplace(f.function_name, keys.size());
        keys.push_back(f.embedding);
      }
    }
    for (const auto& t : corpus.targets) {
      check_embedder_matches(t, corpus.origin.config);
      sims_.push_back(batched_similarity(t.embeddings, keys, kDefaultBatch, policy));
    }
  }

  // Aggregate score of target `t` against the given library features.
  double score(std::size_t t, const EmbeddedBinary& binary, const std::string& library_id,
               const std::vector<FunctionFeature>& features, AggregationMode mode) const {
    const SimilarityMatrix& full = sims_[t];
    const auto& cols = column_.at(library_id);
    SimilarityMatrix sub;
    sub.rows = full.rows;
    sub.cols = features.size();
    sub.data.resize(sub.rows * sub.cols);
    for (std::size_t j = 0; j < features.size(); ++j) {
      const std::size_t c = cols.at(features[j].function_name);
      for (std::size_t i = 0; i < full.rows; ++i) sub(i, j) = full(i, c);
    }
    return aggregate_from_similarity(sub, binary.function_names, features, mode).score;
  }

 private:
  std::map<std::string, std::unordered_map<std::string, std::size_t>> column_;
  std::vector<SimilarityMatrix> sims_;
};

// Scores of each target against each non-empty library. A library absent
// from a target's map is never decided.
using ScoreTable = std::vector<std::map<std::string, double>>;

ScoreTable score_all(const OriginSimilarity& sims, const EmbeddedCorpus& corpus,
                     const TplRepository& repo, AggregationMode mode) {
  ScoreTable table(corpus.targets.size());
  for (std::size_t t = 0; t < corpus.targets.size(); ++t) {
    const auto& binary = corpus.targets[t];
    if (binary.embeddings.empty()) continue;
    for (const auto& [id, features] : repo.libraries)
      if (!features.empty()) table[t][id] = sims.score(t, binary, id, features, mode);
  }
  return table;
}

DetectionMetrics evaluate_at(const ScoreTable& table, const EmbeddedCorpus& corpus,
                             double theta3) {
  ConfusionCounts c;
  static const std::set<std::string> kNone;
  for (std::size_t t = 0; t < corpus.targets.size(); ++t) {
    std::set<std::string> decided;
    for (const auto& [id, score] : table[t])
      if (score >= theta3) decided.insert(id);
    auto it = corpus.manifest.find(corpus.targets[t].binary_id);
    if (it == corpus.manifest.end())
      throw ValidationError("binary '" + corpus.targets[t].binary_id +
                            "' is not in the ground-truth manifest");
    tally(decided, it->second, c);
  }
  return metrics_from_counts(c);
}

double retained_fraction(const TplRepository& repo) {
  return repo.stats.origin > 0
             ? static_cast<double>(repo.feature_count()) / static_cast<double>(repo.stats.origin)
             : 0.0;
}

}  // namespace

SweepGrid sweep(const EmbeddedCorpus& corpus, const SweepAxes& axes, AggregationMode mode,
                const StageFlags& stages, ExecPolicy policy) {
  const OriginSimilarity sims(corpus, policy);
  SweepGrid grid;
  grid.axes = axes;
  grid.cells.reserve(axes.cell_count());
  for (double t1 : axes.theta1) {
    for (double t2 : axes.theta2) {
      const TplRepository repo = run_purification(corpus.origin, stages, t1, t2, {}, nullptr, policy);
      const double kept = retained_fraction(repo);
      const ScoreTable table = score_all(sims, corpus, repo, mode);
      for (double t3 : axes.theta3)
        grid.cells.push_back({t1, t2, t3, kept, evaluate_at(table, corpus, t3)});
    }
  }
  return grid;
}

SweepSelection select_cell(const SweepGrid& grid) {
  if (grid.cells.empty()) throw ConfigError("cannot select from an empty sweep");
  const auto better = [](const SweepCell& a, const SweepCell& b) {
    if (a.metrics.f1 != b.metrics.f1) return a.metrics.f1 > b.metrics.f1;
    return a.retained_fraction > b.retained_fraction;
  };
  const SweepCell* best = &grid.cells.front();
  for (const auto& c : grid.cells)
    if (better(c, *best)) best = &c;
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    const auto& c = grid.cells[i];
    if (c.metrics.f1 == best->metrics.f1 && c.retained_fraction == best->retained_fraction)
      tied.push_back(i);
  }
  return {tied[(tied.size() - 1) / 2], tied.size()};
}

void write_sweep_csv(const SweepGrid& grid, std::ostream& out) {
  out << "theta1,theta2,theta3,retained_fraction,precision,recall,f1,precision_defined\n";
  char buf[256];
  for (const auto& c : grid.cells) {
    std::snprintf(buf, sizeof buf, "%.2f,%.2f,%.2f,%.6f,%.6f,%.6f,%.6f,%d\n", c.theta1, c.theta2,
                  c.theta3, c.retained_fraction, c.metrics.precision, c.metrics.recall,
                  c.metrics.f1, c.metrics.precision_defined ? 1 : 0);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// Ablation

std::vector<AblationRow> run_ablation(const EmbeddedCorpus& corpus, double theta1,
                                      double theta2, double theta3, AggregationMode mode,
                                      ExecPolicy policy) {
  const OriginSimilarity sims(corpus, policy);
  struct Config {
    const char* name;
    bool export_filter;
    bool mi_filter;
  };
  static constexpr Config kConfigs[] = {
      {"Origin", false, false}, {"Export", true, false}, {"MI", false, true}, {"Export+MI", true, true}};
  std::vector<AblationRow> rows;
  for (bool weighted : {false, true}) {
    for (const auto& cfg : kConfigs) {
      const StageFlags stages{cfg.export_filter, cfg.mi_filter, weighted};
      const TplRepository repo =
          run_purification(corpus.origin, stages, theta1, theta2, {}, nullptr, policy);
      const ScoreTable table = score_all(sims, corpus, repo, mode);
      AblationRow row;
      row.config = cfg.name;
      row.weighted = weighted;
      row.func_count = static_cast<std::int64_t>(repo.feature_count());
      row.leave_percent = retained_fraction(repo);
      row.metrics = evaluate_at(table, corpus, theta3);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "config,weights,func_count,leave_percent,precision,recall,f1\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%lld,%.3f,%.3f,%.3f,%.3f\n", r.config.c_str(),
                  r.weighted ? "on" : "off", static_cast<long long>(r.func_count),
                  r.leave_percent, r.metrics.precision, r.metrics.recall, r.metrics.f1);
    out << buf;
  }
}

void print_ablation_table(const std::vector<AblationRow>& rows, std::ostream& out) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-10s %-7s %10s %8s %9s %7s %7s\n", "config", "weights",
                "functions", "leave", "precision", "recall", "f1");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %-7s %10lld %8.3f %9.3f %7.3f %7.3f%s\n",
                  r.config.c_str(), r.weighted ? "on" : "off",
                  static_cast<long long>(r.func_count), r.leave_percent, r.metrics.precision,
                  r.metrics.recall, r.metrics.f1, r.metrics.precision_defined ? "" : " (P undef)");
    out << buf;
  }
}

// ---------------------------------------------------------------------------

EmbeddedCorpus embed_corpus(const std::vector<BinaryDocument>& libraries,
                            const std::vector<BinaryDocument>& targets,
                            const GroundTruthManifest& manifest, const Embedder& embedder,
                            const WarningSink& warn) {
  EmbeddedCorpus corpus;
  std::vector<BinaryDocument> filtered;
  filtered.reserve(libraries.size());
  for (const auto& doc : libraries) filtered.push_back(filter_sections(doc));
  corpus.origin = build_origin(filtered, embedder, warn);
  for (const auto& doc : targets)
    corpus.targets.push_back(embed_binary(filter_sections(doc), embedder));
  corpus.manifest = manifest;
  validate_manifest(manifest, corpus.origin);
  return corpus;
}

}  // namespace tplscan
