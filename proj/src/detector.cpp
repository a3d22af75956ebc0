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

#include "tplscan/detector.hpp"

#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace tplscan {

std::string_view to_string(AggregationMode mode) {
  return mode == AggregationMode::kCoreWeightedMean ? "core-weighted-mean" : "literal-eq8";
}

AggregationMode parse_aggregation_mode(std::string_view text) {
  if (text == "core-weighted-mean") return AggregationMode::kCoreWeightedMean;
  if (text == "literal-eq8" || text == "literal-sum") return AggregationMode::kLiteralSum;
  throw ConfigError("unknown aggregation mode '" + std::string(text) + "'");
}

double score_pairwise(const Embedding& binary_function, const FunctionFeature& feature) {
  return feature.weight * cosine(binary_function, feature.embedding);
}

Aggregate aggregate_from_similarity(const SimilarityMatrix& sim,
                                    const std::vector<std::string>& binary_functions,
                                    const std::vector<FunctionFeature>& library,
                                    AggregationMode mode) {
  Aggregate agg;
  if (sim.rows == 0 || sim.cols == 0) return agg;
  for (const auto& f : library) agg.weight_total += f.weight;

  if (mode == AggregationMode::kCoreWeightedMean) {
    agg.evidence.reserve(sim.cols);
    for (std::size_t j = 0; j < sim.cols; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < sim.rows; ++i)
        if (sim(i, j) > sim(best, j)) best = i;
      const double w = library[j].weight;
      const double contribution = w * sim(best, j);
      agg.raw_score += contribution;
      agg.evidence.push_back({binary_functions[best], library[j].function_name, sim(best, j), w,
                              contribution});
    }
    agg.score = agg.weight_total > 0.0 ? agg.raw_score / agg.weight_total : 0.0;
  } else {
    agg.evidence.reserve(sim.rows);
    for (std::size_t i = 0; i < sim.rows; ++i) {
      std::size_t best = 0;
      double best_score = library[0].weight * sim(i, 0);
      for (std::size_t j = 1; j < sim.cols; ++j) {
        const double s = library[j].weight * sim(i, j);
        if (s > best_score) {
          best_score = s;
          best = j;
        }
      }
      agg.raw_score += best_score;
      agg.evidence.push_back({binary_functions[i], library[best].function_name, sim(i, best),
                              library[best].weight, best_score});
    }
    agg.score = agg.raw_score;
  }
  return agg;
}

namespace {

std::vector<Embedding> feature_vectors(const std::vector<FunctionFeature>& library) {
  std::vector<Embedding> keys;
  keys.reserve(library.size());
  for (const auto& f : library) keys.push_back(f.embedding);
  return keys;
}

}  // namespace

Aggregate aggregate(const EmbeddedBinary& binary, const std::vector<FunctionFeature>& library,
                    AggregationMode mode, ExecPolicy policy) {
  if (binary.embeddings.empty()) throw ValidationError("binary has no functions");
  if (library.empty()) throw ValidationError("library has no features");
  const auto keys = feature_vectors(library);
  const auto sim = batched_similarity(binary.embeddings, keys, kDefaultBatch, policy);
  return aggregate_from_similarity(sim, binary.function_names, library, mode);
}

void check_embedder_matches(const EmbeddedBinary& binary, const RepositoryConfig& config) {
  if (binary.embedder_id != config.embedder_id || binary.embedder_seed != config.embedder_seed)
    throw ConfigError("binary embedded with '" + binary.embedder_id + "' (seed " +
                      std::to_string(binary.embedder_seed) + ") but repository uses '" +
                      config.embedder_id + "' (seed " + std::to_string(config.embedder_seed) +
                      ")");
  if (binary.dim != config.dim)
    throw ConfigError("binary embedding dimension " + std::to_string(binary.dim) +
                      " != repository dimension " + std::to_string(config.dim));
  for (const auto& e : binary.embeddings)
    if (e.dim() != config.dim)
      throw ConfigError("binary embedding dimension " + std::to_string(e.dim()) +
                        " != repository dimension " + std::to_string(config.dim));
}

DetectionReport detect(const EmbeddedBinary& binary, const TplRepository& repo, double theta3,
                       AggregationMode mode, const WarningSink& warn, ExecPolicy policy) {
  check_embedder_matches(binary, repo.config);
  DetectionReport report;
  report.binary_id = binary.binary_id;
  report.theta3 = theta3;
  report.mode = mode;
  if (binary.embeddings.empty()) {
    if (warn) warn("binary '" + binary.binary_id + "' has no functions; nothing to detect");
    return report;
  }
  for (const auto& [id, features] : repo.libraries) {
    LibraryVerdict v;
    v.library_id = id;
    if (features.empty()) {
      if (warn) warn("library '" + id + "' has no features; scored 0");
    } else {
      auto agg = aggregate(binary, features, mode, policy);
      v.score = agg.score;
      v.raw_score = agg.raw_score;
      v.weight_total = agg.weight_total;
      v.evidence = std::move(agg.evidence);
    }
    v.reused = !features.empty() && v.score >= theta3;
    report.libraries.push_back(std::move(v));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Report files

void write_report(const DetectionReport& report, std::ostream& out) {
  using nlohmann::ordered_json;
  out << ordered_json{{"type", "report"},
                      {"binary_id", report.binary_id},
                      {"theta3", report.theta3},
                      {"mode", to_string(report.mode)},
                      {"libraries", report.libraries.size()}}
             .dump()
      << '\n';
  for (const auto& v : report.libraries) {
    ordered_json ev = ordered_json::array();
    for (const auto& e : v.evidence)
      ev.push_back(ordered_json{{"binary_function", e.binary_function},
                                {"library_function", e.library_function},
                                {"cosine", e.cosine},
                                {"weight", e.weight},
                                {"contribution", e.contribution}});
    out << ordered_json{{"type", "library"},     {"library_id", v.library_id},
                        {"score", v.score},      {"raw_score", v.raw_score},
                        {"weight_total", v.weight_total}, {"reused", v.reused},
                        {"evidence", std::move(ev)}}
               .dump()
        << '\n';
  }
}

std::vector<DetectionReport> read_reports(std::istream& in) {
  using nlohmann::json;
  std::vector<DetectionReport> reports;
  std::size_t expected = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto type = j.at("type").get<std::string>();
      if (type == "report") {
        if (!reports.empty() && reports.back().libraries.size() != expected)
          throw ParseError("report for '" + reports.back().binary_id + "' is incomplete", lineno);
        DetectionReport r;
        r.binary_id = j.at("binary_id").get<std::string>();
        r.theta3 = j.at("theta3").get<double>();
        r.mode = parse_aggregation_mode(j.at("mode").get<std::string>());
        expected = j.at("libraries").get<std::size_t>();
        reports.push_back(std::move(r));
      } else if (type == "library") {
        if (reports.empty()) throw ParseError("library record before report header", lineno);
        LibraryVerdict v;
        v.library_id = j.at("library_id").get<std::string>();
        v.score = j.at("score").get<double>();
        v.raw_score = j.at("raw_score").get<double>();
        v.weight_total = j.at("weight_total").get<double>();
        v.reused = j.at("reused").get<bool>();
        for (const auto& e : j.at("evidence"))
          v.evidence.push_back({e.at("binary_function").get<std::string>(),
                                e.at("library_function").get<std::string>(),
                                e.at("cosine").get<double>(), e.at("weight").get<double>(),
                                e.at("contribution").get<double>()});
        reports.back().libraries.push_back(std::move(v));
      } else {
        throw ParseError("unknown record type '" + type + "'", lineno);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad report record: ") + e.what(), lineno);
    }
  }
  if (!reports.empty() && reports.back().libraries.size() != expected)
    throw ParseError("report for '" + reports.back().binary_id + "' is incomplete", lineno);
  return reports;
}

DetectionReport read_report(std::istream& in) {
  auto reports = read_reports(in);
  if (reports.size() != 1)
    throw ParseError("expected exactly one report, found " + std::to_string(reports.size()), 0);
  return std::move(reports.front());
}

void print_summary(const DetectionReport& report, std::ostream& out) {
  char buf[256];
  out << "binary: " << report.binary_id << "  (mode " << to_string(report.mode)
      << ", theta3 " << report.theta3 << ")\n";
  std::snprintf(buf, sizeof buf, "  %-32s %10s %8s  %s\n", "library", "score", "features",
                "verdict");
  out << buf;
  for (const auto& v : report.libraries) {
    std::snprintf(buf, sizeof buf, "  %-32s %10.4f %8zu  %s\n", v.library_id.c_str(), v.score,
                  v.evidence.size(), v.reused ? "REUSED" : "-");
    out << buf;
  }
  if (report.libraries.empty()) out << "  (no functions to compare)\n";
}

}  // namespace tplscan
