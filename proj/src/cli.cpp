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

#include "tplscan/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tplscan/eval.hpp"

namespace fs = std::filesystem;

namespace tplscan {

void PipelineConfig::validate() const {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  if (!in(theta1, -1.0, 1.0) && !(theta1 > 1.0))
    throw ConfigError("theta1 must be a cosine threshold, got " + std::to_string(theta1));
  if (!(theta2 > 0.0 && theta2 <= 1.0))
    throw ConfigError("theta2 must be in (0, 1], got " + std::to_string(theta2));
  if (!in(theta3, -1.0, 1.0) && mode == AggregationMode::kCoreWeightedMean)
    throw ConfigError("theta3 must be in [-1, 1], got " + std::to_string(theta3));
  if (dim == 0) throw ConfigError("dimension must be positive");
  if (batch == 0) throw ConfigError("batch must be at least 1");
  if (embedder != "builtin" && embedder != "external")
    throw ConfigError("embedder must be 'builtin' or 'external'");
  if (embedder == "external" && vectors_dir.empty())
    throw ConfigError("the external embedder needs --vectors");
}

std::string PipelineConfig::to_json() const {
  nlohmann::ordered_json j{{"theta1", theta1},
                           {"theta2", theta2},
                           {"theta3", theta3},
                           {"dim", dim},
                           {"batch", batch},
                           {"mode", to_string(mode)},
                           {"export_filter", stages.export_filter},
                           {"mi_filter", stages.mi_filter},
                           {"weights", stages.weights},
                           {"embedder", embedder},
                           {"seed", rng_seed}};
  return j.dump();
}

void apply_config_file(PipelineConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    auto take = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    take("theta1", c.theta1);
    take("theta2", c.theta2);
    take("theta3", c.theta3);
    take("dim", c.dim);
    take("batch", c.batch);
    take("export_filter", c.stages.export_filter);
    take("mi_filter", c.stages.mi_filter);
    take("weights", c.stages.weights);
    take("embedder", c.embedder);
    take("vectors", c.vectors_dir);
    take("seed", c.rng_seed);
    take("threads", c.threads);
    take("timing", c.timing);
    if (j.contains("mode")) c.mode = parse_aggregation_mode(j.at("mode").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad config file '" + path + "': " + e.what());
  }
}

namespace {

// Flags shared by the pipeline subcommands. Unset flags leave the config
// file (or default) value in place.
struct CommonFlags {
  std::string config_file;
  std::optional<double> theta1, theta2, theta3;
  std::optional<std::size_t> dim, batch;
  std::optional<std::string> mode, embedder, vectors;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool no_export = false, no_mi = false, no_weights = false, no_timing = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "JSON config file");
    app->add_option("--theta1", theta1, "function similarity threshold (default 0.8)");
    app->add_option("--theta2", theta2, "MI retention fraction (default 0.2)");
    app->add_option("--theta3", theta3, "library decision threshold (default 0.89)");
    app->add_option("--dim", dim, "embedding dimension (default 768)");
    app->add_option("--batch", batch, "similarity batch rows (default 128)");
    app->add_option("--mode", mode, "core-weighted-mean | literal-eq8");
    app->add_option("--embedder", embedder, "builtin | external");
    app->add_option("--vectors", vectors, "directory of <binary_id>.vec.jsonl tables");
    app->add_option("--seed", seed, "embedder hash seed");
    app->add_option("--threads", threads, "worker threads");
    app->add_flag("--no-export", no_export, "skip the export-table stage");
    app->add_flag("--no-mi", no_mi, "skip the MI stage");
    app->add_flag("--no-weights", no_weights, "use uniform weights");
    app->add_flag("--no-timing", no_timing, "do not print stage timings");
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config_file.empty()) apply_config_file(c, config_file);
    if (theta1) c.theta1 = *theta1;
    if (theta2) c.theta2 = *theta2;
    if (theta3) c.theta3 = *theta3;
    if (dim) c.dim = *dim;
    if (batch) c.batch = *batch;
    if (mode) c.mode = parse_aggregation_mode(*mode);
    if (embedder) c.embedder = *embedder;
    if (vectors) c.vectors_dir = *vectors;
    if (seed) c.rng_seed = *seed;
    if (threads) c.threads = *threads;
    if (no_export) c.stages.export_filter = false;
    if (no_mi) c.stages.mi_filter = false;
    if (no_weights) c.stages.weights = false;
    if (no_timing) c.timing = false;
    c.validate();
    if (c.threads > 0) kernels::set_threads(c.threads);
    return c;
  }
};

std::vector<std::string> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& entry : fs::directory_iterator(in))
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl" &&
            entry.path().string().find(".vec.") == std::string::npos)
          found.push_back(entry.path().string());
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(in);
    }
  }
  return files;
}

std::vector<BinaryDocument> read_documents(const std::vector<std::string>& inputs) {
  std::vector<BinaryDocument> docs;
  for (const auto& path : expand_inputs(inputs)) {
    try {
      docs.push_back(read_document_file(path));
    } catch (const ParseError& e) {
      throw ParseError(path + ": " + e.what(), 0);
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": " + e.what());
    }
  }
  return docs;
}

std::unique_ptr<Embedder> make_embedder(const PipelineConfig& c,
                                        const std::vector<BinaryDocument>& docs) {
  if (c.embedder == "builtin") return std::make_unique<HashingEmbedder>(c.dim, c.rng_seed);
  auto ext = std::make_unique<ExternalEmbedder>(c.dim);
  for (const auto& doc : docs) {
    const auto path = (fs::path(c.vectors_dir) / (doc.binary_id + ".vec.jsonl")).string();
    ext->add_table(doc.binary_id, import_embeddings_file(filter_sections(doc), path, c.dim));
  }
  return ext;
}

void print_timings(const StageTimings& t, std::ostream& out) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "timing: T1 export %.3fs  T2 weighting %.3fs  T3 MI %.3fs  total %.3fs\n",
                t.t1_export, t.t2_weighting, t.t3_mi, t.total);
  out << buf;
}

void print_stats(const TplRepository& repo, std::ostream& out) {
  const auto& s = repo.stats;
  const double origin = s.origin > 0 ? static_cast<double>(s.origin) : 1.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-14s %10s %10s %10s\n", "", "Origin", "Export", "Export+MI");
  out << buf;
  std::snprintf(buf, sizeof buf, "%-14s %10lld %10lld %10lld\n", "Func Num",
                static_cast<long long>(s.origin), static_cast<long long>(s.after_export),
                static_cast<long long>(s.after_mi));
  out << buf;
  std::snprintf(buf, sizeof buf, "%-14s %10.3f %10.3f %10.3f\n", "Leave Percent", 1.0,
                static_cast<double>(s.after_export) / origin,
                static_cast<double>(s.after_mi) / origin);
  out << buf;
}

// ---------------------------------------------------------------------------

struct GenFlags {
  std::string out_dir;
  SyntheticCorpusSpec spec;
  std::size_t targets = 20;
  std::size_t min_libs = 1, max_libs = 3;
  double min_fraction = 0.3, max_fraction = 1.0;
  std::string prefix = "target";
};

int cmd_gen(const GenFlags& g, std::ostream& out) {
  SyntheticCorpusSpec spec = g.spec;
  plant_random_reuse(spec, g.targets, g.min_libs, g.max_libs, g.min_fraction, g.max_fraction,
                     g.prefix, spec.rng_seed ^ 0x5eedULL);
  const SyntheticCorpus corpus = generate_corpus(spec);
  const fs::path root(g.out_dir);
  fs::create_directories(root / "libs");
  fs::create_directories(root / "targets");
  for (const auto& doc : corpus.libraries)
    write_document_file(doc, (root / "libs" / (doc.binary_id + ".jsonl")).string());
  for (const auto& doc : corpus.targets)
    write_document_file(doc, (root / "targets" / (doc.binary_id + ".jsonl")).string());
  std::ofstream m(root / "manifest.json");
  write_manifest(corpus.manifest, m);
  out << "generated " << corpus.libraries.size() << " libraries and " << corpus.targets.size()
      << " targets in " << g.out_dir << "\n";
  return kExitOk;
}

int cmd_build(const CommonFlags& flags, const std::vector<std::string>& libs,
              const std::string& out_path, std::ostream& out, std::ostream& err) {
  const PipelineConfig c = flags.resolve();
  const auto docs = read_documents(libs);
  std::vector<BinaryDocument> filtered;
  for (const auto& d : docs) filtered.push_back(filter_sections(d));
  const auto embedder = make_embedder(c, docs);
  auto warn = [&](const std::string& w) { err << "warning: " << w << "\n"; };
  const TplRepository origin = build_origin(filtered, *embedder, warn);
  StageTimings t;
  const TplRepository repo =
      run_purification(origin, c.stages, c.theta1, c.theta2, warn, &t);
  persist_file(repo, out_path);
  out << "# config " << c.to_json() << "\n";
  print_stats(repo, out);
  if (c.timing) print_timings(t, out);
  out << "wrote " << out_path << " (" << repo.libraries.size() << " libraries, "
      << repo.feature_count() << " features)\n";
  return kExitOk;
}

int cmd_detect(const CommonFlags& flags, const std::string& repo_path,
               const std::vector<std::string>& binaries, const std::string& out_path,
               std::ostream& out, std::ostream& err) {
  const PipelineConfig c = flags.resolve();
  const TplRepository repo = load_file(repo_path);
  if (repo.config.dim != c.dim)
    throw ConfigError("repository dimension " + std::to_string(repo.config.dim) +
                      " != configured dimension " + std::to_string(c.dim));
  const auto docs = read_documents(binaries);
  const auto embedder = make_embedder(c, docs);
  auto warn = [&](const std::string& w) { err << "warning: " << w << "\n"; };
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) throw Error("cannot write '" + out_path + "'");
  }
  for (const auto& doc : docs) {
    const auto filtered = filter_sections(doc);
    const auto binary = embed_binary(filtered, *embedder);
    const auto report = detect(binary, repo, c.theta3, c.mode, warn);
    if (file) write_report(report, file);
    print_summary(report, out);
  }
  return kExitOk;
}

EmbeddedCorpus load_corpus(const PipelineConfig& c, const std::vector<std::string>& libs,
                           const std::vector<std::string>& targets, const std::string& manifest,
                           std::ostream& err) {
  const auto lib_docs = read_documents(libs);
  const auto target_docs = read_documents(targets);
  std::vector<BinaryDocument> all = lib_docs;
  all.insert(all.end(), target_docs.begin(), target_docs.end());
  const auto embedder = make_embedder(c, all);
  auto warn = [&](const std::string& w) { err << "warning: " << w << "\n"; };
  return embed_corpus(lib_docs, target_docs, read_manifest_file(manifest), *embedder, warn);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(std::stod(item));
  return v;
}

int cmd_sweep(const CommonFlags& flags, const std::vector<std::string>& libs,
              const std::vector<std::string>& targets, const std::string& manifest,
              const std::string& out_path, const std::string& t1, const std::string& t2,
              const std::string& t3, std::ostream& out, std::ostream& err) {
  const PipelineConfig c = flags.resolve();
  const EmbeddedCorpus corpus = load_corpus(c, libs, targets, manifest, err);
  SweepAxes axes = SweepAxes::default_grid();
  if (!t1.empty()) axes.theta1 = parse_list(t1);
  if (!t2.empty()) axes.theta2 = parse_list(t2);
  if (!t3.empty()) axes.theta3 = parse_list(t3);
  for (double v : axes.theta2)
    if (!(v > 0.0 && v <= 1.0)) throw ConfigError("theta2 grid values must be in (0, 1]");
  const SweepGrid grid = sweep(corpus, axes, c.mode, c.stages);
  std::ofstream file(out_path);
  if (!file) throw Error("cannot write '" + out_path + "'");
  file << "# config " << c.to_json() << "\n";
  write_sweep_csv(grid, file);
  const auto sel = select_cell(grid);
  const auto& best = grid.cells[sel.index];
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%zu cells; selected theta1=%.2f theta2=%.2f theta3=%.2f  "
                "P=%.3f R=%.3f F1=%.3f retained=%.3f (%zu tied)\n",
                grid.cells.size(), best.theta1, best.theta2, best.theta3,
                best.metrics.precision, best.metrics.recall, best.metrics.f1,
                best.retained_fraction, sel.tied);
  out << buf;
  return kExitOk;
}

int cmd_ablate(const CommonFlags& flags, const std::vector<std::string>& libs,
               const std::vector<std::string>& targets, const std::string& manifest,
               const std::string& out_path, std::ostream& out, std::ostream& err) {
  const PipelineConfig c = flags.resolve();
  const EmbeddedCorpus corpus = load_corpus(c, libs, targets, manifest, err);
  const auto rows = run_ablation(corpus, c.theta1, c.theta2, c.theta3, c.mode);
  if (!out_path.empty()) {
    std::ofstream file(out_path);
    if (!file) throw Error("cannot write '" + out_path + "'");
    file << "# config " << c.to_json() << "\n";
    write_ablation_csv(rows, file);
  }
  print_ablation_table(rows, out);
  if (c.timing) print_timings(time_stages(corpus.origin, c.theta1, c.theta2), out);
  return kExitOk;
}

int cmd_inspect(const std::string& repo_path, bool list, std::ostream& out) {
  const TplRepository repo = load_file(repo_path);
  const auto& cfg = repo.config;
  out << "repository " << repo_path << "\n";
  out << "  embedder      " << cfg.embedder_id << " (seed " << cfg.embedder_seed << ", dim "
      << cfg.dim << ")\n";
  out << "  theta1        " << cfg.theta1 << "\n";
  out << "  theta2        " << cfg.theta2 << "\n";
  out << "  stages        export=" << cfg.stages.export_filter << " mi=" << cfg.stages.mi_filter
      << " weights=" << cfg.stages.weights << "\n";
  out << "  MI cutoff     " << repo.stats.mi_cutoff << "\n";
  print_stats(repo, out);
  char buf[200];
  for (const auto& [id, features] : repo.libraries) {
    double total = 0.0;
    for (const auto& f : features) total += f.weight;
    std::snprintf(buf, sizeof buf, "  %-32s %6zu features  weight sum %.4f\n", id.c_str(),
                  features.size(), total);
    out << buf;
    if (list)
      for (const auto& f : features) {
        std::snprintf(buf, sizeof buf, "      %-40s MI %8.3f  w %.5f  n %lld  df %lld\n",
                      f.function_name.c_str(), f.profile.mi, f.weight,
                      static_cast<long long>(f.n_in_library), static_cast<long long>(f.df));
        out << buf;
      }
  }
  return kExitOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const ValidationError*>(&e))
    return kExitInput;
  if (dynamic_cast<const FormatError*>(&e)) return kExitFormat;
  if (dynamic_cast<const DimensionError*>(&e)) return kExitDimension;
  return kExitError;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"tplscan: third-party library detection in binaries"};
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic corpus with planted reuse");
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--libraries", gen.spec.library_count, "library count");
  gen_cmd->add_option("--functions", gen.spec.functions_per_library, "functions per library");
  gen_cmd->add_option("--clone-rate", gen.spec.clone_rate, "cross-library clone rate");
  gen_cmd->add_option("--simple-rate", gen.spec.simple_fn_rate, "simple function rate");
  gen_cmd->add_option("--export-rate", gen.spec.export_rate, "exported function rate");
  gen_cmd->add_option("--style", gen.spec.style_strength, "per-library style strength");
  gen_cmd->add_option("--distractors", gen.spec.distractors_per_target, "application functions per target");
  gen_cmd->add_option("--targets", gen.targets, "number of target binaries");
  gen_cmd->add_option("--min-libs", gen.min_libs, "min libraries reused per target");
  gen_cmd->add_option("--max-libs", gen.max_libs, "max libraries reused per target");
  gen_cmd->add_option("--min-fraction", gen.min_fraction, "min reused fraction");
  gen_cmd->add_option("--max-fraction", gen.max_fraction, "max reused fraction");
  gen_cmd->add_option("--prefix", gen.prefix, "target name prefix");
  gen_cmd->add_option("--seed", gen.spec.rng_seed, "corpus seed");

  CommonFlags build_flags;
  std::vector<std::string> build_libs;
  std::string build_out;
  auto* build_cmd = app.add_subcommand("build", "build and purify a library repository");
  build_cmd->add_option("--libs", build_libs, "library documents or directories")->required();
  build_cmd->add_option("--out", build_out, "repository file")->required();
  build_flags.attach(build_cmd);

  CommonFlags detect_flags;
  std::string detect_repo, detect_out;
  std::vector<std::string> detect_bins;
  auto* detect_cmd = app.add_subcommand("detect", "detect library reuse in target binaries");
  detect_cmd->add_option("--repo", detect_repo, "repository file")->required();
  detect_cmd->add_option("--binary", detect_bins, "target documents or directories")->required();
  detect_cmd->add_option("--out", detect_out, "report file (JSON lines)");
  detect_flags.attach(detect_cmd);

  CommonFlags sweep_flags;
  std::vector<std::string> sweep_libs, sweep_targets;
  std::string sweep_manifest, sweep_out, grid1, grid2, grid3;
  auto* sweep_cmd = app.add_subcommand("sweep", "threshold grid search");
  sweep_cmd->add_option("--libs", sweep_libs, "library documents or directories")->required();
  sweep_cmd->add_option("--targets", sweep_targets, "target documents or directories")->required();
  sweep_cmd->add_option("--manifest", sweep_manifest, "ground-truth manifest")->required();
  sweep_cmd->add_option("--out", sweep_out, "CSV output")->required();
  sweep_cmd->add_option("--grid-theta1", grid1, "comma-separated theta1 values");
  sweep_cmd->add_option("--grid-theta2", grid2, "comma-separated theta2 values");
  sweep_cmd->add_option("--grid-theta3", grid3, "comma-separated theta3 values");
  sweep_flags.attach(sweep_cmd);

  CommonFlags ablate_flags;
  std::vector<std::string> ablate_libs, ablate_targets;
  std::string ablate_manifest, ablate_out;
  auto* ablate_cmd = app.add_subcommand("ablate", "stage ablation matrix");
  ablate_cmd->add_option("--libs", ablate_libs, "library documents or directories")->required();
  ablate_cmd->add_option("--targets", ablate_targets, "target documents or directories")->required();
  ablate_cmd->add_option("--manifest", ablate_manifest, "ground-truth manifest")->required();
  ablate_cmd->add_option("--out", ablate_out, "CSV output");
  ablate_flags.attach(ablate_cmd);

  std::string inspect_repo;
  bool inspect_list = false;
  auto* inspect_cmd = app.add_subcommand("inspect", "print repository statistics");
  inspect_cmd->add_option("repo", inspect_repo, "repository file")->required();
  inspect_cmd->add_flag("--functions", inspect_list, "list every retained function");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out);
    if (*build_cmd) return cmd_build(build_flags, build_libs, build_out, out, err);
    if (*detect_cmd)
      return cmd_detect(detect_flags, detect_repo, detect_bins, detect_out, out, err);
    if (*sweep_cmd)
      return cmd_sweep(sweep_flags, sweep_libs, sweep_targets, sweep_manifest, sweep_out, grid1,
                       grid2, grid3, out, err);
    if (*ablate_cmd)
      return cmd_ablate(ablate_flags, ablate_libs, ablate_targets, ablate_manifest, ablate_out,
                        out, err);
    if (*inspect_cmd) return cmd_inspect(inspect_repo, inspect_list, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace tplscan
