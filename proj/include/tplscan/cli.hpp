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

#ifndef TPLSCAN_CLI_HPP
#define TPLSCAN_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tplscan/detector.hpp"
#include "tplscan/repository.hpp"

namespace tplscan {

enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,       // I/O and anything unclassified
  kExitUsage = 2,       // bad flags or configuration
  kExitInput = 3,       // parse or validation failures
  kExitFormat = 4,      // repository container errors
  kExitDimension = 5,
};

struct PipelineConfig {
  double theta1 = 0.8;
  double theta2 = 0.2;
  double theta3 = 0.89;
  std::size_t dim = kDefaultDim;
  std::size_t batch = kDefaultBatch;
  AggregationMode mode = AggregationMode::kCoreWeightedMean;
  StageFlags stages;
  std::string embedder = "builtin";  // or "external"
  std::string vectors_dir;           // <dir>/<binary_id>.vec.jsonl
  std::uint64_t rng_seed = kDefaultHashSeed;
  int threads = 0;                   // 0: OpenMP default
  bool timing = true;

  // Throws ConfigError.
  void validate() const;
  std::string to_json() const;
};

// Overlays the keys present in a JSON config file onto `config`.
void apply_config_file(PipelineConfig& config, const std::string& path);

// Entry point shared by the tplscan binary and the tests.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tplscan

#endif  // TPLSCAN_CLI_HPP
