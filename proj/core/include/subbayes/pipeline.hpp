// Copyright 2026 The subbayes Authors.
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

#ifndef SUBBAYES_PIPELINE_HPP_
#define SUBBAYES_PIPELINE_HPP_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "subbayes/datasets.hpp"
#include "subbayes/laplace.hpp"
#include "subbayes/network.hpp"
#include "subbayes/projections.hpp"
#include "subbayes/training.hpp"

namespace subbayes {

struct CsvSources {
  std::filesystem::path pretrain_train;
  std::filesystem::path pretrain_val;
  std::filesystem::path train;
  std::filesystem::path val;
  std::filesystem::path test;
  std::map<std::string, std::filesystem::path> ood;
};

struct ModelSpec {
  std::vector<std::size_t> hidden = {16, 16};
  ActivationKind activation = ActivationKind::Tanh;
  std::size_t pretrain_epochs = 100;
  double pretrain_lr = 1e-2;
};

struct SwagConfig {
  std::size_t burn_in_epoch = 0;  // 0: half of train.epochs
  std::size_t epochs = 25;
  std::size_t k = 10;
  std::size_t samples = 15;
  double lr_factor = 0.1;
};

struct LaplaceConfig {
  LaplaceStructure structure = LaplaceStructure::Kron;
  std::size_t checkpoint_epoch = 0;  // 0: half of train.epochs
  std::vector<double> grid = default_prior_grid();
  std::size_t samples = 15;
};

struct EvalConfig {
  std::vector<std::string> posteriors = {"map", "swag", "laplace"};
  std::size_t ece_bins = 15;
  std::string ood_score = "total";  // or "epistemic"
  std::string ood_reference = "ood_shift";
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  DataSpec data;
  std::optional<CsvSources> csv;
  ModelSpec model;
  ProjectionSpec projection;
  TrainConfig train;
  SwagConfig swag;
  LaplaceConfig laplace;
  EvalConfig evaluate;

  std::size_t burn_in_epoch() const;
  std::size_t laplace_epoch() const;
  // Throws ConfigError on the first violated constraint.
  void validate() const;
};

// Parses and validates JSON text; unknown keys at any level are a ConfigError.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);
// Canonical JSON of every field, used for the config hash.
std::string canonical_config_json(const RunConfig& cfg);

// Hex SHA-1 of "blob <size>\0<bytes>", as git computes it.
std::string git_blob_sha1(const std::string& bytes);
std::string git_blob_sha1_file(const std::filesystem::path& path);

struct PhaseRecord {
  double wall_time_s = 0.0;
  std::map<std::string, std::string> artifacts;  // path relative to run dir -> blob hash
  std::map<std::string, std::string> notes;
};

struct RunManifest {
  std::string config_hash;
  std::map<std::string, PhaseRecord> phases;

  static RunManifest load_or_empty(const std::filesystem::path& run_dir);
  void save(const std::filesystem::path& run_dir) const;
};

inline constexpr const char* kPhases[] = {"gen-data", "pretrain", "project", "train-map",
                                          "fit-swag", "fit-laplace", "evaluate", "ood"};

// Each phase reads its prerequisites from <output_dir>/<phase>/ and writes
// into its own directory, then records itself in <output_dir>/manifest.json.
// Missing prerequisites raise MissingArtifactError naming the absent phase.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);

  const RunConfig& config() const noexcept { return cfg_; }
  std::filesystem::path phase_dir(const std::string& phase) const;

  void gen_data();
  void pretrain();
  void project();
  void train_map();
  void fit_swag();
  void fit_laplace();
  void evaluate();
  void ood();
  void run_all();

  void run_phase(const std::string& phase);

 private:
  GeneratedData load_data() const;
  Dataset load_train_subset() const;
  Network load_checkpoint(const std::string& phase, const std::string& name) const;
  void record(const std::string& phase, std::chrono::steady_clock::time_point start,
              const std::map<std::string, std::string>& notes = {});

  RunConfig cfg_;
};

}  // namespace subbayes

#endif  // SUBBAYES_PIPELINE_HPP_
