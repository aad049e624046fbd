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

// Command-line driver for the fine-tuning pipeline.
//
//   subbayes <phase> --config run.json [--out DIR] [--train-fraction F] [--seed N]
//
// Exit codes: 0 success, 1 missing artifact or I/O failure, 2 config error,
// 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "subbayes/error.hpp"
#include "subbayes/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Overrides {
  std::string config;
  std::optional<std::string> out;
  std::optional<double> train_fraction;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "Run configuration (JSON)")->required();
  cmd->add_option("--out", o.out, "Run directory; overrides output_dir");
  cmd->add_option("--train-fraction", o.train_fraction, "Fraction of the training set to keep, in (0, 1]");
  cmd->add_option("--seed", o.seed, "Master seed; overrides the config");
}

int run(const std::string& phase, const Overrides& o) {
  try {
    subbayes::RunConfig cfg = subbayes::load_run_config(o.config);
    if (o.out) cfg.output_dir = *o.out;
    if (o.train_fraction) cfg.train.train_fraction = *o.train_fraction;
    if (o.seed) cfg.seed = *o.seed;
    subbayes::Pipeline pipeline(std::move(cfg));
    if (phase == "run") {
      pipeline.run_all();
    } else {
      pipeline.run_phase(phase);
    }
    std::cout << phase << ": ok (" << pipeline.phase_dir(phase == "run" ? "ood" : phase).string() << ")\n";
    return kExitOk;
  } catch (const subbayes::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const subbayes::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const subbayes::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << " (run '" << e.phase() << "' first)\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian fine-tuning in projected low-rank subspaces"};
  app.require_subcommand(1);

  const std::pair<const char*, const char*> commands[] = {
      {"gen-data", "Generate train/val/test and OOD CSVs"},
      {"pretrain", "Train the base network on the related task"},
      {"project", "Build per-layer projections A, B from the base weights"},
      {"train-map", "MAP fine-tuning of the cores"},
      {"fit-swag", "Collect the SWAG posterior from the burn-in checkpoint"},
      {"fit-laplace", "Fit the Laplace posterior at the MAP checkpoint"},
      {"evaluate", "Accuracy, ECE, NLL and entropies on the test set"},
      {"ood", "Entropy distributions, AUROC and W1 on OOD sets"},
      {"run", "All phases in order"},
  };
  Overrides overrides;
  std::string selected;
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_common(cmd, overrides);
    cmd->callback([&selected, n = std::string(name)] { selected = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  return run(selected, overrides);
}
