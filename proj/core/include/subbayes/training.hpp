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

#ifndef SUBBAYES_TRAINING_HPP_
#define SUBBAYES_TRAINING_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "subbayes/datasets.hpp"
#include "subbayes/network.hpp"

namespace subbayes {

enum class TrainRegime {
  CoresOnly,  // only the cores R (and the head) train; A, B frozen
  All,        // A, B are optimized alongside R at MAP
};

std::string_view to_string(TrainRegime regime);
TrainRegime parse_regime(std::string_view name);

enum class LrSchedule {
  WarmupLinear,  // 0 → lr over the warmup fraction, then linearly to 0
  Constant,
};

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double lr = 1e-2;
  double weight_decay = 0.0;
  double warmup_fraction = 0.1;
  std::uint64_t seed = 0;
  double alpha = 16.0;
  double train_fraction = 1.0;
  TrainRegime regime = TrainRegime::CoresOnly;
  LrSchedule schedule = LrSchedule::WarmupLinear;

  // Throws ConfigError.
  void validate() const;
};

// Learning rate applied at optimizer step `step` (0-based) of `total`.
double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total);

class AdamW {
 public:
  AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  // Decoupled weight decay: p ← p − lr·(m̂ / (√v̂ + ε) + wd·p).
  void step(std::span<const ParamRef> params, std::span<const Matrix> grads, double lr, double weight_decay);
  std::size_t steps() const noexcept { return t_; }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
  ThetaVector theta;
};

struct TrainResult {
  Network net;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(std::size_t epoch, const Network& net)>;

// Minibatch AdamW on the mean NLL. Shuffling draws from SeededRng(cfg.seed),
// so identical inputs produce identical trajectories. Adapted layers are
// switched to cfg.regime before training. Throws NumericalError if the
// loss becomes non-finite.
TrainResult train_map(Network net, const Dataset& train, const Dataset* val, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {});

double accuracy_of(const Matrix& logits, std::span<const int> labels);

}  // namespace subbayes

#endif  // SUBBAYES_TRAINING_HPP_
