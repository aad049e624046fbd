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

#include "subbayes/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "subbayes/error.hpp"

namespace subbayes {

std::string_view to_string(TrainRegime regime) {
  return regime == TrainRegime::CoresOnly ? "cores-only" : "all";
}

TrainRegime parse_regime(std::string_view name) {
  if (name == "cores-only") return TrainRegime::CoresOnly;
  if (name == "all") return TrainRegime::All;
  throw ConfigError("unknown training regime: " + std::string(name));
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train: epochs must be positive");
  if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw ConfigError("train: warmup_fraction must be in [0, 1)");
  if (!(alpha > 0.0)) throw ConfigError("train: alpha must be positive");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train: train_fraction must be in (0, 1]");
}

double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total) {
  if (cfg.schedule == LrSchedule::Constant) return cfg.lr;
  const auto warmup = static_cast<std::size_t>(std::llround(cfg.warmup_fraction * static_cast<double>(total)));
  if (step < warmup) return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(warmup);
  if (total <= warmup) return cfg.lr;
  return cfg.lr * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

void AdamW::step(std::span<const ParamRef> params, std::span<const Matrix> grads, double lr, double weight_decay) {
  if (params.size() != grads.size()) throw ShapeError("AdamW: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value->rows(), p.value->cols());
      v_.emplace_back(p.value->rows(), p.value->cols());
    }
  }
  if (m_.size() != params.size()) throw ShapeError("AdamW: parameter set changed between steps");
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].value->data();
    const auto g = grads[k].data();
    auto m = m_[k].data();
    auto v = v_[k].data();
    if (g.size() != p.size()) throw ShapeError("AdamW: gradient shape mismatch for " + params[k].name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] -= lr * (mhat / (std::sqrt(vhat) + eps_) + weight_decay * p[i]);
    }
  }
}

double accuracy_of(const Matrix& logits, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row_span(r);
    const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += pred == labels[r] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

TrainResult train_map(Network net, const Dataset& train, const Dataset* val, const TrainConfig& cfg,
                      const EpochCallback& on_epoch) {
  cfg.validate();
  if (train.size() == 0) throw ConfigError("train_map: empty training set");
  for (auto& l : net.layers) {
    if (auto* a = std::get_if<AdaptedLinear>(&l)) a->trainable_ab = cfg.regime == TrainRegime::All;
  }
  net.validate();

  const std::size_t n = train.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.epochs;
  SeededRng rng(cfg.seed);
  AdamW opt;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const Dataset batch = train.subset(idx);
      ForwardCache cache;
      forward(net, batch.X, &cache);
      const double loss = loss_nll(cache.logits(), batch.y);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "train_map diverged: loss " << loss << " at epoch " << epoch << ", batch " << b;
        throw NumericalError(msg.str());
      }
      const auto grads = backward(net, cache, batch.y);
      auto params = trainable_params(net);
      opt.step(params, grads, scheduled_lr(cfg, step, total_steps), cfg.weight_decay);
      ++step;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    const Matrix train_logits = forward(net, train.X);
    rec.train_loss = loss_nll(train_logits, train.y);
    if (!std::isfinite(rec.train_loss)) throw NumericalError("train_map diverged at epoch " + std::to_string(epoch));
    rec.train_accuracy = accuracy_of(train_logits, train.y);
    if (val != nullptr && val->size() > 0) {
      const Matrix val_logits = forward(net, val->X);
      rec.val_loss = loss_nll(val_logits, val->y);
      rec.val_accuracy = accuracy_of(val_logits, val->y);
    }
    rec.theta = flatten(net);
    result.history.push_back(std::move(rec));
    if (on_epoch) on_epoch(epoch, net);
  }
  result.net = std::move(net);
  return result;
}

}  // namespace subbayes
