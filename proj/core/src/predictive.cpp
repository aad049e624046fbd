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

#include "subbayes/predictive.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "subbayes/error.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {

namespace {

constexpr double kProbFloor = 1e-12;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_labels(const Matrix& probs, std::span<const int> labels, const char* op) {
  if (probs.rows() != labels.size()) throw ShapeError(std::string(op) + ": label count != row count");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols()) {
      throw ShapeError(std::string(op) + ": label out of range");
    }
  }
}

Vector sample_theta(const Posterior& posterior, SeededRng& rng) {
  if (const auto* s = std::get_if<SwagPosterior>(&posterior)) return swag_sample(*s, rng);
  return laplace_sample(std::get<LaplacePosterior>(posterior), rng);
}

}  // namespace

PredictiveSamples bma_predict(const Network& net, const Posterior& posterior, const Matrix& X, std::size_t S,
                              std::uint64_t seed) {
  if (S == 0) throw ConfigError("bma_predict: S must be at least 1");
  const bool point = std::holds_alternative<MapPoint>(posterior);
  if (point) S = 1;

  std::vector<Matrix> draws;
  draws.reserve(S);
  for (std::size_t j = 0; j < S; ++j) {
    if (point) {
      draws.push_back(softmax_rows(forward(net, X)));
      continue;
    }
    SeededRng rng(sub_seed(seed, j));
    const Vector theta = sample_theta(posterior, rng);
    draws.push_back(softmax_rows(forward(with_theta(net, theta), X)));
  }

  const std::size_t n = X.rows(), c = net.classes;
  PredictiveSamples out;
  out.per_input.assign(n, Matrix(S, c));
  out.mean = Matrix(n, c);
  for (std::size_t j = 0; j < S; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < c; ++k) {
        out.per_input[i](j, k) = draws[j](i, k);
        out.mean(i, k) += draws[j](i, k);
      }
    }
  }
  out.mean *= 1.0 / static_cast<double>(S);
  return out;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

UncertaintyTriple decompose(const Matrix& samples) {
  if (samples.rows() == 0) throw ShapeError("decompose: need at least one sample");
  const std::size_t s = samples.rows(), c = samples.cols();
  Vector mean(c, 0.0);
  double aleatoric = 0.0;
  for (std::size_t j = 0; j < s; ++j) {
    const auto row = samples.row_span(j);
    for (std::size_t k = 0; k < c; ++k) mean[k] += row[k];
    aleatoric += entropy(row);
  }
  for (double& v : mean) v /= static_cast<double>(s);
  aleatoric /= static_cast<double>(s);
  UncertaintyTriple t;
  t.total = entropy(mean);
  t.aleatoric = aleatoric;
  t.epistemic = t.total - t.aleatoric;
  return t;
}

std::vector<UncertaintyTriple> decompose_all(const PredictiveSamples& s) {
  std::vector<UncertaintyTriple> out;
  out.reserve(s.per_input.size());
  for (const auto& m : s.per_input) out.push_back(decompose(m));
  return out;
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = k;
  }
  return best;
}

double ece(const Matrix& mean_probs, std::span<const int> labels, std::size_t bins) {
  if (bins == 0) throw ConfigError("ece: bins must be at least 1");
  check_labels(mean_probs, labels, "ece");
  if (labels.empty()) return 0.0;
  std::vector<double> conf(bins, 0.0), hits(bins, 0.0), count(bins, 0.0);
  for (std::size_t i = 0; i < mean_probs.rows(); ++i) {
    const auto row = mean_probs.row_span(i);
    const std::size_t pred = argmax_row(row);
    const double c = row[pred];
    auto b = static_cast<std::size_t>(c * static_cast<double>(bins));
    if (b >= bins) b = bins - 1;
    conf[b] += c;
    hits[b] += pred == static_cast<std::size_t>(labels[i]) ? 1.0 : 0.0;
    count[b] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  double e = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0.0) continue;
    e += (count[b] / n) * std::abs(hits[b] / count[b] - conf[b] / count[b]);
  }
  return e;
}

double nll(const Matrix& mean_probs, std::span<const int> labels) {
  check_labels(mean_probs, labels, "nll");
  if (labels.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    s -= std::log(std::max(mean_probs(i, static_cast<std::size_t>(labels[i])), kProbFloor));
  }
  return s / static_cast<double>(labels.size());
}

double accuracy(const Matrix& mean_probs, std::span<const int> labels) {
  check_labels(mean_probs, labels, "accuracy");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    hits += argmax_row(mean_probs.row_span(i)) == static_cast<std::size_t>(labels[i]) ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double auroc(std::span<const double> scores_ood, std::span<const double> scores_id) {
  if (scores_ood.empty() || scores_id.empty()) throw ConfigError("auroc: both score lists must be nonempty");
  // Pool, sort, assign midranks to tie groups.
  struct Item {
    double v;
    bool ood;
  };
  std::vector<Item> all;
  all.reserve(scores_ood.size() + scores_id.size());
  for (double v : scores_ood) all.push_back({v, true});
  for (double v : scores_id) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Item& a, const Item& b) { return a.v < b.v; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < all.size()) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (all[k].ood) rank_sum += mid;
    }
    i = j;
  }
  const double n1 = static_cast<double>(scores_ood.size());
  const double n2 = static_cast<double>(scores_id.size());
  const double u = rank_sum - n1 * (n1 + 1.0) / 2.0;
  return u / (n1 * n2);
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("wasserstein1: both samples must be nonempty");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size()), nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double x = std::min(sa.front(), sb.front());
  double w = 0.0;
  while (i < sa.size() || j < sb.size()) {
    double next;
    if (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) {
      next = sa[i];
    } else {
      next = sb[j];
    }
    w += std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb) * (next - x);
    x = next;
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
  }
  return w;
}

Metrics compute_metrics(const PredictiveSamples& s, std::span<const int> labels, std::size_t bins) {
  Metrics m;
  m.accuracy = accuracy(s.mean, labels);
  m.ece = ece(s.mean, labels, bins);
  m.nll = nll(s.mean, labels);
  const auto triples = decompose_all(s);
  for (const auto& t : triples) {
    m.mean_total_entropy += t.total;
    m.mean_aleatoric += t.aleatoric;
    m.mean_epistemic += t.epistemic;
  }
  if (!triples.empty()) {
    const double n = static_cast<double>(triples.size());
    m.mean_total_entropy /= n;
    m.mean_aleatoric /= n;
    m.mean_epistemic /= n;
  }
  return m;
}

std::string metrics_to_json(const Metrics& m) {
  std::ostringstream os;
  os << "{\n"
     << "  \"accuracy\": " << fmt(m.accuracy) << ",\n"
     << "  \"ece\": " << fmt(m.ece) << ",\n"
     << "  \"nll\": " << fmt(m.nll) << ",\n"
     << "  \"mean_total_entropy\": " << fmt(m.mean_total_entropy) << ",\n"
     << "  \"mean_aleatoric\": " << fmt(m.mean_aleatoric) << ",\n"
     << "  \"mean_epistemic\": " << fmt(m.mean_epistemic) << ",\n"
     << "  \"auroc\": " << fmt(m.auroc) << ",\n"
     << "  \"w1\": " << fmt(m.w1) << "\n"
     << "}\n";
  return os.str();
}

std::string entropy_csv(std::span<const UncertaintyTriple> triples) {
  std::ostringstream os;
  os << "index,total,aleatoric,epistemic\n";
  for (std::size_t i = 0; i < triples.size(); ++i) {
    os << i << ',' << fmt(triples[i].total) << ',' << fmt(triples[i].aleatoric) << ',' << fmt(triples[i].epistemic)
       << '\n';
  }
  return os.str();
}

}  // namespace subbayes
