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

#include "subbayes/swag.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "json.hpp"
#include "subbayes/error.hpp"
#include "subbayes/sbmx.hpp"

namespace subbayes {

Matrix SwagPosterior::covariance() const {
  Matrix cov = matmul_nt(D, D);
  for (std::size_t i = 0; i < dim(); ++i) cov(i, i) += sigma2[i];
  return cov * 0.5;
}

SwagCollector::SwagCollector(std::size_t dim, std::size_t k) : k_(k), mean_(dim, 0.0), sq_mean_(dim, 0.0) {
  if (dim == 0) throw ShapeError("SwagCollector: dim must be positive");
}

void SwagCollector::collect(std::span<const double> theta) {
  if (theta.size() != dim()) {
    throw ShapeError("swag_collect: theta has " + std::to_string(theta.size()) + " entries, expected " +
                     std::to_string(dim()));
  }
  ++n_;
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < dim(); ++i) {
    mean_[i] += (theta[i] - mean_[i]) * inv_n;
    sq_mean_[i] += (theta[i] * theta[i] - sq_mean_[i]) * inv_n;
  }
  if (k_ == 0) return;
  Vector dev(dim());
  for (std::size_t i = 0; i < dim(); ++i) dev[i] = theta[i] - mean_[i];
  deviations_.push_back(std::move(dev));
  if (deviations_.size() > k_) deviations_.pop_front();
}

SwagCollector swag_collect(SwagCollector c, std::span<const double> theta) {
  c.collect(theta);
  return c;
}

SwagPosterior swag_finalize(const SwagCollector& c) {
  if (c.collected() < 2) {
    throw NumericalError("swag_finalize: need at least 2 snapshots, have " + std::to_string(c.collected()));
  }
  SwagPosterior p;
  p.mean = c.mean();
  p.sigma2.resize(c.dim());
  for (std::size_t i = 0; i < c.dim(); ++i) {
    p.sigma2[i] = std::max(c.second_moment()[i] - c.mean()[i] * c.mean()[i], kSwagVarianceFloor);
  }
  const auto& devs = c.deviations();
  p.D = Matrix(c.dim(), devs.size());
  for (std::size_t j = 0; j < devs.size(); ++j) p.D.set_col(j, devs[j]);
  return p;
}

Vector swag_sample(const SwagPosterior& p, SeededRng& rng) {
  const Vector z1 = standard_normal_vector(rng, p.dim());
  const Vector z2 = standard_normal_vector(rng, p.D.cols());
  const Vector low_rank = matvec(p.D, z2);
  Vector theta(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i) {
    theta[i] = p.mean[i] + (1.0 / std::numbers::sqrt2) * (std::sqrt(p.sigma2[i]) * z1[i] + low_rank[i]);
  }
  return theta;
}

void save_swag(const std::filesystem::path& dir, const SwagPosterior& p, const SwagMeta& meta) {
  std::filesystem::create_directories(dir);
  write_sbmx(dir / "mu.sbmx", Matrix::column(p.mean));
  write_sbmx(dir / "sigma2.sbmx", Matrix::column(p.sigma2));
  write_sbmx(dir / "D.sbmx", p.D);
  nlohmann::json j;
  j["k"] = meta.k;
  j["burn_in_epoch"] = meta.burn_in_epoch;
  j["snapshots_collected"] = meta.collected;
  std::ofstream f(dir / "meta.json", std::ios::trunc);
  if (!f) throw FormatError("save_swag: cannot write meta.json in " + dir.string());
  f << j.dump(2) << '\n';
}

SwagPosterior load_swag(const std::filesystem::path& dir, SwagMeta* meta) {
  SwagPosterior p;
  const Matrix mu = read_sbmx(dir / "mu.sbmx");
  const Matrix s2 = read_sbmx(dir / "sigma2.sbmx");
  p.D = read_sbmx(dir / "D.sbmx");
  if (mu.cols() != 1 || s2.cols() != 1 || mu.rows() != s2.rows() || p.D.rows() != mu.rows()) {
    throw FormatError("load_swag: inconsistent posterior shapes in " + dir.string());
  }
  p.mean = mu.values();
  p.sigma2 = s2.values();
  if (meta != nullptr) {
    std::ifstream f(dir / "meta.json");
    if (!f) throw FormatError("load_swag: missing meta.json in " + dir.string());
    try {
      const auto j = nlohmann::json::parse(f);
      meta->k = j.at("k").get<std::size_t>();
      meta->burn_in_epoch = j.at("burn_in_epoch").get<std::size_t>();
      meta->collected = j.at("snapshots_collected").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("load_swag: malformed meta.json: " + std::string(e.what()));
    }
  }
  return p;
}

}  // namespace subbayes
