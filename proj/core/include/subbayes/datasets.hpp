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

#ifndef SUBBAYES_DATASETS_HPP_
#define SUBBAYES_DATASETS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "subbayes/matrix.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {

struct Dataset {
  Matrix X;            // N×d
  std::vector<int> y;  // N labels in [0, classes)
  std::size_t classes = 2;

  std::size_t size() const noexcept { return y.size(); }
  Dataset subset(std::span<const std::size_t> idx) const;
};

// CSV with a header row: feature columns x0..x{d-1}, then an integer
// `label` column. Values are written with 17 significant digits.
void write_csv(const std::filesystem::path& path, const Dataset& ds);
Dataset read_csv(const std::filesystem::path& path, std::size_t classes = 0);

// First ⌈fraction·N⌉ rows of a seeded permutation, kept in original order.
Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed);

Dataset make_two_moons(std::size_t n, double noise, SeededRng& rng);
// Two isotropic classes at +mean and -mean.
Dataset make_gaussian_blobs(std::size_t n, std::span<const double> mean, double std_dev, SeededRng& rng);
// Unlabeled (label 0) isotropic blob used as an out-of-distribution set.
Dataset make_shifted_blob(std::size_t n, std::span<const double> center, double std_dev, SeededRng& rng);
Dataset rotate_features(const Dataset& ds, double degrees);
// Centroid + distance·n, n the unit normal (+90°) of mean(class 1) - mean(class 0).
std::vector<double> nuisance_shift_center(const Dataset& ds, double distance);

struct DataSpec {
  std::string generator = "two-moons";  // "two-moons" or "gaussian-blobs"
  std::size_t n_pretrain = 1000;
  std::size_t n_train = 200;
  std::size_t n_val = 200;
  std::size_t n_test = 500;
  std::size_t n_ood = 500;
  double noise = 0.1;               // moons jitter or blob std
  double blob_mean = 3.0;           // gaussian-blobs class means ±(m, m)
  double pretrain_rotation = 30.0;  // degrees
  // Empty: centroid of the training inputs moved ood_shift_distance along
  // the unit normal of the class-mean difference.
  std::vector<double> ood_shift_center = {};
  double ood_shift_distance = 3.0;
  std::vector<double> ood_far_center = {4.0, -3.0};
  double ood_std = 0.5;
};

struct GeneratedData {
  Dataset pretrain_train;
  Dataset pretrain_val;
  Dataset train;
  Dataset val;
  Dataset test;
  // ("ood_shift", ...) is the standard shift; ("ood_far", ...) the second.
  std::vector<std::pair<std::string, Dataset>> ood;
};

// Throws ConfigError on an unknown generator.
GeneratedData generate_data(const DataSpec& spec, std::uint64_t seed);

double mean_feature_norm(const Dataset& ds);

}  // namespace subbayes

#endif  // SUBBAYES_DATASETS_HPP_
