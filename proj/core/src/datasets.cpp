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

#include "subbayes/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "subbayes/error.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset out;
  out.X = X.select_rows(idx);
  out.classes = classes;
  out.y.reserve(idx.size());
  for (std::size_t i : idx) out.y.push_back(y[i]);
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw FormatError("write_csv: cannot open " + path.string());
  for (std::size_t c = 0; c < ds.X.cols(); ++c) f << 'x' << c << ',';
  f << "label\n";
  char buf[40];
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < ds.X.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.X(r, c));
      f << buf << ',';
    }
    f << ds.y[r] << '\n';
  }
  if (!f) throw FormatError("write_csv: write failed for " + path.string());
}

Dataset read_csv(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream f(path);
  if (!f) throw FormatError("read_csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw FormatError("read_csv: empty file " + path.string());
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  if (header.empty() || header.back() != "label") {
    throw FormatError("read_csv: last header column must be 'label' in " + path.string());
  }
  const std::size_t d = header.size() - 1;
  std::vector<double> values;
  std::vector<int> labels;
  int max_label = -1;
  std::size_t line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::size_t col = 0;
    while (std::getline(ss, tok, ',')) {
      try {
        if (col < d) {
          values.push_back(std::stod(tok));
        } else if (col == d) {
          labels.push_back(std::stoi(tok));
          max_label = std::max(max_label, labels.back());
        }
      } catch (const std::exception&) {
        throw FormatError("read_csv: bad value '" + tok + "' at line " + std::to_string(line_no));
      }
      ++col;
    }
    if (col != d + 1) throw FormatError("read_csv: wrong column count at line " + std::to_string(line_no));
    if (labels.back() < 0) throw FormatError("read_csv: negative label at line " + std::to_string(line_no));
  }
  Dataset ds;
  ds.y = std::move(labels);
  ds.X = Matrix(ds.y.size(), d, std::move(values));
  ds.classes = classes != 0 ? classes : static_cast<std::size_t>(std::max(max_label + 1, 2));
  for (int y : ds.y) {
    if (static_cast<std::size_t>(y) >= ds.classes) throw FormatError("read_csv: label exceeds class count");
  }
  return ds;
}

Dataset subsample(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  const auto n = ds.size();
  const auto keep = std::min<std::size_t>(
      n, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9)));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  SeededRng rng(seed);
  rng.shuffle(perm);
  perm.resize(std::max<std::size_t>(keep, 1));
  std::sort(perm.begin(), perm.end());
  return ds.subset(perm);
}

namespace {

void shuffle_rows(Dataset& ds, SeededRng& rng) {
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  rng.shuffle(perm);
  ds = ds.subset(perm);
}

}  // namespace

Dataset make_two_moons(std::size_t n, double noise, SeededRng& rng) {
  Dataset ds;
  ds.X = Matrix(n, 2);
  ds.y.resize(n);
  ds.classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = std::numbers::pi * rng.uniform();
    double x0, x1;
    if (label == 0) {
      x0 = std::cos(t);
      x1 = std::sin(t);
    } else {
      x0 = 1.0 - std::cos(t);
      x1 = 0.5 - std::sin(t);
    }
    ds.X(i, 0) = x0 + noise * rng.normal();
    ds.X(i, 1) = x1 + noise * rng.normal();
    ds.y[i] = label;
  }
  shuffle_rows(ds, rng);
  return ds;
}

Dataset make_gaussian_blobs(std::size_t n, std::span<const double> mean, double std_dev, SeededRng& rng) {
  Dataset ds;
  ds.X = Matrix(n, mean.size());
  ds.y.resize(n);
  ds.classes = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double sign = label == 0 ? 1.0 : -1.0;
    for (std::size_t c = 0; c < mean.size(); ++c) ds.X(i, c) = sign * mean[c] + std_dev * rng.normal();
    ds.y[i] = label;
  }
  shuffle_rows(ds, rng);
  return ds;
}

Dataset make_shifted_blob(std::size_t n, std::span<const double> center, double std_dev, SeededRng& rng) {
  Dataset ds;
  ds.X = Matrix(n, center.size());
  ds.y.assign(n, 0);
  ds.classes = 2;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < center.size(); ++c) ds.X(i, c) = center[c] + std_dev * rng.normal();
  return ds;
}

Dataset rotate_features(const Dataset& ds, double degrees) {
  if (ds.X.cols() != 2) throw ConfigError("rotate_features: only 2-D features are supported");
  const double th = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(th), s = std::sin(th);
  Dataset out = ds;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const double x = ds.X(r, 0), y = ds.X(r, 1);
    out.X(r, 0) = c * x - s * y;
    out.X(r, 1) = s * x + c * y;
  }
  return out;
}

std::vector<double> nuisance_shift_center(const Dataset& ds, double distance) {
  if (ds.X.cols() != 2) throw ConfigError("nuisance_shift_center: only 2-D features are supported");
  double mean[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  double count[2] = {0.0, 0.0};
  double centroid[2] = {0.0, 0.0};
  for (std::size_t r = 0; r < ds.size(); ++r) {
    const int c = ds.y[r] == 0 ? 0 : 1;
    count[c] += 1.0;
    for (int k = 0; k < 2; ++k) {
      mean[c][k] += ds.X(r, k);
      centroid[k] += ds.X(r, k);
    }
  }
  if (count[0] == 0.0 || count[1] == 0.0) throw ConfigError("nuisance_shift_center: both classes must be present");
  const double dx = mean[1][0] / count[1] - mean[0][0] / count[0];
  const double dy = mean[1][1] / count[1] - mean[0][1] / count[0];
  const double len = std::hypot(dx, dy);
  if (len == 0.0) throw ConfigError("nuisance_shift_center: class means coincide");
  const double n = static_cast<double>(ds.size());
  return {centroid[0] / n - distance * dy / len, centroid[1] / n + distance * dx / len};
}

GeneratedData generate_data(const DataSpec& spec, std::uint64_t seed) {
  SeededRng rng(seed);
  auto draw = [&](std::size_t n) {
    if (spec.generator == "two-moons") return make_two_moons(n, spec.noise, rng);
    if (spec.generator == "gaussian-blobs") {
      const double m[2] = {spec.blob_mean, spec.blob_mean};
      return make_gaussian_blobs(n, m, spec.noise, rng);
    }
    throw ConfigError("unknown data generator: " + spec.generator);
  };
  if ((!spec.ood_shift_center.empty() && spec.ood_shift_center.size() != 2) || spec.ood_far_center.size() != 2) {
    throw ConfigError("OOD centers must be 2-D");
  }
  GeneratedData out;
  out.pretrain_train = rotate_features(draw(spec.n_pretrain), spec.pretrain_rotation);
  out.pretrain_val = rotate_features(draw(spec.n_val), spec.pretrain_rotation);
  out.train = draw(spec.n_train);
  out.val = draw(spec.n_val);
  out.test = draw(spec.n_test);
  const std::vector<double> shift =
      spec.ood_shift_center.empty() ? nuisance_shift_center(out.train, spec.ood_shift_distance) : spec.ood_shift_center;
  out.ood.emplace_back("ood_shift", make_shifted_blob(spec.n_ood, shift, spec.ood_std, rng));
  out.ood.emplace_back("ood_far", make_shifted_blob(spec.n_ood, spec.ood_far_center, spec.ood_std, rng));
  return out;
}

double mean_feature_norm(const Dataset& ds) {
  if (ds.size() == 0) return 0.0;
  double s = 0.0;
  for (std::size_t r = 0; r < ds.size(); ++r) s += norm2(ds.X.row_span(r));
  return s / static_cast<double>(ds.size());
}

}  // namespace subbayes
