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

#include "subbayes/projections.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "json.hpp"
#include "subbayes/error.hpp"
#include "subbayes/linalg.hpp"
#include "subbayes/sbmx.hpp"

namespace subbayes {

namespace {

using nlohmann::json;

// Seed used for the single retry when a Gaussian draw is numerically rank
// deficient (probability zero in exact arithmetic).
constexpr std::uint64_t kRetryStream = 0x5DEECE66DULL;

void check_rank(const Matrix& w0, std::size_t rank, const char* op) {
  if (w0.empty()) throw ShapeError(std::string(op) + ": empty weight matrix");
  if (rank < 1 || rank > std::min(w0.rows(), w0.cols())) {
    throw ShapeError(std::string(op) + ": rank " + std::to_string(rank) + " outside [1, " +
                     std::to_string(std::min(w0.rows(), w0.cols())) + "]");
  }
}

// Indices of the `count` largest values, ties to the lower index, returned ascending.
std::vector<std::size_t> top_indices(const Vector& values, std::size_t count) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  order.resize(count);
  std::sort(order.begin(), order.end());
  return order;
}

json meta_to_json(const ProjectionMeta& m) {
  json j;
  j["dct_rows"] = m.dct_rows;
  j["dct_cols"] = m.dct_cols;
  j["row_perm"] = m.row_perm;
  j["col_perm"] = m.col_perm;
  j["permuted"] = m.permuted;
  j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  j["ridge"] = m.ridge ? json(*m.ridge) : json(nullptr);
  json parts = json::array();
  for (auto k : m.parts) parts.push_back(std::string(to_string(k)));
  j["parts"] = parts;
  json part_meta = json::array();
  for (const auto& pm : m.part_meta) part_meta.push_back(meta_to_json(pm));
  j["part_meta"] = part_meta;
  return j;
}

ProjectionMeta meta_from_json(const json& j) {
  ProjectionMeta m;
  m.dct_rows = j.at("dct_rows").get<std::vector<std::size_t>>();
  m.dct_cols = j.at("dct_cols").get<std::vector<std::size_t>>();
  m.row_perm = j.at("row_perm").get<std::vector<std::size_t>>();
  m.col_perm = j.at("col_perm").get<std::vector<std::size_t>>();
  m.permuted = j.at("permuted").get<bool>();
  if (!j.at("seed").is_null()) m.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("ridge").is_null()) m.ridge = j.at("ridge").get<double>();
  for (const auto& p : j.at("parts")) m.parts.push_back(parse_projection_kind(p.get<std::string>()));
  for (const auto& pm : j.at("part_meta")) m.part_meta.push_back(meta_from_json(pm));
  return m;
}

}  // namespace

std::string_view to_string(ProjectionKind kind) {
  switch (kind) {
    case ProjectionKind::Svd: return "svd";
    case ProjectionKind::Wsvd: return "wsvd";
    case ProjectionKind::Dct: return "dct";
    case ProjectionKind::Rand: return "rand";
    case ProjectionKind::Hybrid: return "hybrid";
  }
  return "unknown";
}

ProjectionKind parse_projection_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "svd") return ProjectionKind::Svd;
  if (lower == "wsvd" || lower == "w-svd") return ProjectionKind::Wsvd;
  if (lower == "dct") return ProjectionKind::Dct;
  if (lower == "rand" || lower == "random") return ProjectionKind::Rand;
  if (lower == "hybrid") return ProjectionKind::Hybrid;
  throw ConfigError("unknown projection kind: " + std::string(name));
}

ProjectionPair build_svd(const Matrix& w0, std::size_t rank) {
  check_rank(w0, rank, "build_svd");
  const SvdResult s = svd(w0);
  ProjectionPair p;
  p.A = scale_cols(s.U.cols_range(0, rank), std::span<const double>(s.S).first(rank));
  p.B = s.V.cols_range(0, rank).transpose();
  p.kind = ProjectionKind::Svd;
  p.rank = rank;
  return p;
}

double default_whitening_ridge(const Matrix& sigma_xx) {
  return 1e-6 * trace(sigma_xx) / static_cast<double>(sigma_xx.rows());
}

ProjectionPair build_wsvd(const Matrix& w0, const Matrix& sigma_xx, std::size_t rank, double ridge) {
  check_rank(w0, rank, "build_wsvd");
  if (sigma_xx.rows() != w0.rows() || sigma_xx.cols() != w0.rows()) {
    throw ShapeError("build_wsvd: sigma_xx must be n×n with n = rows(W0)");
  }
  const PsdRoots roots = psd_sqrt_and_invsqrt(sigma_xx, ridge);
  const Matrix whitened = matmul_tn(w0, roots.sqrt);  // W0ᵀ·P, m×n
  const SvdResult s = svd(whitened);
  ProjectionPair p;
  p.B = s.U.cols_range(0, rank).transpose();
  p.A = matmul(roots.inv_sqrt,
               scale_cols(s.V.cols_range(0, rank), std::span<const double>(s.S).first(rank)));
  p.kind = ProjectionKind::Wsvd;
  p.rank = rank;
  p.meta.ridge = ridge;
  return p;
}

Matrix dct_matrix(std::size_t d) {
  if (d == 0) throw ShapeError("dct_matrix: d must be positive");
  Matrix m(d, d);
  const double dd = static_cast<double>(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double alpha = k == 0 ? std::sqrt(1.0 / dd) : std::sqrt(2.0 / dd);
    for (std::size_t i = 0; i < d; ++i) {
      m(k, i) = alpha * std::cos(std::numbers::pi * static_cast<double>(k) *
                                 static_cast<double>(2 * i + 1) / (2.0 * dd));
    }
  }
  return m;
}

std::vector<std::size_t> l1_descending_row_order(const Matrix& m) {
  Vector l1(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (double v : m.row_span(i)) l1[i] += std::abs(v);
  std::vector<std::size_t> order(m.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return l1[a] > l1[b]; });
  return order;
}

std::vector<std::size_t> l1_descending_col_order(const Matrix& m) {
  return l1_descending_row_order(m.transpose());
}

Matrix permute(const Matrix& w, std::span<const std::size_t> row_perm,
               std::span<const std::size_t> col_perm) {
  if (row_perm.size() != w.rows() || col_perm.size() != w.cols()) {
    throw ShapeError("permute: permutation length mismatch");
  }
  return w.select_rows(row_perm).select_cols(col_perm);
}

ProjectionPair build_dct(const Matrix& w0, std::size_t rank, bool permute_first) {
  check_rank(w0, rank, "build_dct");
  const std::size_t n = w0.rows(), m = w0.cols();
  ProjectionPair p;
  p.kind = ProjectionKind::Dct;
  p.rank = rank;
  p.meta.permuted = permute_first;

  Matrix work = w0;
  if (permute_first) {
    p.meta.row_perm = l1_descending_row_order(w0);
    p.meta.col_perm = l1_descending_col_order(w0);
    work = permute(w0, p.meta.row_perm, p.meta.col_perm);
  }

  const Matrix dn = dct_matrix(n);
  const Matrix dm = dct_matrix(m);
  const Matrix coeffs = matmul_nt(matmul(dn, work), dm);

  Vector row_energy(n, 0.0), col_energy(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double e = coeffs(i, j) * coeffs(i, j);
      row_energy[i] += e;
      col_energy[j] += e;
    }
  }
  p.meta.dct_rows = top_indices(row_energy, rank);
  p.meta.dct_cols = top_indices(col_energy, rank);

  const Matrix core = coeffs.select_rows(p.meta.dct_rows).select_cols(p.meta.dct_cols);
  const Matrix a_sorted = matmul(dn.transpose().select_cols(p.meta.dct_rows), core);
  const Matrix b_sorted = dm.select_rows(p.meta.dct_cols);

  if (!permute_first) {
    p.A = a_sorted;
    p.B = b_sorted;
    return p;
  }
  // A = P_rᵀ·Ã and B = B̃·P_c scatter the sorted rows/cols back in place.
  p.A = Matrix(n, rank);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < rank; ++c) p.A(p.meta.row_perm[i], c) = a_sorted(i, c);
  p.B = Matrix(rank, m);
  for (std::size_t r = 0; r < rank; ++r)
    for (std::size_t j = 0; j < m; ++j) p.B(r, p.meta.col_perm[j]) = b_sorted(r, j);
  return p;
}

Matrix haar_frame(SeededRng& rng, std::size_t n, std::size_t r) {
  const Matrix g = standard_normal(rng, n, r);
  QrResult qr = qr_thin(g);
  for (std::size_t j = 0; j < r; ++j) {
    if (qr.R(j, j) < 0.0) {
      for (std::size_t i = 0; i < n; ++i) qr.Q(i, j) = -qr.Q(i, j);
    }
  }
  return qr.Q;
}

ProjectionPair build_random(const Matrix& w0, std::size_t rank, std::uint64_t seed) {
  check_rank(w0, rank, "build_random");
  auto attempt = [&](std::uint64_t s) {
    SeededRng rng(s);
    Matrix left = haar_frame(rng, w0.rows(), rank);
    Matrix right = haar_frame(rng, w0.cols(), rank);
    const Matrix core = matmul(matmul_tn(left, w0), right);
    ProjectionPair p;
    p.A = matmul(left, core);
    p.B = right.transpose();
    p.kind = ProjectionKind::Rand;
    p.rank = rank;
    p.meta.seed = s;
    return p;
  };
  try {
    return attempt(seed);
  } catch (const NumericalError&) {
    return attempt(sub_seed(seed, kRetryStream));
  }
}

ProjectionPair build_hybrid(const Matrix& w0, std::size_t rank, ProjectionKind first,
                            ProjectionKind second, const HybridOptions& opts) {
  if (rank % 2 != 0) throw ConfigError("build_hybrid: rank must be even, got " + std::to_string(rank));
  if (first == ProjectionKind::Hybrid || second == ProjectionKind::Hybrid) {
    throw ConfigError("build_hybrid: components cannot themselves be hybrid");
  }
  check_rank(w0, rank, "build_hybrid");
  const std::size_t half = rank / 2;
  auto build_half = [&](ProjectionKind kind) {
    ProjectionSpec spec;
    spec.kind = kind;
    spec.rank = half;
    spec.seed = opts.seed;
    spec.permute = opts.permute;
    spec.ridge = opts.ridge;
    return build_projection(w0, spec, opts.sigma_xx);
  };
  const ProjectionPair a = build_half(first);
  const ProjectionPair b = build_half(second);
  ProjectionPair p;
  p.A = hstack(a.A, b.A);
  p.B = vstack(a.B, b.B);
  p.kind = ProjectionKind::Hybrid;
  p.rank = rank;
  p.meta.parts = {first, second};
  p.meta.part_meta = {a.meta, b.meta};
  return p;
}

ProjectionPair build_projection(const Matrix& w0, const ProjectionSpec& spec, const Matrix* sigma_xx) {
  switch (spec.kind) {
    case ProjectionKind::Svd:
      return build_svd(w0, spec.rank);
    case ProjectionKind::Wsvd: {
      if (sigma_xx == nullptr) throw ConfigError("WSVD projection requires an input second moment");
      const double ridge = spec.ridge.value_or(default_whitening_ridge(*sigma_xx));
      return build_wsvd(w0, *sigma_xx, spec.rank, ridge);
    }
    case ProjectionKind::Dct:
      return build_dct(w0, spec.rank, spec.permute);
    case ProjectionKind::Rand:
      return build_random(w0, spec.rank, spec.seed);
    case ProjectionKind::Hybrid: {
      HybridOptions opts;
      opts.sigma_xx = sigma_xx;
      opts.ridge = spec.ridge;
      opts.seed = spec.seed;
      opts.permute = spec.permute;
      return build_hybrid(w0, spec.rank, spec.hybrid_first, spec.hybrid_second, opts);
    }
  }
  throw ConfigError("build_projection: unhandled kind");
}

double recon_error(const Matrix& w0, const ProjectionPair& pair) {
  if (pair.A.rows() != w0.rows() || pair.B.cols() != w0.cols() || pair.A.cols() != pair.B.rows()) {
    throw ShapeError("recon_error: projection pair does not match W0");
  }
  return frobenius_norm(w0 - pair.product());
}

double activation_error(const Matrix& w0, const ProjectionPair& pair, const Matrix& sigma_xx) {
  if (pair.A.rows() != w0.rows() || pair.B.cols() != w0.cols() || pair.A.cols() != pair.B.rows()) {
    throw ShapeError("activation_error: projection pair does not match W0");
  }
  if (sigma_xx.rows() != w0.rows() || sigma_xx.cols() != w0.rows()) {
    throw ShapeError("activation_error: sigma_xx must be n×n");
  }
  const Matrix diff = w0 - pair.product();
  const Matrix weighted = matmul(sigma_xx, diff);
  double tr = 0.0;
  for (std::size_t i = 0; i < diff.rows(); ++i)
    for (std::size_t j = 0; j < diff.cols(); ++j) tr += diff(i, j) * weighted(i, j);
  return std::max(tr, 0.0);
}

void save_projection(const std::filesystem::path& dir, const ProjectionPair& pair) {
  std::filesystem::create_directories(dir);
  write_sbmx(dir / "A.sbmx", pair.A);
  write_sbmx(dir / "B.sbmx", pair.B);
  json j;
  j["kind"] = std::string(to_string(pair.kind));
  j["rank"] = pair.rank;
  j["meta"] = meta_to_json(pair.meta);
  std::ofstream f(dir / "meta.json", std::ios::trunc);
  if (!f) throw FormatError("save_projection: cannot write " + (dir / "meta.json").string());
  f << j.dump(2) << '\n';
}

ProjectionPair load_projection(const std::filesystem::path& dir) {
  std::ifstream f(dir / "meta.json");
  if (!f) throw FormatError("load_projection: missing " + (dir / "meta.json").string());
  ProjectionPair p;
  try {
    const json j = json::parse(f);
    p.kind = parse_projection_kind(j.at("kind").get<std::string>());
    p.rank = j.at("rank").get<std::size_t>();
    p.meta = meta_from_json(j.at("meta"));
  } catch (const json::exception& e) {
    throw FormatError("load_projection: malformed meta.json: " + std::string(e.what()));
  }
  p.A = read_sbmx(dir / "A.sbmx");
  p.B = read_sbmx(dir / "B.sbmx");
  if (p.A.cols() != p.rank || p.B.rows() != p.rank) {
    throw FormatError("load_projection: factor shapes disagree with rank " + std::to_string(p.rank));
  }
  return p;
}

}  // namespace subbayes
