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

#include "subbayes/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <string>

#include "json.hpp"
#include "subbayes/error.hpp"
#include "subbayes/linalg.hpp"
#include "subbayes/sbmx.hpp"

namespace subbayes {

namespace {

using nlohmann::json;

void require_data(const Dataset& data, const Network& net, const char* op) {
  if (data.size() == 0) throw ConfigError(std::string(op) + ": empty dataset");
  if (data.X.cols() != net.input_dim()) throw ShapeError(std::string(op) + ": feature dimension mismatch");
}

// Rotates a row-major r×r block into the (Q_A ⊗ Q_G) eigenbasis: Q_Aᵀ·M·Q_G.
Matrix to_eigenbasis(const KronEigen& e, std::span<const double> block) {
  const std::size_t r = e.a_vectors.rows();
  Matrix m(r, r, std::vector<double>(block.begin(), block.end()));
  return matmul(matmul_tn(e.a_vectors, m), e.g_vectors);
}

}  // namespace

std::string_view to_string(LaplaceStructure s) { return s == LaplaceStructure::Diag ? "diag" : "kron"; }

LaplaceStructure parse_laplace_structure(std::string_view name) {
  if (name == "diag" || name == "DIAG") return LaplaceStructure::Diag;
  if (name == "kron" || name == "KRON") return LaplaceStructure::Kron;
  throw ConfigError("unknown Laplace structure: " + std::string(name));
}

CurvatureDiag fit_ggn_diag(const Network& net, const Dataset& data) {
  require_data(data, net, "fit_ggn_diag");
  const auto layout = theta_layout(net);
  const std::size_t dim = layout.empty() ? 0 : layout.back().offset + layout.back().length();
  CurvatureDiag out{Vector(dim, 0.0), data.size()};
  const Matrix probs = softmax_rows(forward(net, data.X));
  const std::size_t classes = net.classes;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Matrix jac = logit_jacobian(net, data.X.row_span(n));
    const auto p = probs.row_span(n);
    for (std::size_t i = 0; i < dim; ++i) {
      // Σ_c p_c J_ci² − (Σ_c p_c J_ci)²
      double second = 0.0, first = 0.0;
      for (std::size_t c = 0; c < classes; ++c) {
        const double j = jac(c, i);
        second += p[c] * j * j;
        first += p[c] * j;
      }
      out.h[i] += std::max(second - first * first, 0.0);
    }
  }
  return out;
}

CurvatureKron fit_kfac(const Network& net, const Dataset& data) {
  require_data(data, net, "fit_kfac");
  ForwardCache cache;
  forward(net, data.X, &cache);
  const Matrix probs = softmax_rows(cache.logits());
  const auto layout = theta_layout(net);
  const double inv_n = 1.0 / static_cast<double>(data.size());

  CurvatureKron out;
  out.data_count = data.size();
  for (const auto& s : layout) {
    KronFactor f;
    f.layer = s.layer;
    f.a_cov = matmul_tn(cache.core_inputs[s.layer], cache.core_inputs[s.layer]) * inv_n;
    f.g_cov = Matrix(s.rank, s.rank);
    out.factors.push_back(std::move(f));
  }
  // For each class c, one batched backprop of (p − e_c) yields g_c for every example.
  for (std::size_t c = 0; c < net.classes; ++c) {
    Matrix d = probs;
    for (std::size_t n = 0; n < data.size(); ++n) d(n, c) -= 1.0;
    std::vector<Matrix> core_grads;
    backprop(net, cache, d, &core_grads);
    for (auto& f : out.factors) {
      Matrix weighted = core_grads[f.layer];
      for (std::size_t n = 0; n < data.size(); ++n)
        for (std::size_t j = 0; j < weighted.cols(); ++j) weighted(n, j) *= probs(n, c);
      f.g_cov += matmul_tn(weighted, core_grads[f.layer]) * inv_n;
    }
  }
  for (auto& f : out.factors) {
    f.a_cov = symmetrize(f.a_cov);
    f.g_cov = symmetrize(f.g_cov);
  }
  return out;
}

KronEigen kron_eigen(const KronFactor& f, std::size_t data_count) {
  const SymEigResult ea = eig_sym(f.a_cov);
  const SymEigResult eg = eig_sym(f.g_cov);
  KronEigen e;
  e.a_vectors = ea.vectors;
  e.g_vectors = eg.vectors;
  const std::size_t ra = ea.values.size(), rg = eg.values.size();
  e.products.resize(ra * rg);
  for (std::size_t i = 0; i < ra; ++i)
    for (std::size_t j = 0; j < rg; ++j)
      e.products[i * rg + j] =
          std::max(static_cast<double>(data_count) * std::max(ea.values[i], 0.0) * std::max(eg.values[j], 0.0), 0.0);
  return e;
}

double log_det_posterior_precision(const Curvature& curv, double prior_precision) {
  double ld = 0.0;
  if (const auto* d = std::get_if<CurvatureDiag>(&curv)) {
    for (double h : d->h) ld += std::log(h + prior_precision);
  } else {
    const auto& k = std::get<CurvatureKron>(curv);
    for (const auto& f : k.factors) {
      for (double p : kron_eigen(f, k.data_count).products) ld += std::log(p + prior_precision);
    }
  }
  return ld;
}

double log_marginal_likelihood(const Curvature& curv, std::span<const double> theta_map, double data_nll,
                               double prior_precision) {
  if (!(prior_precision > 0.0)) throw ConfigError("prior precision must be positive");
  std::size_t n = 0;
  if (const auto* d = std::get_if<CurvatureDiag>(&curv)) {
    n = d->data_count;
    if (d->h.size() != theta_map.size()) throw ShapeError("log_marginal_likelihood: curvature/theta size mismatch");
  } else {
    const auto& k = std::get<CurvatureKron>(curv);
    n = k.data_count;
    std::size_t dim = 0;
    for (const auto& f : k.factors) dim += f.a_cov.rows() * f.g_cov.rows();
    if (dim != theta_map.size()) throw ShapeError("log_marginal_likelihood: curvature/theta size mismatch");
  }
  const double dim = static_cast<double>(theta_map.size());
  return -data_nll * static_cast<double>(n) - 0.5 * prior_precision * dot(theta_map, theta_map) +
         0.5 * dim * std::log(prior_precision) - 0.5 * log_det_posterior_precision(curv, prior_precision);
}

double tune_prior_precision(const Curvature& curv, std::span<const double> theta_map, double data_nll,
                            std::span<const double> grid) {
  if (grid.empty()) throw ConfigError("tune_prior_precision: empty grid");
  double best = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (double lambda : grid) {
    if (!(lambda > 0.0)) throw ConfigError("tune_prior_precision: grid entries must be positive");
    const double score = log_marginal_likelihood(curv, theta_map, data_nll, lambda);
    if (score > best_score || (score == best_score && lambda < best)) {
      best_score = score;
      best = lambda;
    }
  }
  return best;
}

std::vector<double> default_prior_grid() {
  std::vector<double> grid(15);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = std::pow(10.0, -3.0 + 6.0 * static_cast<double>(i) / 14.0);
  return grid;
}

LaplacePosterior::LaplacePosterior(ThetaVector theta_map, Curvature curvature, double prior_precision)
    : theta_map_(std::move(theta_map)), curvature_(std::move(curvature)), prior_precision_(prior_precision) {
  if (!(prior_precision_ > 0.0)) throw ConfigError("LaplacePosterior: prior precision must be positive");
  if (const auto* d = std::get_if<CurvatureDiag>(&curvature_)) {
    if (d->h.size() != theta_map_.size()) throw ShapeError("LaplacePosterior: h length != |θ|");
    return;
  }
  const auto& k = std::get<CurvatureKron>(curvature_);
  if (k.factors.size() != theta_map_.slices.size()) {
    throw ShapeError("LaplacePosterior: one Kronecker factor per adapted layer required");
  }
  for (std::size_t i = 0; i < k.factors.size(); ++i) {
    const auto& f = k.factors[i];
    const auto& s = theta_map_.slices[i];
    if (f.layer != s.layer || f.a_cov.rows() != s.rank || f.g_cov.rows() != s.rank) {
      throw ShapeError("LaplacePosterior: Kronecker factor " + std::to_string(i) + " does not match θ layout");
    }
    eigen_.push_back(subbayes::kron_eigen(f, k.data_count));
  }
}

LaplaceStructure LaplacePosterior::structure() const noexcept {
  return std::holds_alternative<CurvatureDiag>(curvature_) ? LaplaceStructure::Diag : LaplaceStructure::Kron;
}

Matrix LaplacePosterior::covariance() const {
  Matrix cov(dim(), dim());
  if (const auto* d = std::get_if<CurvatureDiag>(&curvature_)) {
    for (std::size_t i = 0; i < dim(); ++i) cov(i, i) = 1.0 / (d->h[i] + prior_precision_);
    return cov;
  }
  for (std::size_t l = 0; l < eigen_.size(); ++l) {
    const auto& e = eigen_[l];
    const auto& s = theta_map_.slices[l];
    const Matrix q = kron(e.a_vectors, e.g_vectors);
    Vector inv(e.products.size());
    for (std::size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 / (e.products[i] + prior_precision_);
    const Matrix block = matmul_nt(scale_cols(q, inv), q);
    for (std::size_t i = 0; i < block.rows(); ++i)
      for (std::size_t j = 0; j < block.cols(); ++j) cov(s.offset + i, s.offset + j) = block(i, j);
  }
  return cov;
}

Vector laplace_sample(const LaplacePosterior& p, SeededRng& rng) {
  Vector theta = p.theta_map().values;
  const double lambda = p.prior_precision();
  if (const auto* d = std::get_if<CurvatureDiag>(&p.curvature())) {
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += rng.normal() / std::sqrt(d->h[i] + lambda);
    return theta;
  }
  for (std::size_t l = 0; l < p.kron_eigen().size(); ++l) {
    const auto& e = p.kron_eigen()[l];
    const auto& s = p.theta_map().slices[l];
    Matrix z(s.rank, s.rank);
    for (std::size_t i = 0; i < z.size(); ++i) z.data()[i] = rng.normal() / std::sqrt(e.products[i] + lambda);
    const Matrix delta = matmul_nt(matmul(e.a_vectors, z), e.g_vectors);
    for (std::size_t i = 0; i < delta.size(); ++i) theta[s.offset + i] += delta.data()[i];
  }
  return theta;
}

LogitGaussian linearized_logit_cov(const Network& net, const LaplacePosterior& p, std::span<const double> x) {
  const Network at_map = with_theta(net, p.theta_map().values);
  LogitGaussian out;
  const Matrix logits = forward(at_map, Matrix::row(x));
  out.mean = logits.values();
  const Matrix jac = logit_jacobian(at_map, x);
  const std::size_t classes = jac.rows();
  out.covariance = Matrix(classes, classes);
  const double lambda = p.prior_precision();

  if (const auto* d = std::get_if<CurvatureDiag>(&p.curvature())) {
    for (std::size_t a = 0; a < classes; ++a)
      for (std::size_t b = 0; b < classes; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < jac.cols(); ++i) s += jac(a, i) * jac(b, i) / (d->h[i] + lambda);
        out.covariance(a, b) = s;
      }
  } else {
    for (std::size_t l = 0; l < p.kron_eigen().size(); ++l) {
      const auto& e = p.kron_eigen()[l];
      const auto& s = p.theta_map().slices[l];
      std::vector<Matrix> rotated;
      for (std::size_t c = 0; c < classes; ++c) {
        rotated.push_back(to_eigenbasis(e, jac.row_span(c).subspan(s.offset, s.length())));
      }
      for (std::size_t a = 0; a < classes; ++a)
        for (std::size_t b = 0; b < classes; ++b) {
          double acc = 0.0;
          for (std::size_t i = 0; i < s.length(); ++i)
            acc += rotated[a].data()[i] * rotated[b].data()[i] / (e.products[i] + lambda);
          out.covariance(a, b) += acc;
        }
    }
  }
  out.covariance = symmetrize(out.covariance);
  return out;
}

void save_laplace(const std::filesystem::path& dir, const LaplacePosterior& p, std::span<const double> grid) {
  std::filesystem::create_directories(dir);
  write_sbmx(dir / "theta_map.sbmx", Matrix::column(p.theta_map().values));
  json j;
  j["structure"] = std::string(to_string(p.structure()));
  j["lambda"] = p.prior_precision();
  j["grid"] = std::vector<double>(grid.begin(), grid.end());
  json layout = json::array();
  for (const auto& s : p.theta_map().slices) layout.push_back({{"layer", s.layer}, {"offset", s.offset}, {"rank", s.rank}});
  j["layout"] = layout;
  if (const auto* d = std::get_if<CurvatureDiag>(&p.curvature())) {
    j["data_count"] = d->data_count;
    write_sbmx(dir / "h.sbmx", Matrix::column(d->h));
  } else {
    const auto& k = std::get<CurvatureKron>(p.curvature());
    j["data_count"] = k.data_count;
    for (const auto& f : k.factors) {
      write_sbmx(dir / ("Acov_" + std::to_string(f.layer) + ".sbmx"), f.a_cov);
      write_sbmx(dir / ("Gcov_" + std::to_string(f.layer) + ".sbmx"), f.g_cov);
    }
  }
  std::ofstream f(dir / "meta.json", std::ios::trunc);
  if (!f) throw FormatError("save_laplace: cannot write meta.json in " + dir.string());
  f << j.dump(2) << '\n';
}

LaplacePosterior load_laplace(const std::filesystem::path& dir) {
  std::ifstream f(dir / "meta.json");
  if (!f) throw FormatError("load_laplace: missing meta.json in " + dir.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError("load_laplace: malformed meta.json: " + std::string(e.what()));
  }
  try {
    ThetaVector theta;
    const Matrix tm = read_sbmx(dir / "theta_map.sbmx");
    if (tm.cols() != 1) throw FormatError("load_laplace: theta_map must be a column");
    theta.values = tm.values();
    for (const auto& s : j.at("layout")) {
      theta.slices.push_back({s.at("layer").get<std::size_t>(), s.at("offset").get<std::size_t>(),
                              s.at("rank").get<std::size_t>()});
    }
    const auto data_count = j.at("data_count").get<std::size_t>();
    const double lambda = j.at("lambda").get<double>();
    if (parse_laplace_structure(j.at("structure").get<std::string>()) == LaplaceStructure::Diag) {
      const Matrix h = read_sbmx(dir / "h.sbmx");
      return LaplacePosterior(std::move(theta), CurvatureDiag{h.values(), data_count}, lambda);
    }
    CurvatureKron k;
    k.data_count = data_count;
    for (const auto& s : theta.slices) {
      k.factors.push_back({s.layer, read_sbmx(dir / ("Acov_" + std::to_string(s.layer) + ".sbmx")),
                           read_sbmx(dir / ("Gcov_" + std::to_string(s.layer) + ".sbmx"))});
    }
    return LaplacePosterior(std::move(theta), std::move(k), lambda);
  } catch (const json::exception& e) {
    throw FormatError("load_laplace: malformed meta.json: " + std::string(e.what()));
  } catch (const ShapeError& e) {
    throw FormatError("load_laplace: " + std::string(e.what()));
  }
}

}  // namespace subbayes
