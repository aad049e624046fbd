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

#include "subbayes/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "subbayes/error.hpp"

namespace subbayes {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kRotateThreshold = 1e-15;
constexpr double kConvergedOffDiagonal = 1e-12;

void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) throw NumericalError(std::string(op) + ": input has non-finite entries");
}

std::vector<std::size_t> descending_order(const Vector& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return order;
}

// Replaces columns flagged in `deficient` with unit vectors orthogonal to
// every other column of u, drawn from the standard basis in index order.
void complete_orthonormal(Matrix& u, const std::vector<bool>& deficient) {
  const std::size_t n = u.rows();
  std::vector<bool> accepted(u.cols());
  for (std::size_t j = 0; j < u.cols(); ++j) accepted[j] = !deficient[j];

  for (std::size_t j = 0; j < u.cols(); ++j) {
    if (!deficient[j]) continue;
    Vector best;
    double best_norm = -1.0;
    for (std::size_t e = 0; e < n; ++e) {
      Vector cand(n, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t c = 0; c < u.cols(); ++c) {
          if (!accepted[c]) continue;
          double proj = 0.0;
          for (std::size_t i = 0; i < n; ++i) proj += u(i, c) * cand[i];
          for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * u(i, c);
        }
      }
      const double nrm = norm2(cand);
      if (nrm > best_norm + 1e-12) {
        best_norm = nrm;
        best = std::move(cand);
      }
    }
    if (best_norm <= 1e-8) throw NumericalError("svd: failed to complete orthonormal basis");
    for (std::size_t i = 0; i < n; ++i) u(i, j) = best[i] / best_norm;
    accepted[j] = true;
  }
}

// One-sided Jacobi on a tall matrix (rows >= cols); no sign convention.
SvdResult svd_tall(const Matrix& m) {
  const std::size_t n = m.rows();
  const std::size_t k = m.cols();
  Matrix w = m;
  Matrix v = Matrix::identity(k);

  bool converged = false;
  for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < k; ++p) {
      for (std::size_t q = p + 1; q < k; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          alpha += wp * wp;
          beta += wq * wq;
          gamma += wp * wq;
        }
        if (alpha == 0.0 || beta == 0.0) continue;
        const double ratio = std::abs(gamma) / std::sqrt(alpha * beta);
        off = std::max(off, ratio);
        if (ratio <= kRotateThreshold) continue;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < n; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < k; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
    converged = off < kConvergedOffDiagonal;
  }
  if (!converged) {
    throw NumericalError("svd: no convergence after " + std::to_string(kMaxJacobiSweeps) +
                         " sweeps");
  }

  Vector sigma(k);
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(s);
  }
  const auto order = descending_order(sigma);
  const double smax = k == 0 ? 0.0 : sigma[order[0]];
  const double tol = static_cast<double>(std::max(n, k)) * kEps * smax;

  SvdResult out{Matrix(n, k), Vector(k), Matrix(k, k)};
  std::vector<bool> deficient(k, false);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t src = order[j];
    out.S[j] = sigma[src];
    deficient[j] = !(sigma[src] > tol) || sigma[src] == 0.0;
    for (std::size_t i = 0; i < n; ++i) out.U(i, j) = deficient[j] ? 0.0 : w(i, src) / sigma[src];
    for (std::size_t i = 0; i < k; ++i) out.V(i, j) = v(i, src);
  }
  if (std::any_of(deficient.begin(), deficient.end(), [](bool b) { return b; })) {
    complete_orthonormal(out.U, deficient);
  }
  return out;
}

}  // namespace

void apply_sign_convention(Matrix& primary, Matrix* secondary) {
  for (std::size_t j = 0; j < primary.cols(); ++j) {
    double maxabs = 0.0;
    for (std::size_t i = 0; i < primary.rows(); ++i) maxabs = std::max(maxabs, std::abs(primary(i, j)));
    if (maxabs == 0.0) continue;
    // First index within a relative hair of the maximum, so exact ties in
    // exact arithmetic resolve to the lowest index.
    std::size_t pivot = 0;
    for (std::size_t i = 0; i < primary.rows(); ++i) {
      if (std::abs(primary(i, j)) >= maxabs * (1.0 - 1e-10)) {
        pivot = i;
        break;
      }
    }
    if (primary(pivot, j) < 0.0) {
      for (std::size_t i = 0; i < primary.rows(); ++i) primary(i, j) = -primary(i, j);
      if (secondary != nullptr) {
        for (std::size_t i = 0; i < secondary->rows(); ++i) (*secondary)(i, j) = -(*secondary)(i, j);
      }
    }
  }
}

SvdResult svd(const Matrix& m) {
  if (m.empty()) throw ShapeError("svd: empty matrix");
  require_finite(m, "svd");
  SvdResult r;
  if (m.rows() >= m.cols()) {
    r = svd_tall(m);
  } else {
    SvdResult t = svd_tall(m.transpose());
    r = SvdResult{std::move(t.V), std::move(t.S), std::move(t.U)};
  }
  apply_sign_convention(r.U, &r.V);
  return r;
}

QrResult qr_thin(const Matrix& m) {
  const std::size_t n = m.rows();
  const std::size_t k = m.cols();
  if (n < k) throw ShapeError("qr_thin: requires rows >= cols");
  if (m.empty()) throw ShapeError("qr_thin: empty matrix");
  require_finite(m, "qr_thin");

  Matrix a = m;
  std::vector<Vector> reflectors(k);
  for (std::size_t j = 0; j < k; ++j) {
    double tail = 0.0;
    for (std::size_t i = j + 1; i < n; ++i) tail += a(i, j) * a(i, j);
    if (tail == 0.0) continue;  // column already reduced: H = I
    const double x0 = a(j, j);
    const double nrm = std::sqrt(x0 * x0 + tail);
    const double alpha = x0 >= 0.0 ? -nrm : nrm;
    Vector v(n - j);
    v[0] = x0 - alpha;
    for (std::size_t i = j + 1; i < n; ++i) v[i - j] = a(i, j);
    const double vnorm = norm2(v);
    for (double& x : v) x /= vnorm;
    for (std::size_t c = j; c < k; ++c) {
      double proj = 0.0;
      for (std::size_t i = j; i < n; ++i) proj += v[i - j] * a(i, c);
      for (std::size_t i = j; i < n; ++i) a(i, c) -= 2.0 * proj * v[i - j];
    }
    reflectors[j] = std::move(v);
  }

  QrResult out{Matrix(n, k), Matrix(k, k)};
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) out.R(i, j) = a(i, j);
    if (std::abs(out.R(i, i)) < 1e-12) {
      throw NumericalError("qr_thin: rank-deficient input (|R(" + std::to_string(i) + "," +
                           std::to_string(i) + ")| < 1e-12)");
    }
  }
  for (std::size_t i = 0; i < k; ++i) out.Q(i, i) = 1.0;
  for (std::size_t jj = k; jj-- > 0;) {
    const Vector& v = reflectors[jj];
    if (v.empty()) continue;
    for (std::size_t c = 0; c < k; ++c) {
      double proj = 0.0;
      for (std::size_t i = jj; i < n; ++i) proj += v[i - jj] * out.Q(i, c);
      for (std::size_t i = jj; i < n; ++i) out.Q(i, c) -= 2.0 * proj * v[i - jj];
    }
  }
  return out;
}

SymEigResult eig_sym(const Matrix& m) {
  if (m.rows() != m.cols()) throw ShapeError("eig_sym: matrix not square");
  if (m.empty()) throw ShapeError("eig_sym: empty matrix");
  require_finite(m, "eig_sym");
  const std::size_t n = m.rows();
  Matrix a = symmetrize(m);
  Matrix v = Matrix::identity(n);
  const double scale = std::max(frobenius_norm(a), std::numeric_limits<double>::min());

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  bool converged = off_norm() < kConvergedOffDiagonal * scale;
  for (int sweep = 0; sweep < kMaxJacobiSweeps && !converged; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= kEps * kEps * scale) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    converged = off_norm() < kConvergedOffDiagonal * scale;
  }
  if (!converged) {
    throw NumericalError("eig_sym: no convergence after " + std::to_string(kMaxJacobiSweeps) +
                         " sweeps");
  }

  Vector diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  const auto order = descending_order(diag);
  SymEigResult out{Vector(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = diag[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  apply_sign_convention(out.vectors);
  return out;
}

PsdRoots psd_sqrt_and_invsqrt(const Matrix& m, double ridge) {
  if (!(ridge >= 0.0)) throw NumericalError("psd_sqrt_and_invsqrt: ridge must be >= 0");
  const SymEigResult eig = eig_sym(m);
  const std::size_t n = eig.values.size();
  Vector root(n), inv_root(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double shifted = eig.values[i] + ridge;
    if (!(shifted > 0.0)) {
      throw NumericalError("psd_sqrt_and_invsqrt: eigenvalue + ridge <= 0 (" +
                           std::to_string(shifted) + ")");
    }
    root[i] = std::sqrt(shifted);
    inv_root[i] = 1.0 / root[i];
  }
  const Matrix& q = eig.vectors;
  return PsdRoots{matmul_nt(scale_cols(q, root), q), matmul_nt(scale_cols(q, inv_root), q)};
}

}  // namespace subbayes
