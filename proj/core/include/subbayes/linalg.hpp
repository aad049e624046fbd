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

#ifndef SUBBAYES_LINALG_HPP_
#define SUBBAYES_LINALG_HPP_

#include <utility>

#include "subbayes/matrix.hpp"

namespace subbayes {

// Thin SVD M = U·diag(S)·Vᵀ with k = min(rows, cols).
struct SvdResult {
  Matrix U;  // rows × k, orthonormal columns
  Vector S;  // non-increasing, non-negative
  Matrix V;  // cols × k, orthonormal columns
};

struct QrResult {
  Matrix Q;  // rows × cols, orthonormal columns
  Matrix R;  // cols × cols, upper triangular
};

struct SymEigResult {
  Vector values;   // non-increasing
  Matrix vectors;  // columns are eigenvectors
};

struct PsdRoots {
  Matrix sqrt;
  Matrix inv_sqrt;
};

inline constexpr int kMaxJacobiSweeps = 100;

// One-sided Jacobi. Every column of U has its largest-magnitude entry
// positive; V is flipped to match. Throws NumericalError on non-convergence.
SvdResult svd(const Matrix& m);

// Householder thin QR for rows >= cols. Reflections that would act on an
// already-reduced column are skipped, so Q·R keeps the signs of such
// columns (identity in, identity out). Throws NumericalError when any
// |R(i,i)| < 1e-12.
QrResult qr_thin(const Matrix& m);

// Cyclic Jacobi on (M + Mᵀ)/2; eigenvalues descending, eigenvectors under
// the same sign convention as svd().
SymEigResult eig_sym(const Matrix& m);

// P = Q·diag(√(λ+ridge))·Qᵀ and P⁻¹ = Q·diag(1/√(λ+ridge))·Qᵀ.
PsdRoots psd_sqrt_and_invsqrt(const Matrix& m, double ridge);

// Flips each column of `primary` so its largest-magnitude entry is
// positive, applying the same flip to the matching column of `secondary`
// (if given).
void apply_sign_convention(Matrix& primary, Matrix* secondary = nullptr);

}  // namespace subbayes

#endif  // SUBBAYES_LINALG_HPP_
