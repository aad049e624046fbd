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

#ifndef SUBBAYES_NETWORK_HPP_
#define SUBBAYES_NETWORK_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "subbayes/matrix.hpp"
#include "subbayes/projections.hpp"
#include "subbayes/rng.hpp"

namespace subbayes {

enum class ActivationKind { Tanh, Relu };

std::string_view to_string(ActivationKind kind);
ActivationKind parse_activation(std::string_view name);

// y = x·W + b, row-vector convention. W is in×out.
struct PlainLinear {
  Matrix W;
  Matrix b;  // 1×out
  bool trainable = true;
};

// y = x·W0 + scale·((x·A)·R)·B + bias with W0 and bias frozen.
struct AdaptedLinear {
  Matrix W0;    // n×m
  Matrix bias;  // 1×m
  ProjectionPair pair;
  Matrix R;  // r×r
  double scale = 1.0;
  bool trainable_ab = false;

  std::size_t in_dim() const noexcept { return W0.rows(); }
  std::size_t out_dim() const noexcept { return W0.cols(); }
  std::size_t rank() const noexcept { return R.rows(); }
  Matrix delta() const;             // scale·A·R·B
  Matrix effective_weight() const;  // W0 + delta()
};

struct Activation {
  ActivationKind kind = ActivationKind::Tanh;
};

using Layer = std::variant<AdaptedLinear, PlainLinear, Activation>;

struct Network {
  std::vector<Layer> layers;
  std::size_t classes = 0;

  std::size_t input_dim() const;
  // Throws ShapeError unless consecutive layers compose and the final width is `classes`.
  void validate() const;
  std::vector<std::size_t> adapted_layer_indices() const;
};

// Per-layer activations recorded by forward() for backward() and curvature.
struct ForwardCache {
  std::vector<Matrix> outputs;       // outputs[0] = input, outputs[l + 1] = output of layer l
  std::vector<Matrix> core_inputs;   // adapted layer l: x·A (N×r); empty otherwise
  std::vector<Matrix> core_outputs;  // adapted layer l: (x·A)·R (N×r); empty otherwise
  const Matrix& logits() const { return outputs.back(); }
};

Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache = nullptr);
// Same network with every adapted layer replaced by a plain layer holding
// its materialized effective weight.
Network materialize(const Network& net);

Matrix softmax_rows(const Matrix& logits);
// Mean cross-entropy with log-sum-exp stabilization.
double loss_nll(const Matrix& logits, std::span<const int> labels);

// Handle to a trainable tensor, in the order backward() reports gradients:
// per layer, adapted R then (if trainable_ab) A, B; plain W, b when trainable.
struct ParamRef {
  std::string name;
  std::size_t layer = 0;
  Matrix* value = nullptr;
};
std::vector<ParamRef> trainable_params(Network& net);
std::size_t trainable_param_count(const Network& net);

// Gradients w.r.t. trainable_params(net) for an arbitrary upstream
// gradient on the logits. If core_output_grads is given it receives, per
// layer, ∂/∂((x·A)·R) (N×r) for adapted layers and an empty matrix
// otherwise.
std::vector<Matrix> backprop(const Network& net, const ForwardCache& cache, const Matrix& dlogits,
                             std::vector<Matrix>* core_output_grads = nullptr);

// Gradients of the mean NLL.
std::vector<Matrix> backward(const Network& net, const ForwardCache& cache, std::span<const int> labels);

// Flattened core parameters θ = ∪ℓ vec(Rℓ), row-major within each core.
struct ThetaSlice {
  std::size_t layer = 0;
  std::size_t offset = 0;
  std::size_t rank = 0;
  std::size_t length() const noexcept { return rank * rank; }
};

struct ThetaVector {
  Vector values;
  std::vector<ThetaSlice> slices;
  std::size_t size() const noexcept { return values.size(); }
};

std::vector<ThetaSlice> theta_layout(const Network& net);
ThetaVector flatten(const Network& net);
// Writes θ into the cores of net. Throws ShapeError on length mismatch.
void unflatten(Network& net, std::span<const double> theta);
Network with_theta(const Network& net, std::span<const double> theta);

// Logit Jacobian w.r.t. θ at a single input row (C × |θ|).
Matrix logit_jacobian(const Network& net, std::span<const double> x);

// Dense MLP in → hidden... → classes with Glorot-normal weights and zero biases.
Network make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t classes,
                 ActivationKind activation, SeededRng& rng);

// Plain linear layers other than the head become adapted layers with
// R = 0 and scale = alpha / r. pairs[i] is used for the i-th such layer.
Network adapt_network(const Network& base, std::span<const ProjectionPair> pairs, double alpha,
                      bool trainable_ab);

// Indices of the plain layers adapt_network would convert.
std::vector<std::size_t> adaptable_layer_indices(const Network& base);

}  // namespace subbayes

#endif  // SUBBAYES_NETWORK_HPP_
