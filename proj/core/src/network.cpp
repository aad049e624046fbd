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

#include "subbayes/network.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "subbayes/error.hpp"

namespace subbayes {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void add_bias(Matrix& y, const Matrix& bias) {
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t c = 0; c < y.cols(); ++c) y(r, c) += bias(0, c);
}

Matrix column_sums(const Matrix& g) {
  Matrix s(1, g.cols());
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) s(0, c) += g(r, c);
  return s;
}

std::size_t layer_in(const Layer& l) {
  return std::visit(Overloaded{[](const AdaptedLinear& a) { return a.in_dim(); },
                               [](const PlainLinear& p) { return p.W.rows(); },
                               [](const Activation&) { return std::size_t{0}; }},
                    l);
}

std::size_t layer_out(const Layer& l) {
  return std::visit(Overloaded{[](const AdaptedLinear& a) { return a.out_dim(); },
                               [](const PlainLinear& p) { return p.W.cols(); },
                               [](const Activation&) { return std::size_t{0}; }},
                    l);
}

}  // namespace

std::string_view to_string(ActivationKind kind) {
  return kind == ActivationKind::Tanh ? "tanh" : "relu";
}

ActivationKind parse_activation(std::string_view name) {
  if (name == "tanh") return ActivationKind::Tanh;
  if (name == "relu") return ActivationKind::Relu;
  throw ConfigError("unknown activation: " + std::string(name));
}

Matrix AdaptedLinear::delta() const {
  return matmul(matmul(pair.A, R), pair.B) * scale;
}

Matrix AdaptedLinear::effective_weight() const { return W0 + delta(); }

std::size_t Network::input_dim() const {
  for (const auto& l : layers) {
    const std::size_t in = layer_in(l);
    if (in != 0) return in;
  }
  throw ShapeError("network has no linear layers");
}

void Network::validate() const {
  std::size_t width = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (const auto* a = std::get_if<AdaptedLinear>(&l)) {
      const std::size_t r = a->rank();
      if (a->pair.A.rows() != a->in_dim() || a->pair.A.cols() != r || a->pair.B.rows() != r ||
          a->pair.B.cols() != a->out_dim() || a->R.cols() != r || a->bias.rows() != 1 ||
          a->bias.cols() != a->out_dim()) {
        throw ShapeError("adapted layer " + std::to_string(i) + " has inconsistent factor shapes");
      }
    } else if (const auto* p = std::get_if<PlainLinear>(&l)) {
      if (p->b.rows() != 1 || p->b.cols() != p->W.cols()) {
        throw ShapeError("plain layer " + std::to_string(i) + " bias shape mismatch");
      }
    }
    const std::size_t in = layer_in(l);
    if (in == 0) continue;
    if (width != 0 && in != width) {
      throw ShapeError("layer " + std::to_string(i) + " expects width " + std::to_string(in) +
                       " but receives " + std::to_string(width));
    }
    width = layer_out(l);
  }
  if (width != classes) {
    throw ShapeError("network output width " + std::to_string(width) + " != classes " +
                     std::to_string(classes));
  }
}

std::vector<std::size_t> Network::adapted_layer_indices() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (std::holds_alternative<AdaptedLinear>(layers[i])) idx.push_back(i);
  return idx;
}

Matrix forward(const Network& net, const Matrix& x, ForwardCache* cache) {
  if (x.cols() != net.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(x.cols()) + " features, network expects " +
                     std::to_string(net.input_dim()));
  }
  if (cache != nullptr) {
    cache->outputs.assign(1, x);
    cache->core_inputs.assign(net.layers.size(), Matrix());
    cache->core_outputs.assign(net.layers.size(), Matrix());
  }
  Matrix h = x;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (const auto* a = std::get_if<AdaptedLinear>(&l)) {
      Matrix core_in = matmul(h, a->pair.A);
      Matrix core_out = matmul(core_in, a->R);
      Matrix y = matmul(h, a->W0);
      y += matmul(core_out, a->pair.B) * a->scale;
      add_bias(y, a->bias);
      if (cache != nullptr) {
        cache->core_inputs[i] = std::move(core_in);
        cache->core_outputs[i] = std::move(core_out);
      }
      h = std::move(y);
    } else if (const auto* p = std::get_if<PlainLinear>(&l)) {
      Matrix y = matmul(h, p->W);
      add_bias(y, p->b);
      h = std::move(y);
    } else {
      const auto kind = std::get<Activation>(l).kind;
      for (double& v : h.data()) v = kind == ActivationKind::Tanh ? std::tanh(v) : std::max(v, 0.0);
    }
    if (cache != nullptr) cache->outputs.push_back(h);
  }
  if (!h.all_finite()) throw NumericalError("forward: non-finite logits");
  return h;
}

Network materialize(const Network& net) {
  Network out;
  out.classes = net.classes;
  for (const auto& l : net.layers) {
    if (const auto* a = std::get_if<AdaptedLinear>(&l)) {
      out.layers.emplace_back(PlainLinear{a->effective_weight(), a->bias, false});
    } else {
      out.layers.push_back(l);
    }
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row_span(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      p(r, c) = std::exp(row[c] - mx);
      z += p(r, c);
    }
    for (std::size_t c = 0; c < row.size(); ++c) p(r, c) /= z;
  }
  return p;
}

double loss_nll(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) throw ShapeError("loss_nll: label count mismatch");
  if (labels.empty()) throw ShapeError("loss_nll: empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row_span(r);
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= row.size()) throw ShapeError("loss_nll: label out of range");
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    total += mx + std::log(z) - row[static_cast<std::size_t>(y)];
  }
  return std::max(total / static_cast<double>(logits.rows()), 0.0);
}

std::vector<ParamRef> trainable_params(Network& net) {
  std::vector<ParamRef> refs;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const std::string prefix = "layer" + std::to_string(i) + ".";
    if (auto* a = std::get_if<AdaptedLinear>(&net.layers[i])) {
      refs.push_back({prefix + "R", i, &a->R});
      if (a->trainable_ab) {
        refs.push_back({prefix + "A", i, &a->pair.A});
        refs.push_back({prefix + "B", i, &a->pair.B});
      }
    } else if (auto* p = std::get_if<PlainLinear>(&net.layers[i]); p != nullptr && p->trainable) {
      refs.push_back({prefix + "W", i, &p->W});
      refs.push_back({prefix + "b", i, &p->b});
    }
  }
  return refs;
}

std::size_t trainable_param_count(const Network& net) {
  Network copy = net;
  std::size_t n = 0;
  for (const auto& p : trainable_params(copy)) n += p.value->size();
  return n;
}

std::vector<Matrix> backprop(const Network& net, const ForwardCache& cache, const Matrix& dlogits,
                             std::vector<Matrix>* core_output_grads) {
  if (cache.outputs.size() != net.layers.size() + 1) throw ShapeError("backprop: cache does not match network");
  if (!dlogits.same_shape(cache.logits())) throw ShapeError("backprop: upstream gradient shape mismatch");
  if (core_output_grads != nullptr) core_output_grads->assign(net.layers.size(), Matrix());

  // Gradients are produced last layer first; collect per layer then reorder.
  std::vector<std::vector<Matrix>> per_layer(net.layers.size());
  Matrix g = dlogits;
  for (std::size_t i = net.layers.size(); i-- > 0;) {
    const auto& l = net.layers[i];
    const Matrix& x = cache.outputs[i];
    if (const auto* a = std::get_if<AdaptedLinear>(&l)) {
      const Matrix& core_in = cache.core_inputs[i];
      const Matrix& core_out = cache.core_outputs[i];
      Matrix d_core_out = matmul_nt(g, a->pair.B) * a->scale;  // N×r
      per_layer[i].push_back(matmul_tn(core_in, d_core_out));  // dR
      Matrix d_core_in = matmul_nt(d_core_out, a->R);          // N×r
      if (a->trainable_ab) {
        per_layer[i].push_back(matmul_tn(x, d_core_in));           // dA
        per_layer[i].push_back(matmul_tn(core_out, g) * a->scale);  // dB
      }
      if (i > 0) {
        Matrix dx = matmul_nt(g, a->W0);
        dx += matmul_nt(d_core_in, a->pair.A);
        g = std::move(dx);
      }
      if (core_output_grads != nullptr) (*core_output_grads)[i] = std::move(d_core_out);
    } else if (const auto* p = std::get_if<PlainLinear>(&l)) {
      if (p->trainable) {
        per_layer[i].push_back(matmul_tn(x, g));
        per_layer[i].push_back(column_sums(g));
      }
      if (i > 0) g = matmul_nt(g, p->W);
    } else {
      const auto kind = std::get<Activation>(l).kind;
      const Matrix& y = cache.outputs[i + 1];
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (kind == ActivationKind::Tanh) {
          g.data()[k] *= 1.0 - y.data()[k] * y.data()[k];
        } else if (x.data()[k] <= 0.0) {
          g.data()[k] = 0.0;
        }
      }
    }
  }
  std::vector<Matrix> grads;
  for (auto& layer_grads : per_layer)
    for (auto& m : layer_grads) grads.push_back(std::move(m));
  return grads;
}

std::vector<Matrix> backward(const Network& net, const ForwardCache& cache, std::span<const int> labels) {
  const Matrix& logits = cache.logits();
  if (labels.size() != logits.rows()) throw ShapeError("backward: label count mismatch");
  Matrix d = softmax_rows(logits);
  const double inv_n = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < d.rows(); ++r) {
    d(r, static_cast<std::size_t>(labels[r])) -= 1.0;
    for (std::size_t c = 0; c < d.cols(); ++c) d(r, c) *= inv_n;
  }
  return backprop(net, cache, d);
}

std::vector<ThetaSlice> theta_layout(const Network& net) {
  std::vector<ThetaSlice> slices;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (const auto* a = std::get_if<AdaptedLinear>(&net.layers[i])) {
      slices.push_back({i, offset, a->rank()});
      offset += a->rank() * a->rank();
    }
  }
  return slices;
}

ThetaVector flatten(const Network& net) {
  ThetaVector t;
  t.slices = theta_layout(net);
  for (const auto& s : t.slices) {
    const auto& r = std::get<AdaptedLinear>(net.layers[s.layer]).R;
    t.values.insert(t.values.end(), r.data().begin(), r.data().end());
  }
  return t;
}

void unflatten(Network& net, std::span<const double> theta) {
  const auto slices = theta_layout(net);
  const std::size_t total = slices.empty() ? 0 : slices.back().offset + slices.back().length();
  if (theta.size() != total) {
    throw ShapeError("unflatten: theta has " + std::to_string(theta.size()) + " entries, network needs " +
                     std::to_string(total));
  }
  for (const auto& s : slices) {
    auto& r = std::get<AdaptedLinear>(net.layers[s.layer]).R;
    std::copy_n(theta.begin() + static_cast<std::ptrdiff_t>(s.offset), s.length(), r.data().begin());
  }
}

Network with_theta(const Network& net, std::span<const double> theta) {
  Network copy = net;
  unflatten(copy, theta);
  return copy;
}

Matrix logit_jacobian(const Network& net, std::span<const double> x) {
  ForwardCache cache;
  forward(net, Matrix::row(x), &cache);
  const auto slices = theta_layout(net);
  const std::size_t dim = slices.empty() ? 0 : slices.back().offset + slices.back().length();
  Matrix jac(net.classes, dim);
  for (std::size_t c = 0; c < net.classes; ++c) {
    Matrix seed(1, net.classes);
    seed(0, c) = 1.0;
    std::vector<Matrix> core_grads;
    backprop(net, cache, seed, &core_grads);
    for (const auto& s : slices) {
      // dlogit_c/dR = (x·A)ᵀ·(∂logit_c/∂core_out)
      const Matrix d_r = matmul_tn(cache.core_inputs[s.layer], core_grads[s.layer]);
      std::copy_n(d_r.data().begin(), s.length(), jac.row_span(c).begin() + static_cast<std::ptrdiff_t>(s.offset));
    }
  }
  return jac;
}

Network make_mlp(std::size_t input_dim, std::span<const std::size_t> hidden, std::size_t classes,
                 ActivationKind activation, SeededRng& rng) {
  if (input_dim == 0 || classes == 0) throw ConfigError("make_mlp: dimensions must be positive");
  Network net;
  net.classes = classes;
  std::size_t width = input_dim;
  auto add_linear = [&](std::size_t out) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(width + out));
    Matrix w = standard_normal(rng, width, out) * std_dev;
    net.layers.emplace_back(PlainLinear{std::move(w), Matrix(1, out), true});
    width = out;
  };
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("make_mlp: hidden width must be positive");
    add_linear(h);
    net.layers.emplace_back(Activation{activation});
  }
  add_linear(classes);
  return net;
}

std::vector<std::size_t> adaptable_layer_indices(const Network& base) {
  std::vector<std::size_t> idx;
  std::size_t last_linear = base.layers.size();
  for (std::size_t i = 0; i < base.layers.size(); ++i)
    if (std::holds_alternative<PlainLinear>(base.layers[i])) last_linear = i;
  for (std::size_t i = 0; i < base.layers.size(); ++i)
    if (std::holds_alternative<PlainLinear>(base.layers[i]) && i != last_linear) idx.push_back(i);
  return idx;
}

Network adapt_network(const Network& base, std::span<const ProjectionPair> pairs, double alpha,
                      bool trainable_ab) {
  const auto idx = adaptable_layer_indices(base);
  if (idx.size() != pairs.size()) {
    throw ShapeError("adapt_network: " + std::to_string(pairs.size()) + " projection pairs for " +
                     std::to_string(idx.size()) + " adaptable layers");
  }
  Network net = base;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto& plain = std::get<PlainLinear>(base.layers[idx[k]]);
    const ProjectionPair& pair = pairs[k];
    if (pair.A.rows() != plain.W.rows() || pair.B.cols() != plain.W.cols()) {
      throw ShapeError("adapt_network: projection pair " + std::to_string(k) + " does not match layer shape");
    }
    const std::size_t r = pair.A.cols();
    AdaptedLinear a{plain.W, plain.b, pair, Matrix(r, r), alpha / static_cast<double>(r), trainable_ab};
    net.layers[idx[k]] = std::move(a);
  }
  // The head stays trainable; everything else in the base is frozen.
  for (auto& l : net.layers) {
    if (auto* p = std::get_if<PlainLinear>(&l)) p->trainable = true;
  }
  net.validate();
  return net;
}

}  // namespace subbayes
