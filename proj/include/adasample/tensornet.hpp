// Copyright 2026 The AdaSample Lab Authors.
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

#pragma once

// Dense feed-forward descriptor network: bias-free affine layers with a
// Lipschitz nonlinearity between them, linear last layer, unit-normalized
// output. Forward and backward passes are written out by hand so that
// per-sample gradient norms come for free.

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "adasample/errors.hpp"
#include "adasample/rng.hpp"

namespace adasample {

enum class Activation { kTanh, kRelu };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Weights theta^(1..L). Layer l has shape dims[l] x dims[l-1].
template <typename Scalar>
struct ModelParams {
  std::vector<MatrixX<Scalar>> layers;
  Activation activation = Activation::kTanh;

  std::size_t depth() const { return layers.size(); }
  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().cols(); }
  Eigen::Index output_dim() const { return layers.empty() ? 0 : layers.back().rows(); }

  std::vector<Eigen::Index> dims() const {
    std::vector<Eigen::Index> out;
    if (layers.empty()) return out;
    out.push_back(layers.front().cols());
    for (const auto& w : layers) out.push_back(w.rows());
    return out;
  }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& w : layers) n += w.size();
    return n;
  }

  /// Throws InvalidArgument if shapes do not chain or any entry is non-finite.
  void validate() const {
    if (layers.empty()) throw InvalidArgument("model has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].size() == 0) throw InvalidArgument("layer " + std::to_string(l) + " is empty");
      if (l > 0 && layers[l].cols() != layers[l - 1].rows()) {
        throw InvalidArgument("layer " + std::to_string(l) + " has " +
                              std::to_string(layers[l].cols()) + " columns, expected " +
                              std::to_string(layers[l - 1].rows()));
      }
      if (!layers[l].allFinite()) {
        throw InvalidArgument("layer " + std::to_string(l) + " has non-finite entries");
      }
    }
  }
};

/// Per-layer gradients, shape-matched to ModelParams.
template <typename Scalar>
struct GradEstimate {
  std::vector<MatrixX<Scalar>> layers;

  static GradEstimate zeros_like(const ModelParams<Scalar>& params) {
    GradEstimate g;
    g.layers.reserve(params.layers.size());
    for (const auto& w : params.layers) g.layers.push_back(MatrixX<Scalar>::Zero(w.rows(), w.cols()));
    return g;
  }

  Scalar squared_norm() const {
    Scalar s(0);
    for (const auto& m : layers) s += m.squaredNorm();
    return s;
  }
  Scalar norm() const { return std::sqrt(squared_norm()); }

  bool all_finite() const {
    for (const auto& m : layers)
      if (!m.allFinite()) return false;
    return true;
  }

  /// Layers concatenated in row-major order.
  VectorX<Scalar> flatten() const {
    Eigen::Index n = 0;
    for (const auto& m : layers) n += m.size();
    VectorX<Scalar> out(n);
    Eigen::Index k = 0;
    for (const auto& m : layers)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[k++] = m(r, c);
    return out;
  }

  GradEstimate& operator+=(const GradEstimate& other) {
    if (other.layers.size() != layers.size()) throw InvalidArgument("gradient depth mismatch");
    for (std::size_t l = 0; l < layers.size(); ++l) layers[l] += other.layers[l];
    return *this;
  }
  GradEstimate& operator*=(Scalar c) {
    for (auto& m : layers) m *= c;
    return *this;
  }
};

/// Intermediate values of one forward pass; columns are samples.
template <typename Scalar>
struct ForwardCache {
  /// activations[0] is the input batch; activations[l] = g(h^(l)) for 0 < l < L.
  std::vector<MatrixX<Scalar>> activations;
  /// pre_activations[l-1] = h^(l) = theta^(l) x^(l-1); the last one is the
  /// pre-normalization output.
  std::vector<MatrixX<Scalar>> pre_activations;
  /// Normalized outputs, one unit column per sample.
  MatrixX<Scalar> outputs;
  /// Euclidean norm of each pre-normalization output column.
  VectorX<Scalar> output_norms;

  std::size_t depth() const { return pre_activations.size(); }
  Eigen::Index batch_size() const { return outputs.cols(); }
};

template <typename Scalar>
struct ForwardResult {
  MatrixX<Scalar> descriptors;
  ForwardCache<Scalar> cache;
};

template <typename Scalar>
struct BackwardResult {
  GradEstimate<Scalar> param_grads;
  VectorX<Scalar> per_sample_norms;
};

namespace detail {

template <typename Scalar>
MatrixX<Scalar> activate(const MatrixX<Scalar>& h, Activation activation) {
  switch (activation) {
    case Activation::kTanh:
      return h.array().tanh().matrix();
    case Activation::kRelu:
      return h.array().max(Scalar(0)).matrix();
  }
  throw InvalidArgument("unknown activation");
}

// g'(h) given h and g(h).
template <typename Scalar, typename DerivedH, typename DerivedX>
VectorX<Scalar> activation_slope(const Eigen::MatrixBase<DerivedH>& h,
                                 const Eigen::MatrixBase<DerivedX>& x, Activation activation) {
  switch (activation) {
    case Activation::kTanh:
      return (Scalar(1) - x.array().square()).matrix();
    case Activation::kRelu:
      return (h.array() > Scalar(0)).template cast<Scalar>().matrix();
  }
  throw InvalidArgument("unknown activation");
}

}  // namespace detail

/// Fan-in scaled normal initialization, variance 2 / fan_in.
template <typename Scalar = double>
ModelParams<Scalar> init_params(const std::vector<Eigen::Index>& layer_dims, std::uint64_t seed,
                                Activation activation = Activation::kTanh) {
  if (layer_dims.size() < 2) throw InvalidArgument("need at least an input and an output dimension");
  for (auto d : layer_dims)
    if (d <= 0) throw InvalidArgument("layer dimensions must be positive");

  Rng rng = make_rng(seed, Stream::kInit);
  ModelParams<Scalar> params;
  params.activation = activation;
  for (std::size_t l = 1; l < layer_dims.size(); ++l) {
    const Eigen::Index rows = layer_dims[l];
    const Eigen::Index cols = layer_dims[l - 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(cols));
    MatrixX<Scalar> w(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = Scalar(stddev * standard_normal(rng));
    params.layers.push_back(std::move(w));
  }
  return params;
}

/// Runs the network on a batch (one column per flattened patch).
template <typename Scalar, typename Derived>
ForwardResult<Scalar> forward(const ModelParams<Scalar>& params,
                              const Eigen::MatrixBase<Derived>& inputs) {
  if (params.layers.empty()) throw InvalidArgument("model has no layers");
  if (inputs.rows() != params.input_dim()) {
    throw InvalidArgument("input dimension " + std::to_string(inputs.rows()) +
                          " does not match network input " + std::to_string(params.input_dim()));
  }
  const std::size_t depth = params.layers.size();
  ForwardResult<Scalar> result;
  auto& cache = result.cache;
  cache.activations.reserve(depth);
  cache.pre_activations.reserve(depth);
  cache.activations.emplace_back(inputs);

  for (std::size_t l = 0; l < depth; ++l) {
    MatrixX<Scalar> h = params.layers[l] * cache.activations.back();
    if (l + 1 < depth) cache.activations.push_back(detail::activate(h, params.activation));
    cache.pre_activations.push_back(std::move(h));
  }

  const auto& raw = cache.pre_activations.back();
  cache.output_norms = raw.colwise().norm().transpose();
  for (Eigen::Index b = 0; b < raw.cols(); ++b) {
    if (!(cache.output_norms[b] > Scalar(0))) {
      throw DegenerateError("pre-normalization output of sample " + std::to_string(b) +
                            " has zero norm");
    }
  }
  cache.outputs = raw * cache.output_norms.cwiseInverse().asDiagonal();
  result.descriptors = cache.outputs;
  return result;
}

/// Cache restricted to the given sample columns, in the given order.
template <typename Scalar>
ForwardCache<Scalar> select_columns(const ForwardCache<Scalar>& cache, const std::vector<Eigen::Index>& cols) {
  auto pick = [&cols](const MatrixX<Scalar>& m) {
    MatrixX<Scalar> out(m.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] < 0 || cols[i] >= m.cols()) throw InvalidArgument("cache column out of range");
      out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
    }
    return out;
  };
  ForwardCache<Scalar> out;
  for (const auto& a : cache.activations) out.activations.push_back(pick(a));
  for (const auto& h : cache.pre_activations) out.pre_activations.push_back(pick(h));
  out.outputs = pick(cache.outputs);
  out.output_norms.resize(static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.output_norms[static_cast<Eigen::Index>(i)] = cache.output_norms[cols[i]];
  return out;
}

/// Reverse pass. output_grads holds dL/dy per sample (same shape as the
/// descriptors). Returns the batch-summed parameter gradient and, per sample,
/// the norm of that sample's full parameter gradient.
template <typename Scalar, typename Derived>
BackwardResult<Scalar> backward(const ModelParams<Scalar>& params, const ForwardCache<Scalar>& cache,
                                const Eigen::MatrixBase<Derived>& output_grads) {
  const std::size_t depth = params.layers.size();
  if (cache.depth() != depth || cache.activations.size() != depth) {
    throw InvalidArgument("forward cache depth does not match the model");
  }
  const Eigen::Index batch = cache.batch_size();
  if (output_grads.cols() != batch || output_grads.rows() != cache.outputs.rows()) {
    throw InvalidArgument("output gradient shape " + std::to_string(output_grads.rows()) + "x" +
                          std::to_string(output_grads.cols()) + " does not match cache " +
                          std::to_string(cache.outputs.rows()) + "x" + std::to_string(batch));
  }

  BackwardResult<Scalar> result;
  result.param_grads = GradEstimate<Scalar>::zeros_like(params);
  result.per_sample_norms = VectorX<Scalar>::Zero(batch);

  // deltas[l] holds dL/dh^(l+1) for every sample; filled column by column so
  // a sample's numbers never depend on the rest of the batch.
  std::vector<MatrixX<Scalar>> deltas(depth);
  for (std::size_t l = 0; l < depth; ++l) {
    deltas[l] = MatrixX<Scalar>::Zero(params.layers[l].rows(), batch);
  }

  for (Eigen::Index b = 0; b < batch; ++b) {
    if (output_grads.col(b).isZero(Scalar(0))) continue;

    // Unit-normalization Jacobian: (I - y y^T) / |h|.
    const auto y = cache.outputs.col(b);
    const VectorX<Scalar> g = output_grads.col(b);
    VectorX<Scalar> delta = (g - y * y.dot(g)) / cache.output_norms[b];

    Scalar sq(0);
    for (std::size_t l = depth; l-- > 0;) {
      deltas[l].col(b) = delta;
      sq += delta.squaredNorm() * cache.activations[l].col(b).squaredNorm();
      if (l == 0) break;
      VectorX<Scalar> upstream = params.layers[l].transpose() * delta;
      delta = upstream.cwiseProduct(detail::activation_slope<Scalar>(
          cache.pre_activations[l - 1].col(b), cache.activations[l].col(b), params.activation));
    }
    result.per_sample_norms[b] = std::sqrt(sq);
  }

  for (std::size_t l = 0; l < depth; ++l) {
    result.param_grads.layers[l].noalias() = deltas[l] * cache.activations[l].transpose();
  }
  return result;
}

/// Central-difference gradient of an arbitrary scalar function of the weights.
template <typename Scalar>
GradEstimate<Scalar> finite_diff_grad(const ModelParams<Scalar>& params,
                                      const std::function<Scalar(const ModelParams<Scalar>&)>& loss,
                                      Scalar eps) {
  if (!(eps > Scalar(0))) throw InvalidArgument("finite-difference step must be positive");
  GradEstimate<Scalar> grad = GradEstimate<Scalar>::zeros_like(params);
  ModelParams<Scalar> probe = params;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& w = probe.layers[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) {
        const Scalar original = w(r, c);
        w(r, c) = original + eps;
        const Scalar plus = loss(probe);
        w(r, c) = original - eps;
        const Scalar minus = loss(probe);
        w(r, c) = original;
        if (!std::isfinite(plus) || !std::isfinite(minus)) {
          throw NumericError("loss is not finite at layer " + std::to_string(l) + " entry (" +
                             std::to_string(r) + ", " + std::to_string(c) + ")");
        }
        grad.layers[l](r, c) = (plus - minus) / (Scalar(2) * eps);
      }
    }
  }
  return grad;
}

using Params = ModelParams<double>;
using Gradient = GradEstimate<double>;

/// Binary weight blob: "ADNW", u32 version, u32 layer count, (count + 1) u32
/// dims, then every layer's weights as row-major little-endian float64.
/// The activation is not part of the blob and is supplied when reading.
inline constexpr std::uint32_t kParamsVersion = 1;
void write_params(const Params& params, std::ostream& out);
Params read_params(std::istream& in, Activation activation = Activation::kTanh);
void save_params(const Params& params, const std::string& path);
Params load_params(const std::string& path, Activation activation = Activation::kTanh);

}  // namespace adasample
