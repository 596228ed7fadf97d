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

#include "adasample/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adasample/errors.hpp"

namespace adasample {

void SamplerConfig::validate() const {
  if (!(lambda >= 0.0)) throw InvalidArgument("sampler.lambda must be nonnegative");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw InvalidArgument("sampler.ema_decay must lie in (0, 1)");
  if (!(exponent_cap > 0.0) || !std::isfinite(exponent_cap)) {
    throw InvalidArgument("sampler.exponent_cap must be positive and finite");
  }
  if (!(loss_floor > 0.0) || !std::isfinite(loss_floor)) {
    throw InvalidArgument("sampler.loss_floor must be positive and finite");
  }
}

LossTracker update_loss_avg(const LossTracker& tracker, double batch_mean_loss,
                            const SamplerConfig& config) {
  if (!std::isfinite(batch_mean_loss)) throw InvalidArgument("batch mean loss is not finite");
  if (batch_mean_loss < 0.0) throw InvalidArgument("batch mean loss is negative");
  LossTracker next;
  next.initialized = true;
  if (!tracker.initialized) {
    next.l_avg = batch_mean_loss;
  } else {
    next.l_avg = config.ema_decay * tracker.l_avg + (1.0 - config.ema_decay) * batch_mean_loss;
  }
  return next;
}

double adaptive_exponent(const LossTracker& tracker, const SamplerConfig& config) {
  if (!tracker.initialized) throw StateError("loss tracker has not seen a batch yet");
  if (config.lambda == 0.0) return 0.0;
  return std::min(config.lambda / std::max(tracker.l_avg, config.loss_floor), config.exponent_cap);
}

Eigen::VectorXd positive_probs(const Eigen::Ref<const Eigen::VectorXd>& distances, double exponent) {
  const Eigen::Index n = distances.size();
  if (n == 0) throw InvalidArgument("no candidate positives");
  if (!distances.allFinite()) throw InvalidArgument("candidate distances must be finite");
  if ((distances.array() < 0.0).any()) throw InvalidArgument("candidate distances must be nonnegative");
  if (!(exponent >= 0.0) || !std::isfinite(exponent)) {
    throw InvalidArgument("sampling exponent must be finite and nonnegative");
  }

  const double d_max = distances.maxCoeff();
  if (exponent == 0.0 || d_max == 0.0) return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));

  // (d_i / d_max)^e in log space so large exponents cannot underflow the sum.
  Eigen::VectorXd p(n);
  const double log_max = std::log(d_max);
  for (Eigen::Index i = 0; i < n; ++i) {
    p[i] = distances[i] == 0.0 ? 0.0 : std::exp(exponent * (std::log(distances[i]) - log_max));
  }
  return p / p.sum();
}

Reweighting reweights(const Eigen::Ref<const Eigen::VectorXd>& distances) {
  if (distances.size() == 0) throw InvalidArgument("no distances to reweight");
  if (!distances.allFinite()) throw InvalidArgument("distances must be finite");
  Reweighting out;
  Eigen::VectorXd inv(distances.size());
  for (Eigen::Index i = 0; i < distances.size(); ++i) {
    double d = distances[i];
    if (d <= kDistanceFloor) {
      d = kDistanceFloor;
      out.clamped = true;
    }
    inv[i] = 1.0 / d;
  }
  out.weights = inv / inv.mean();
  return out;
}

std::size_t categorical_sample(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng) {
  const Eigen::Index n = probs.size();
  if (n == 0) throw InvalidArgument("empty probability vector");
  if (!probs.allFinite() || (probs.array() < 0.0).any()) {
    throw InvalidArgument("probabilities must be finite and nonnegative");
  }
  const double total = probs.sum();
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("probabilities sum to " + std::to_string(total) + ", not 1");
  }

  const double u = uniform01(rng);
  double cdf = 0.0;
  Eigen::Index last_positive = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (probs[i] <= 0.0) continue;
    cdf += probs[i];
    last_positive = i;
    if (u < cdf) return static_cast<std::size_t>(i);
  }
  // Rounding left the CDF just short of 1.
  return static_cast<std::size_t>(last_positive);
}

PositiveDraw draw_positive(const Eigen::Ref<const Eigen::VectorXd>& class_distances,
                           std::size_t anchor_index, double exponent, Rng& rng) {
  const auto k = static_cast<std::size_t>(class_distances.size());
  if (k < 2) throw InvalidArgument("a class needs at least two patches to draw a positive");
  if (anchor_index >= k) throw InvalidArgument("anchor index out of range");

  Eigen::VectorXd candidates(k - 1);
  for (std::size_t i = 0, c = 0; i < k; ++i)
    if (i != anchor_index) candidates[static_cast<Eigen::Index>(c++)] = class_distances[static_cast<Eigen::Index>(i)];

  const Eigen::VectorXd probs = positive_probs(candidates, exponent);
  const std::size_t pick = categorical_sample(probs, rng);

  PositiveDraw draw;
  draw.anchor_index = anchor_index;
  draw.chosen_index = pick < anchor_index ? pick : pick + 1;
  draw.probability_used = probs[static_cast<Eigen::Index>(pick)];
  draw.distance = candidates[static_cast<Eigen::Index>(pick)];
  return draw;
}

Eigen::VectorXd optimal_probs(const Eigen::Ref<const Eigen::VectorXd>& losses,
                              const Eigen::Ref<const Eigen::VectorXd>& grad_norms, double alpha) {
  if (losses.size() != grad_norms.size()) throw InvalidArgument("losses and gradient norms differ in length");
  if (losses.size() == 0) throw InvalidArgument("no examples");
  if (!(alpha >= 1.0)) throw InvalidArgument("alpha must be at least 1");
  if ((losses.array() <= 0.0).any()) throw InvalidArgument("losses must be positive");
  if ((grad_norms.array() < 0.0).any()) throw InvalidArgument("gradient norms must be nonnegative");

  const Eigen::VectorXd target = losses.array().pow(alpha - 1.0) * grad_norms.array();
  const double z = target.sum();
  if (!(z > 0.0)) throw DegenerateError("every L^(alpha-1) |grad L| product is zero");
  return target / z;
}

Eigen::VectorXd unbiased_weights(const Eigen::Ref<const Eigen::VectorXd>& probs,
                                 const Eigen::Ref<const Eigen::VectorXd>& losses, double alpha,
                                 std::size_t num_examples) {
  if (probs.size() != losses.size()) throw InvalidArgument("probabilities and losses differ in length");
  if (num_examples == 0) throw InvalidArgument("example count must be positive");
  const double scale = alpha / static_cast<double>(num_examples);
  Eigen::VectorXd w(probs.size());
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double target = scale * std::pow(losses[i], alpha - 1.0);
    if (target == 0.0) {
      w[i] = 0.0;
    } else if (probs[i] <= 0.0) {
      throw NumericError("example " + std::to_string(i) + " has zero probability but nonzero target");
    } else {
      w[i] = target / probs[i];
    }
  }
  return w;
}

namespace {

void check_lengths(const Eigen::Ref<const Eigen::VectorXd>& probs,
                   const Eigen::Ref<const Eigen::VectorXd>& weights, std::span<const Eigen::VectorXd> grads) {
  if (probs.size() != weights.size() || static_cast<std::size_t>(probs.size()) != grads.size()) {
    throw InvalidArgument("probabilities, weights and gradients differ in length");
  }
  if (grads.empty()) throw InvalidArgument("no gradients");
  for (const auto& g : grads)
    if (g.size() != grads.front().size()) throw InvalidArgument("gradient shapes differ");
}

}  // namespace

Eigen::VectorXd estimator_mean(const Eigen::Ref<const Eigen::VectorXd>& probs,
                               const Eigen::Ref<const Eigen::VectorXd>& weights,
                               std::span<const Eigen::VectorXd> grads) {
  check_lengths(probs, weights, grads);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(grads.front().size());
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    mu += probs[ii] * weights[ii] * grads[i];
  }
  return mu;
}

double trace_variance(const Eigen::Ref<const Eigen::VectorXd>& probs,
                      const Eigen::Ref<const Eigen::VectorXd>& weights,
                      std::span<const Eigen::VectorXd> grads) {
  const Eigen::VectorXd mu = estimator_mean(probs, weights, grads);
  double second_moment = 0.0;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    second_moment += probs[ii] * weights[ii] * weights[ii] * grads[i].squaredNorm();
  }
  return second_moment - mu.squaredNorm();
}

double trace_variance(const Eigen::Ref<const Eigen::VectorXd>& probs,
                      const Eigen::Ref<const Eigen::VectorXd>& weights, std::span<const Gradient> grads) {
  std::vector<Eigen::VectorXd> flat;
  flat.reserve(grads.size());
  for (const auto& g : grads) {
    if (!flat.empty() && (g.layers.size() != grads.front().layers.size())) {
      throw InvalidArgument("gradient depths differ");
    }
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
      if (g.layers[l].rows() != grads.front().layers[l].rows() ||
          g.layers[l].cols() != grads.front().layers[l].cols()) {
        throw InvalidArgument("gradient layer shapes differ");
      }
    }
    flat.push_back(g.flatten());
  }
  return trace_variance(probs, weights, std::span<const Eigen::VectorXd>(flat));
}

double expected_rectification(const Eigen::Ref<const Eigen::VectorXd>& theta,
                              const Eigen::Ref<const Eigen::VectorXd>& theta_star, double eta,
                              const Eigen::Ref<const Eigen::VectorXd>& probs,
                              const Eigen::Ref<const Eigen::VectorXd>& weights,
                              std::span<const Eigen::VectorXd> grads) {
  if (theta.size() != theta_star.size()) throw InvalidArgument("theta and theta* differ in size");
  if (!(eta > 0.0)) throw InvalidArgument("step size must be positive");
  const Eigen::VectorXd mu = estimator_mean(probs, weights, grads);
  if (mu.size() != theta.size()) throw InvalidArgument("gradient size does not match theta");
  const double tr_var = trace_variance(probs, weights, grads);
  return 2.0 * eta * (theta - theta_star).dot(mu) - eta * eta * mu.squaredNorm() - eta * eta * tr_var;
}

}  // namespace adasample
