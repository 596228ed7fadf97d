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

// Informativeness-based positive sampling, unbiased re-weighting, and the
// exact variance / rectification quantities used to check them.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "adasample/rng.hpp"
#include "adasample/tensornet.hpp"

namespace adasample {

struct SamplerConfig {
  double lambda = 10.0;
  double ema_decay = 0.99;
  double exponent_cap = 50.0;
  double loss_floor = 1e-4;
  // Scale each selected pair's loss by its normalized inverse distance.
  bool reweight = true;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;
};

/// Exponential moving average of the batch mean loss.
struct LossTracker {
  double l_avg = 0.0;
  bool initialized = false;
};

/// First call seeds the average; later calls blend with ema_decay.
LossTracker update_loss_avg(const LossTracker& tracker, double batch_mean_loss,
                            const SamplerConfig& config);

/// min(lambda / max(l_avg, loss_floor), exponent_cap). Throws StateError on an
/// uninitialized tracker.
double adaptive_exponent(const LossTracker& tracker, const SamplerConfig& config);

/// p_i proportional to d_i^exponent over the candidate positives. Uniform when
/// the exponent is zero or every distance is zero.
Eigen::VectorXd positive_probs(const Eigen::Ref<const Eigen::VectorXd>& distances, double exponent);

inline constexpr double kDistanceFloor = 1e-6;

struct Reweighting {
  Eigen::VectorXd weights;
  // At least one distance was at or below kDistanceFloor and got clamped.
  bool clamped = false;
};

/// w_i proportional to 1 / d_i, scaled so the weights average to one.
Reweighting reweights(const Eigen::Ref<const Eigen::VectorXd>& distances);

/// Inverse-CDF draw; the lowest index wins at CDF ties.
std::size_t categorical_sample(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng);

/// One positive selection within a class.
struct PositiveDraw {
  std::size_t anchor_index = 0;
  std::size_t chosen_index = 0;
  double probability_used = 1.0;
  double distance = 0.0;
  double weight = 1.0;
};

/// Samples a positive for the given anchor. class_distances holds the distance
/// from the anchor to every member of the class (the anchor's own entry is
/// ignored). The returned weight is 1; batch-level reweighting fills it in.
PositiveDraw draw_positive(const Eigen::Ref<const Eigen::VectorXd>& class_distances,
                           std::size_t anchor_index, double exponent, Rng& rng);

/// Variance-minimizing probabilities under the constraint p_i w_i = (alpha/K) L_i^(alpha-1):
/// p_i proportional to L_i^(alpha-1) * |grad L_i|.
Eigen::VectorXd optimal_probs(const Eigen::Ref<const Eigen::VectorXd>& losses,
                              const Eigen::Ref<const Eigen::VectorXd>& grad_norms, double alpha);

/// w_i = (alpha/K) L_i^(alpha-1) / p_i, which makes the weighted single-sample
/// gradient an unbiased estimate of grad (1/K) sum L_i^alpha.
Eigen::VectorXd unbiased_weights(const Eigen::Ref<const Eigen::VectorXd>& probs,
                                 const Eigen::Ref<const Eigen::VectorXd>& losses, double alpha,
                                 std::size_t num_examples);

/// Mean of the weighted estimator, sum_i p_i w_i g_i. Gradients are flat vectors.
Eigen::VectorXd estimator_mean(const Eigen::Ref<const Eigen::VectorXd>& probs,
                               const Eigen::Ref<const Eigen::VectorXd>& weights,
                               std::span<const Eigen::VectorXd> grads);

/// tr Var[w_I g_I] = sum_i p_i w_i^2 |g_i|^2 - |sum_i p_i w_i g_i|^2.
double trace_variance(const Eigen::Ref<const Eigen::VectorXd>& probs,
                      const Eigen::Ref<const Eigen::VectorXd>& weights,
                      std::span<const Eigen::VectorXd> grads);
double trace_variance(const Eigen::Ref<const Eigen::VectorXd>& probs,
                      const Eigen::Ref<const Eigen::VectorXd>& weights,
                      std::span<const Gradient> grads);

/// Expected one-step reduction of |theta - theta*|^2 under theta' = theta - eta w_I g_I:
/// 2 eta (theta - theta*)^T mu - eta^2 |mu|^2 - eta^2 tr Var.
double expected_rectification(const Eigen::Ref<const Eigen::VectorXd>& theta,
                              const Eigen::Ref<const Eigen::VectorXd>& theta_star, double eta,
                              const Eigen::Ref<const Eigen::VectorXd>& probs,
                              const Eigen::Ref<const Eigen::VectorXd>& weights,
                              std::span<const Eigen::VectorXd> grads);

}  // namespace adasample
