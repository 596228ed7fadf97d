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

// Training loop: class selection, adaptive positive sampling, hardest-in-batch
// mining, weighted SGD with momentum.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "adasample/data.hpp"
#include "adasample/metricspace.hpp"
#include "adasample/miner.hpp"
#include "adasample/rng.hpp"
#include "adasample/sampler.hpp"
#include "adasample/tensornet.hpp"

namespace adasample {

struct NetConfig {
  std::vector<Eigen::Index> hidden = {64};
  Eigen::Index descriptor_dim = 32;
  Activation activation = Activation::kTanh;

  /// [input_dim, hidden..., descriptor_dim].
  std::vector<Eigen::Index> layer_dims(Eigen::Index input_dim) const;
};

struct TrainConfig {
  int batch_size = 64;
  double margin = 1.0;
  MetricKind metric = MetricKind::kAngular;
  // Applied to the summed (not averaged) batch gradient; 10 diverges for the
  // small MLP, so the default is far lower.
  double lr = 0.01;
  double momentum = 0.5;
  double weight_decay = 1e-4;
  int epochs = 12;
  // Zero-based epoch indices at which the learning rate has been divided by 10.
  std::vector<int> lr_drop_epochs = {4, 8, 10};
  int pairs_per_epoch = 6400;
  NegativeMode neg_mode = NegativeMode::kSameSide;
  // Random dihedral transform on every patch fed to the network.
  bool augment = false;
  SamplerConfig sampler;
  NetConfig net;
  std::uint64_t seed = 0;

  void validate() const;
  int steps_per_epoch() const { return pairs_per_epoch / batch_size; }
};

/// lr / 10^(number of drop epochs <= epoch).
double scheduled_lr(const TrainConfig& config, int epoch);

struct TrainState {
  Params params;
  Gradient momentum;
  LossTracker loss_tracker;
  int epoch = 0;
  std::int64_t step = 0;
  Rng rng;
};

/// Fresh parameters and a zero momentum buffer from the config seed.
TrainState init_train_state(const TrainConfig& config, int patch_size);

struct BatchDiagnostics {
  double exponent = 0.0;
  // Per selected class: anchor-to-member distances and the candidate
  // probabilities used for the positive draw.
  std::vector<Eigen::VectorXd> class_distances;
  std::vector<Eigen::VectorXd> candidate_probs;
  bool reweight_clamped = false;
};

struct Batch {
  std::vector<std::size_t> class_positions;
  std::vector<PositiveDraw> draws;
  // Every patch of every selected class, one column each, class-major.
  Eigen::MatrixXd inputs;
  // Forward pass over `inputs` under the parameters the batch was built with.
  ForwardCache<double> cache;
  std::vector<Eigen::Index> anchor_cols;
  std::vector<Eigen::Index> positive_cols;
  Eigen::VectorXd weights;
  BatchDiagnostics diagnostics;

  std::size_t size() const { return draws.size(); }
  DescriptorBatch anchors() const;
  DescriptorBatch positives() const;
};

/// Picks n distinct classes, runs the network over all their patches, then per
/// class draws an anchor uniformly and a positive with probability
/// proportional to distance^exponent. Exponent is zero until the tracker has
/// seen a batch.
Batch build_batch(const Dataset& dataset, const Params& params, const TrainConfig& config,
                  const LossTracker& tracker, Rng& rng);

struct StepMetrics {
  double mean_loss = 0.0;
  double weighted_loss = 0.0;  // sum_i w_i L_i
  double mean_dpos = 0.0;
  double mean_dneg = 0.0;
  double active_fraction = 0.0;
  double exponent = 0.0;
  double l_avg = 0.0;
  double lr = 0.0;
};

/// Mining, loss, weighted backward pass and one momentum SGD update:
///   g = sum_i w_i grad L_i + weight_decay * theta;  v = momentum * v + g;
///   theta -= lr * v.
/// Throws NumericError (state untouched) on a non-finite loss or gradient.
StepMetrics train_step(TrainState& state, const Batch& batch, const TrainConfig& config);

struct EpochMetrics {
  int epoch = 0;
  std::int64_t step = 0;
  double mean_loss = 0.0;
  double l_avg = 0.0;
  double exponent = 0.0;
  double mean_dpos = 0.0;
  double mean_dneg = 0.0;
  double active_fraction = 0.0;
  double lr = 0.0;

  bool operator==(const EpochMetrics&) const = default;
};

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpochMetrics& row);

struct TrainResult {
  Params params;
  std::vector<EpochMetrics> log;
};

/// Called after every epoch; the state holds the end-of-epoch parameters.
using EpochObserver = std::function<void(const EpochMetrics&, const TrainState&)>;

TrainResult train(const TrainConfig& config, const Dataset& dataset, const EpochObserver& observer = {});

}  // namespace adasample
