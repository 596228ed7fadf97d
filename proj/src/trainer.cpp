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

#include "adasample/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "adasample/errors.hpp"

namespace adasample {

std::vector<Eigen::Index> NetConfig::layer_dims(Eigen::Index input_dim) const {
  std::vector<Eigen::Index> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(descriptor_dim);
  return dims;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw InvalidArgument("train.batch_size must be at least 2");
  if (!(margin > 0.0) || !std::isfinite(margin)) throw InvalidArgument("train.margin must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("train.lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw InvalidArgument("train.weight_decay must be nonnegative");
  }
  if (epochs < 0) throw InvalidArgument("train.epochs must be nonnegative");
  if (pairs_per_epoch < batch_size) throw InvalidArgument("train.pairs_per_epoch must be at least the batch size");
  for (int e : lr_drop_epochs)
    if (e < 0) throw InvalidArgument("train.lr_drop_epochs must be nonnegative");
  if (net.descriptor_dim < 1) throw InvalidArgument("net.descriptor_dim must be positive");
  for (auto h : net.hidden)
    if (h < 1) throw InvalidArgument("net.hidden sizes must be positive");
  sampler.validate();
}

double scheduled_lr(const TrainConfig& config, int epoch) {
  const auto drops = std::count_if(config.lr_drop_epochs.begin(), config.lr_drop_epochs.end(),
                                   [epoch](int e) { return e <= epoch; });
  return config.lr / std::pow(10.0, static_cast<double>(drops));
}

TrainState init_train_state(const TrainConfig& config, int patch_size) {
  TrainState state;
  state.params = init_params<double>(config.net.layer_dims(static_cast<Eigen::Index>(patch_size) * patch_size),
                                     config.seed, config.net.activation);
  state.momentum = Gradient::zeros_like(state.params);
  state.rng = make_rng(config.seed, Stream::kTrain);
  return state;
}

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& cols) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = m.col(cols[i]);
  return out;
}

void check_dataset(const Dataset& dataset, int batch_size) {
  if (dataset.classes.size() < static_cast<std::size_t>(batch_size)) {
    throw DatasetError("dataset has " + std::to_string(dataset.classes.size()) + " classes, batch needs " +
                       std::to_string(batch_size));
  }
  for (const auto& group : dataset.classes) {
    if (group.patches.size() < 2) {
      throw DatasetError("class " + std::to_string(group.class_id) + " has fewer than two patches");
    }
  }
}

}  // namespace

DescriptorBatch Batch::anchors() const { return gather(cache.outputs, anchor_cols); }
DescriptorBatch Batch::positives() const { return gather(cache.outputs, positive_cols); }

Batch build_batch(const Dataset& dataset, const Params& params, const TrainConfig& config,
                  const LossTracker& tracker, Rng& rng) {
  check_dataset(dataset, config.batch_size);
  const std::size_t n = static_cast<std::size_t>(config.batch_size);
  const std::size_t num_classes = dataset.classes.size();

  // Partial Fisher-Yates: n distinct classes without replacement.
  std::vector<std::size_t> order(num_classes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) std::swap(order[i], order[i + uniform_index(rng, num_classes - i)]);

  Batch batch;
  batch.class_positions.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n));

  std::vector<Eigen::Index> offsets;
  Eigen::Index total = 0;
  for (auto c : batch.class_positions) {
    offsets.push_back(total);
    total += static_cast<Eigen::Index>(dataset.classes[c].patches.size());
  }
  const Eigen::Index p2 = static_cast<Eigen::Index>(dataset.patch_size) * dataset.patch_size;
  batch.inputs.resize(p2, total);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& patches = dataset.classes[batch.class_positions[s]].patches;
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const Patch& source = patches[i];
      const auto col = offsets[s] + static_cast<Eigen::Index>(i);
      batch.inputs.col(col) = config.augment ? patch_input(augment(source, rng)) : patch_input(source);
    }
  }

  auto fwd = forward(params, batch.inputs);
  batch.cache = std::move(fwd.cache);
  const auto& descriptors = batch.cache.outputs;

  const double exponent = tracker.initialized ? adaptive_exponent(tracker, config.sampler) : 0.0;
  batch.diagnostics.exponent = exponent;

  Eigen::VectorXd chosen_distances(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t k = dataset.classes[batch.class_positions[s]].patches.size();
    const std::size_t anchor = uniform_index(rng, k);
    const auto anchor_col = offsets[s] + static_cast<Eigen::Index>(anchor);

    Eigen::VectorXd dists(static_cast<Eigen::Index>(k));
    for (std::size_t i = 0; i < k; ++i) {
      dists[static_cast<Eigen::Index>(i)] =
          unchecked_distance(descriptors.col(anchor_col), descriptors.col(offsets[s] + static_cast<Eigen::Index>(i)),
                             config.metric);
    }
    PositiveDraw draw = draw_positive(dists, anchor, exponent, rng);

    Eigen::VectorXd candidates(static_cast<Eigen::Index>(k - 1));
    for (std::size_t i = 0, c = 0; i < k; ++i)
      if (i != anchor) candidates[static_cast<Eigen::Index>(c++)] = dists[static_cast<Eigen::Index>(i)];
    batch.diagnostics.candidate_probs.push_back(positive_probs(candidates, exponent));
    batch.diagnostics.class_distances.push_back(std::move(dists));

    chosen_distances[static_cast<Eigen::Index>(s)] = draw.distance;
    batch.anchor_cols.push_back(anchor_col);
    batch.positive_cols.push_back(offsets[s] + static_cast<Eigen::Index>(draw.chosen_index));
    batch.draws.push_back(draw);
  }

  if (config.sampler.reweight) {
    auto rw = reweights(chosen_distances);
    batch.weights = std::move(rw.weights);
    batch.diagnostics.reweight_clamped = rw.clamped;
  } else {
    batch.weights = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
  }
  for (std::size_t s = 0; s < n; ++s) batch.draws[s].weight = batch.weights[static_cast<Eigen::Index>(s)];
  return batch;
}

StepMetrics train_step(TrainState& state, const Batch& batch, const TrainConfig& config) {
  if (batch.size() < 2) throw InvalidArgument("batch needs at least two pairs");
  const DescriptorBatch anchors = batch.anchors();
  const DescriptorBatch positives = batch.positives();
  const auto mined = mine_triplets(anchors, positives, config.metric, config.margin, config.neg_mode);

  StepMetrics metrics;
  const auto n = static_cast<double>(mined.size());
  std::size_t active = 0;
  for (std::size_t i = 0; i < mined.size(); ++i) {
    metrics.mean_loss += mined[i].loss;
    metrics.weighted_loss += batch.weights[static_cast<Eigen::Index>(i)] * mined[i].loss;
    metrics.mean_dpos += mined[i].d_pos;
    metrics.mean_dneg += mined[i].d_neg;
    if (mined[i].loss > 0.0) ++active;
  }
  metrics.mean_loss /= n;
  metrics.mean_dpos /= n;
  metrics.mean_dneg /= n;
  metrics.active_fraction = static_cast<double>(active) / n;
  metrics.exponent = batch.diagnostics.exponent;
  metrics.lr = scheduled_lr(config, state.epoch);

  auto fail = [&](const std::string& what) {
    std::ostringstream msg;
    msg << what << " at step " << state.step << " (epoch " << state.epoch << "): mean_loss=" << metrics.mean_loss
        << " mean_dpos=" << metrics.mean_dpos << " mean_dneg=" << metrics.mean_dneg << " lr=" << metrics.lr;
    throw NumericError(msg.str());
  };
  if (!std::isfinite(metrics.mean_loss) || !std::isfinite(metrics.weighted_loss)) fail("non-finite loss");

  const auto grads = loss_grads(anchors, positives, mined, batch.weights, config.metric, config.margin);
  Eigen::MatrixXd output_grads = Eigen::MatrixXd::Zero(batch.cache.outputs.rows(), batch.cache.outputs.cols());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    output_grads.col(batch.anchor_cols[i]) += grads.anchors.col(static_cast<Eigen::Index>(i));
    output_grads.col(batch.positive_cols[i]) += grads.positives.col(static_cast<Eigen::Index>(i));
  }
  auto back = backward(state.params, batch.cache, output_grads);
  if (!back.param_grads.all_finite()) fail("non-finite gradient");

  for (std::size_t l = 0; l < state.params.layers.size(); ++l) {
    auto& w = state.params.layers[l];
    auto& v = state.momentum.layers[l];
    v = config.momentum * v + back.param_grads.layers[l] + config.weight_decay * w;
  }
  for (std::size_t l = 0; l < state.params.layers.size(); ++l) {
    state.params.layers[l] -= metrics.lr * state.momentum.layers[l];
  }

  state.loss_tracker = update_loss_avg(state.loss_tracker, metrics.mean_loss, config.sampler);
  metrics.l_avg = state.loss_tracker.l_avg;
  ++state.step;
  return metrics;
}

void write_metrics_header(std::ostream& out) {
  out << "epoch,step,mean_loss,l_avg,exponent,mean_dpos,mean_dneg,active_fraction,lr\n";
}

void write_metrics_row(std::ostream& out, const EpochMetrics& row) {
  std::ostringstream line;
  line << std::setprecision(17) << row.epoch << ',' << row.step << ',' << row.mean_loss << ',' << row.l_avg << ','
       << row.exponent << ',' << row.mean_dpos << ',' << row.mean_dneg << ',' << row.active_fraction << ','
       << row.lr << '\n';
  out << line.str();
}

TrainResult train(const TrainConfig& config, const Dataset& dataset, const EpochObserver& observer) {
  config.validate();
  check_dataset(dataset, config.batch_size);
  TrainState state = init_train_state(config, dataset.patch_size);

  TrainResult result;
  const int steps = config.steps_per_epoch();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    state.epoch = epoch;
    EpochMetrics row;
    row.epoch = epoch;
    for (int s = 0; s < steps; ++s) {
      const Batch batch = build_batch(dataset, state.params, config, state.loss_tracker, state.rng);
      const StepMetrics m = train_step(state, batch, config);
      row.mean_loss += m.mean_loss;
      row.exponent += m.exponent;
      row.mean_dpos += m.mean_dpos;
      row.mean_dneg += m.mean_dneg;
      row.active_fraction += m.active_fraction;
      row.lr = m.lr;
    }
    row.mean_loss /= steps;
    row.exponent /= steps;
    row.mean_dpos /= steps;
    row.mean_dneg /= steps;
    row.active_fraction /= steps;
    row.step = state.step;
    row.l_avg = state.loss_tracker.l_avg;
    result.log.push_back(row);
    if (observer) observer(row, state);
  }
  result.params = std::move(state.params);
  return result;
}

}  // namespace adasample
