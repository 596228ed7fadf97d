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

#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "adasample/errors.hpp"
#include "adasample/trainer.hpp"

namespace {

using adasample::Dataset;
using adasample::DatasetSpec;
using adasample::TrainConfig;

Dataset make_data(int classes, int k, std::uint64_t seed = 3, double nuisance = 1.0) {
  DatasetSpec s;
  s.num_classes = classes;
  s.patches_per_class = k;
  s.patch_size = 8;
  s.warp_magnitude *= nuisance;
  s.noise_sigma *= nuisance;
  s.brightness_jitter *= nuisance;
  s.seed = seed;
  return adasample::generate_synthetic(s);
}

TrainConfig small_config(int n = 8) {
  TrainConfig c;
  c.batch_size = n;
  c.net.hidden = {12};
  c.net.descriptor_dim = 6;
  c.pairs_per_epoch = 4 * n;
  c.epochs = 2;
  c.seed = 5;
  return c;
}

double batch_objective(const adasample::Params& params, const adasample::Batch& batch, const TrainConfig& c) {
  const Eigen::MatrixXd y = adasample::forward(params, batch.inputs).descriptors;
  Eigen::MatrixXd a(y.rows(), static_cast<Eigen::Index>(batch.size()));
  Eigen::MatrixXd p = a;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    a.col(static_cast<Eigen::Index>(i)) = y.col(batch.anchor_cols[i]);
    p.col(static_cast<Eigen::Index>(i)) = y.col(batch.positive_cols[i]);
  }
  const auto mined = adasample::mine_triplets(a, p, c.metric, c.margin, c.neg_mode);
  double s = 0.0;
  for (std::size_t i = 0; i < mined.size(); ++i) s += batch.weights[static_cast<Eigen::Index>(i)] * mined[i].loss;
  return s;
}

TEST(BuildBatch, DistinctClassesAndConsistentColumns) {
  const Dataset d = make_data(20, 4);
  const auto c = small_config(8);
  const auto state = adasample::init_train_state(c, d.patch_size);
  auto rng = adasample::make_rng(1, adasample::Stream::kTrain);
  for (int t = 0; t < 50; ++t) {
    const auto b = adasample::build_batch(d, state.params, c, state.loss_tracker, rng);
    ASSERT_EQ(b.size(), 8u);
    EXPECT_EQ(std::set<std::size_t>(b.class_positions.begin(), b.class_positions.end()).size(), 8u);
    EXPECT_EQ(b.inputs.cols(), 32);
    EXPECT_EQ(b.diagnostics.exponent, 0.0);  // tracker not initialized yet
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_NE(b.draws[i].chosen_index, b.draws[i].anchor_index);
      EXPECT_EQ(b.anchor_cols[i], static_cast<Eigen::Index>(4 * i + b.draws[i].anchor_index));
      EXPECT_EQ(b.positive_cols[i], static_cast<Eigen::Index>(4 * i + b.draws[i].chosen_index));
      EXPECT_GT(b.draws[i].probability_used, 0.0);
      EXPECT_NEAR(b.diagnostics.candidate_probs[i].sum(), 1.0, 1e-12);
    }
    EXPECT_NEAR(b.weights.mean(), 1.0, 1e-12);
  }
}

TEST(BuildBatch, ZeroLambdaPicksUniformly) {
  const Dataset d = make_data(2, 5);
  auto c = small_config(2);
  c.sampler.lambda = 0.0;
  const auto state = adasample::init_train_state(c, d.patch_size);
  const adasample::LossTracker tracker{0.5, true};
  auto rng = adasample::make_rng(2, adasample::Stream::kTrain);
  std::vector<int> counts(4, 0);
  for (int t = 0; t < 10000; ++t) {
    const auto b = adasample::build_batch(d, state.params, c, tracker, rng);
    EXPECT_EQ(b.diagnostics.exponent, 0.0);
    const auto& draw = b.draws[0];
    ++counts[draw.chosen_index < draw.anchor_index ? draw.chosen_index : draw.chosen_index - 1];
  }
  const double sigma = std::sqrt(10000 * 0.25 * 0.75);
  for (int n : counts) EXPECT_LT(std::abs(n - 2500.0), 3 * sigma);
}

TEST(BuildBatch, TwoPerClassForcesThePositive) {
  const Dataset d = make_data(6, 2);
  auto c = small_config(6);
  const auto state = adasample::init_train_state(c, d.patch_size);
  auto rng = adasample::make_rng(2, adasample::Stream::kTrain);
  for (int t = 0; t < 100; ++t) {
    const auto b = adasample::build_batch(d, state.params, c, {1.0, true}, rng);
    for (const auto& draw : b.draws) EXPECT_EQ(draw.chosen_index, 1 - draw.anchor_index);
  }
}

TEST(BuildBatch, DeterministicForSeed) {
  const Dataset d = make_data(20, 4);
  auto c = small_config(8);
  c.augment = true;
  const auto state = adasample::init_train_state(c, d.patch_size);
  auto r1 = adasample::make_rng(4, adasample::Stream::kTrain);
  auto r2 = adasample::make_rng(4, adasample::Stream::kTrain);
  const auto a = adasample::build_batch(d, state.params, c, {0.7, true}, r1);
  const auto b = adasample::build_batch(d, state.params, c, {0.7, true}, r2);
  EXPECT_EQ(a.class_positions, b.class_positions);
  EXPECT_EQ(a.positive_cols, b.positive_cols);
  EXPECT_TRUE(a.inputs == b.inputs);
  EXPECT_TRUE(a.weights == b.weights);
}

TEST(BuildBatch, DatasetErrors) {
  const auto c = small_config(8);
  const auto state = adasample::init_train_state(c, 8);
  auto rng = adasample::make_rng(4, adasample::Stream::kTrain);
  EXPECT_THROW(adasample::build_batch(make_data(5, 4), state.params, c, {}, rng), adasample::DatasetError);
  Dataset d = make_data(10, 3);
  d.classes[4].patches.resize(1);
  EXPECT_THROW(adasample::build_batch(d, state.params, c, {}, rng), adasample::DatasetError);
}

TEST(TrainStep, ZeroLearningRateKeepsParamsButUpdatesTracker) {
  const Dataset d = make_data(20, 4);
  auto c = small_config(8);
  c.lr = 0.0;
  auto state = adasample::init_train_state(c, d.patch_size);
  const auto before = state.params;
  const auto b = adasample::build_batch(d, state.params, c, state.loss_tracker, state.rng);
  const auto m = adasample::train_step(state, b, c);
  for (std::size_t l = 0; l < before.layers.size(); ++l) EXPECT_TRUE(before.layers[l] == state.params.layers[l]);
  EXPECT_TRUE(state.loss_tracker.initialized);
  EXPECT_EQ(state.loss_tracker.l_avg, m.mean_loss);
  EXPECT_EQ(state.step, 1);
}

TEST(TrainStep, InactiveHingesWithoutDecayLeaveParams) {
  const Dataset d = make_data(20, 3, 3, 0.0);  // identical views: d_pos = 0
  auto c = small_config(8);
  c.margin = 1e-6;
  c.weight_decay = 0.0;
  auto state = adasample::init_train_state(c, d.patch_size);
  const auto before = state.params;
  const auto b = adasample::build_batch(d, state.params, c, state.loss_tracker, state.rng);
  const auto m = adasample::train_step(state, b, c);
  EXPECT_EQ(m.active_fraction, 0.0);
  for (std::size_t l = 0; l < before.layers.size(); ++l) EXPECT_TRUE(before.layers[l] == state.params.layers[l]);
}

TEST(TrainStep, SmallStepDescends) {
  const Dataset d = make_data(20, 4);
  auto c = small_config(8);
  c.weight_decay = 0.0;
  c.lr = 1e-3;
  auto state = adasample::init_train_state(c, d.patch_size);
  for (int t = 0; t < 10; ++t) {
    const auto b = adasample::build_batch(d, state.params, c, state.loss_tracker, state.rng);
    const double before = batch_objective(state.params, b, c);
    adasample::TrainState trial = state;
    trial.momentum = adasample::Gradient::zeros_like(state.params);
    const auto m = adasample::train_step(trial, b, c);
    EXPECT_NEAR(m.weighted_loss, before, 1e-12 * std::max(1.0, before));
    EXPECT_LT(batch_objective(trial.params, b, c), before);
    state = trial;
  }
}

TEST(TrainStep, UpdateEqualsManualComposition) {
  const Dataset d = make_data(20, 4);
  auto c = small_config(8);
  c.lr = 0.05;
  c.momentum = 0.5;
  c.weight_decay = 1e-2;
  auto state = adasample::init_train_state(c, d.patch_size);
  adasample::Gradient v = adasample::Gradient::zeros_like(state.params);
  for (int t = 0; t < 3; ++t) {
    const auto b = adasample::build_batch(d, state.params, c, state.loss_tracker, state.rng);
    const auto anchors = b.anchors();
    const auto positives = b.positives();
    const auto mined = adasample::mine_triplets(anchors, positives, c.metric, c.margin, c.neg_mode);
    const auto g = adasample::loss_grads(anchors, positives, mined, b.weights, c.metric, c.margin);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(b.cache.outputs.rows(), b.cache.outputs.cols());
    for (std::size_t i = 0; i < b.size(); ++i) {
      out.col(b.anchor_cols[i]) += g.anchors.col(static_cast<Eigen::Index>(i));
      out.col(b.positive_cols[i]) += g.positives.col(static_cast<Eigen::Index>(i));
    }
    const auto grad = adasample::backward(state.params, b.cache, out).param_grads;
    adasample::Params expected = state.params;
    for (std::size_t l = 0; l < expected.layers.size(); ++l) {
      v.layers[l] = c.momentum * v.layers[l] + grad.layers[l] + c.weight_decay * state.params.layers[l];
      expected.layers[l] -= c.lr * v.layers[l];
    }
    adasample::train_step(state, b, c);
    for (std::size_t l = 0; l < expected.layers.size(); ++l) {
      EXPECT_LT((expected.layers[l] - state.params.layers[l]).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}

TEST(TrainStep, NonFiniteLossAbortsWithoutMutation) {
  const Dataset d = make_data(20, 4);
  auto c = small_config(8);
  auto state = adasample::init_train_state(c, d.patch_size);
  auto b = adasample::build_batch(d, state.params, c, state.loss_tracker, state.rng);
  b.weights[0] = std::numeric_limits<double>::quiet_NaN();
  const auto before = state.params;
  try {
    adasample::train_step(state, b, c);
    FAIL() << "expected a numeric error";
  } catch (const adasample::NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step 0"), std::string::npos);
  }
  EXPECT_EQ(state.step, 0);
  EXPECT_FALSE(state.loss_tracker.initialized);
  for (std::size_t l = 0; l < before.layers.size(); ++l) EXPECT_TRUE(before.layers[l] == state.params.layers[l]);
}

TEST(Schedule, DropsByTenPerPassedEpoch) {
  TrainConfig c;
  c.lr = 0.5;
  c.lr_drop_epochs = {4, 8, 10};
  EXPECT_EQ(adasample::scheduled_lr(c, 0), 0.5);
  EXPECT_EQ(adasample::scheduled_lr(c, 3), 0.5);
  EXPECT_EQ(adasample::scheduled_lr(c, 4), 0.5 / 10);
  EXPECT_EQ(adasample::scheduled_lr(c, 9), 0.5 / 100);
  EXPECT_EQ(adasample::scheduled_lr(c, 11), 0.5 / 1000);
}

TEST(Train, ZeroEpochsReturnsInitialParams) {
  const Dataset d = make_data(20, 4);
  auto c = small_config(8);
  c.epochs = 0;
  const auto r = adasample::train(c, d);
  EXPECT_TRUE(r.log.empty());
  const auto init = adasample::init_train_state(c, d.patch_size);
  for (std::size_t l = 0; l < init.params.layers.size(); ++l) EXPECT_TRUE(init.params.layers[l] == r.params.layers[l]);
}

TEST(Train, DeterministicLogAndObserver) {
  const Dataset d = make_data(20, 4);
  auto c = small_config(8);
  c.epochs = 3;
  c.lr_drop_epochs = {1};
  int calls = 0;
  const auto a = adasample::train(c, d, [&](const adasample::EpochMetrics& m, const adasample::TrainState& s) {
    EXPECT_EQ(m.epoch, calls);
    EXPECT_EQ(s.step, m.step);
    ++calls;
  });
  const auto b = adasample::train(c, d);
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(a.log, b.log);
  ASSERT_EQ(a.log.size(), 3u);
  EXPECT_EQ(a.log[0].step, c.steps_per_epoch());
  EXPECT_EQ(a.log[0].lr, c.lr);
  EXPECT_EQ(a.log[1].lr, c.lr / 10);
  c.seed = 6;
  EXPECT_NE(adasample::train(c, d).log, a.log);
}

TEST(Train, SameSeedLambdaRunsShareTheFirstStep) {
  const Dataset d = make_data(20, 4);
  auto c = small_config(8);
  c.epochs = 1;
  c.pairs_per_epoch = 8;  // exactly one step
  c.sampler.lambda = 0.0;
  const auto zero = adasample::train(c, d);
  c.sampler.lambda = 10.0;
  const auto ten = adasample::train(c, d);
  EXPECT_EQ(zero.log, ten.log);
}

TEST(Train, LossDropsOnDeskDataset) {
  DatasetSpec s;
  s.num_classes = 200;
  s.patches_per_class = 8;
  s.seed = 11;
  const Dataset d = adasample::generate_synthetic(s);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    TrainConfig c;
    c.seed = seed;
    const auto r = adasample::train(c, d);
    ASSERT_EQ(r.log.size(), 12u);
    EXPECT_LT(r.log.back().mean_loss, r.log.front().mean_loss) << "seed " << seed;
  }
}

TEST(Config, ValidateRejectsBadValues) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 1;
  EXPECT_THROW(c.validate(), adasample::InvalidArgument);
  c = {};
  c.margin = 0.0;
  EXPECT_THROW(c.validate(), adasample::InvalidArgument);
  c = {};
  c.lr = -1.0;
  EXPECT_THROW(c.validate(), adasample::InvalidArgument);
  c = {};
  c.momentum = 1.0;
  EXPECT_THROW(c.validate(), adasample::InvalidArgument);
}

TEST(MetricsCsv, HeaderAndRow) {
  std::ostringstream out;
  adasample::write_metrics_header(out);
  adasample::write_metrics_row(out, {2, 40, 0.5, 0.25, 3.0, 0.1, 0.9, 0.75, 0.01});
  EXPECT_EQ(out.str(),
            "epoch,step,mean_loss,l_avg,exponent,mean_dpos,mean_dneg,active_fraction,lr\n"
            "2,40,0.5,0.25,3,0.10000000000000001,0.90000000000000002,0.75,0.01\n");
}

}  // namespace
