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

#include "adasample/miner.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "adasample/errors.hpp"

namespace adasample {

std::string_view to_string(NegativeSource source) {
  switch (source) {
    case NegativeSource::kAnchorVsAnchor:
      return "anchor_vs_anchor_j";
    case NegativeSource::kPositiveVsPositive:
      return "positive_vs_positive_j";
    case NegativeSource::kAnchorVsPositive:
      return "anchor_vs_positive_j";
    case NegativeSource::kPositiveVsAnchor:
      return "positive_vs_anchor_j";
  }
  return "unknown";
}

std::string_view to_string(NegativeMode mode) {
  return mode == NegativeMode::kSameSide ? "same_side" : "cross";
}

NegativeMode parse_negative_mode(std::string_view name) {
  if (name == "same_side") return NegativeMode::kSameSide;
  if (name == "cross") return NegativeMode::kCross;
  throw InvalidArgument("unknown negative mode '" + std::string(name) + "' (expected same_side or cross)");
}

namespace {

void check_batch(const Eigen::Ref<const DescriptorBatch>& anchors,
                 const Eigen::Ref<const DescriptorBatch>& positives) {
  if (anchors.cols() != positives.cols() || anchors.rows() != positives.rows()) {
    throw InvalidArgument("anchor and positive batches differ in shape");
  }
  if (anchors.cols() < 2) throw InvalidArgument("hardest-in-batch mining needs at least two pairs");
}

}  // namespace

std::vector<HardNegative> hardest_negatives(const Eigen::Ref<const DescriptorBatch>& anchors,
                                            const Eigen::Ref<const DescriptorBatch>& positives,
                                            MetricKind kind, NegativeMode mode) {
  check_batch(anchors, positives);
  const Eigen::Index n = anchors.cols();

  Eigen::MatrixXd first;   // anchor-side candidates
  Eigen::MatrixXd second;  // positive-side candidates
  NegativeSource first_source;
  NegativeSource second_source;
  if (mode == NegativeMode::kSameSide) {
    first = pairwise_distances(anchors, anchors, kind);
    second = pairwise_distances(positives, positives, kind);
    first_source = NegativeSource::kAnchorVsAnchor;
    second_source = NegativeSource::kPositiveVsPositive;
  } else {
    first = pairwise_distances(anchors, positives, kind);
    second = pairwise_distances(positives, anchors, kind);
    first_source = NegativeSource::kAnchorVsPositive;
    second_source = NegativeSource::kPositiveVsAnchor;
  }

  std::vector<HardNegative> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    HardNegative best{std::numeric_limits<double>::infinity(), first_source, 0};
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      if (first(i, j) < best.d_neg) best = {first(i, j), first_source, static_cast<std::size_t>(j)};
      if (second(i, j) < best.d_neg) best = {second(i, j), second_source, static_cast<std::size_t>(j)};
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

double triplet_loss(double d_pos, double d_neg, double margin) {
  return std::max(margin + d_pos * d_pos - d_neg * d_neg, 0.0);
}

std::vector<MinedTriplet> mine_triplets(const Eigen::Ref<const DescriptorBatch>& anchors,
                                        const Eigen::Ref<const DescriptorBatch>& positives,
                                        MetricKind kind, double margin, NegativeMode mode) {
  const auto negatives = hardest_negatives(anchors, positives, kind, mode);
  std::vector<MinedTriplet> mined(negatives.size());
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    auto& m = mined[i];
    m.pair_index = i;
    m.d_pos = unchecked_distance(anchors.col(ii), positives.col(ii), kind);
    m.d_neg = negatives[i].d_neg;
    m.neg_source = negatives[i].source;
    m.neg_pair_index = negatives[i].j;
    m.loss = triplet_loss(m.d_pos, m.d_neg, margin);
  }
  return mined;
}

TripletGrads loss_grads(const Eigen::Ref<const DescriptorBatch>& anchors,
                        const Eigen::Ref<const DescriptorBatch>& positives,
                        const std::vector<MinedTriplet>& mined,
                        const Eigen::Ref<const Eigen::VectorXd>& weights, MetricKind kind,
                        double margin) {
  if (anchors.cols() != positives.cols() || anchors.rows() != positives.rows()) {
    throw InvalidArgument("anchor and positive batches differ in shape");
  }
  const auto n = static_cast<std::size_t>(anchors.cols());
  if (weights.size() != static_cast<Eigen::Index>(mined.size())) {
    throw InvalidArgument("one weight per mined triplet is required");
  }

  TripletGrads out;
  out.anchors = DescriptorBatch::Zero(anchors.rows(), anchors.cols());
  out.positives = DescriptorBatch::Zero(positives.rows(), positives.cols());

  for (std::size_t t = 0; t < mined.size(); ++t) {
    const auto& m = mined[t];
    if (m.pair_index >= n || m.neg_pair_index >= n || m.neg_pair_index == m.pair_index) {
      throw InvalidArgument("mined triplet " + std::to_string(t) + " refers to pairs outside the batch");
    }
    const auto i = static_cast<Eigen::Index>(m.pair_index);
    const auto j = static_cast<Eigen::Index>(m.neg_pair_index);

    if (triplet_loss(m.d_pos, m.d_neg, margin) <= 0.0) continue;
    const double w = weights[static_cast<Eigen::Index>(t)];

    const auto pos = distance_grad(anchors.col(i), positives.col(i), kind);
    out.anchors.col(i) += w * 2.0 * m.d_pos * pos.grad_a;
    out.positives.col(i) += w * 2.0 * m.d_pos * pos.grad_b;
    out.saturated = out.saturated || pos.saturated;

    auto neg_target = [&](bool left) -> Eigen::Block<DescriptorBatch, Eigen::Dynamic, 1, true> {
      switch (m.neg_source) {
        case NegativeSource::kAnchorVsAnchor:
          return out.anchors.col(left ? i : j);
        case NegativeSource::kPositiveVsPositive:
          return out.positives.col(left ? i : j);
        case NegativeSource::kAnchorVsPositive:
          return left ? out.anchors.col(i) : out.positives.col(j);
        case NegativeSource::kPositiveVsAnchor:
          return left ? out.positives.col(i) : out.anchors.col(j);
      }
      throw InvalidArgument("unknown negative source");
    };
    auto neg_value = [&](bool left) -> Eigen::VectorXd {
      switch (m.neg_source) {
        case NegativeSource::kAnchorVsAnchor:
          return anchors.col(left ? i : j);
        case NegativeSource::kPositiveVsPositive:
          return positives.col(left ? i : j);
        case NegativeSource::kAnchorVsPositive:
          return left ? anchors.col(i) : positives.col(j);
        case NegativeSource::kPositiveVsAnchor:
          return left ? positives.col(i) : anchors.col(j);
      }
      throw InvalidArgument("unknown negative source");
    };

    const auto neg = distance_grad(neg_value(true), neg_value(false), kind);
    neg_target(true) -= w * 2.0 * m.d_neg * neg.grad_a;
    neg_target(false) -= w * 2.0 * m.d_neg * neg.grad_b;
    out.saturated = out.saturated || neg.saturated;
  }
  return out;
}

Eigen::VectorXd matching_term_grad(const Eigen::Ref<const Descriptor>& anchor,
                                   const Eigen::Ref<const Descriptor>& positive, MetricKind kind) {
  const double d = distance(anchor, positive, kind);
  return 2.0 * d * distance_grad(anchor, positive, kind).grad_b;
}

}  // namespace adasample
