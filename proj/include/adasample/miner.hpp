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

// Hardest-in-batch negative mining and the hinge triplet loss.

#include <cstddef>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "adasample/metricspace.hpp"

namespace adasample {

/// Which descriptor pair produced the hardest negative for pair i.
enum class NegativeSource {
  kAnchorVsAnchor,      // d(a_i, a_j)
  kPositiveVsPositive,  // d(p_i, p_j)
  kAnchorVsPositive,    // d(a_i, p_j), cross mode only
  kPositiveVsAnchor,    // d(p_i, a_j), cross mode only
};

/// Candidate set for the negative search.
///   kSameSide: min over j != i of d(a_i, a_j) and d(p_i, p_j).
///   kCross:    min over j != i of d(a_i, p_j) and d(p_i, a_j).
enum class NegativeMode { kSameSide, kCross };

std::string_view to_string(NegativeSource source);
std::string_view to_string(NegativeMode mode);
NegativeMode parse_negative_mode(std::string_view name);

struct HardNegative {
  double d_neg = 0.0;
  NegativeSource source = NegativeSource::kAnchorVsAnchor;
  std::size_t j = 0;

  bool operator==(const HardNegative&) const = default;
};

struct MinedTriplet {
  std::size_t pair_index = 0;
  double d_pos = 0.0;
  double d_neg = 0.0;
  NegativeSource neg_source = NegativeSource::kAnchorVsAnchor;
  std::size_t neg_pair_index = 0;
  double loss = 0.0;
};

/// Per pair, the closest non-matching descriptor. Scans j in increasing order
/// with the anchor-side candidate first; only a strictly smaller distance
/// replaces the incumbent.
std::vector<HardNegative> hardest_negatives(const Eigen::Ref<const DescriptorBatch>& anchors,
                                            const Eigen::Ref<const DescriptorBatch>& positives,
                                            MetricKind kind,
                                            NegativeMode mode = NegativeMode::kSameSide);

/// max(t + d_pos^2 - d_neg^2, 0).
double triplet_loss(double d_pos, double d_neg, double margin);

/// Matching distances, hardest negatives and losses for a whole batch.
std::vector<MinedTriplet> mine_triplets(const Eigen::Ref<const DescriptorBatch>& anchors,
                                        const Eigen::Ref<const DescriptorBatch>& positives,
                                        MetricKind kind, double margin,
                                        NegativeMode mode = NegativeMode::kSameSide);

struct TripletGrads {
  DescriptorBatch anchors;
  DescriptorBatch positives;
  // Some distance gradient was evaluated at the angular clamp.
  bool saturated = false;
};

/// Gradient of sum_i w_i L_i with respect to every anchor and positive
/// descriptor. Inactive hinges (L_i == 0) contribute nothing.
TripletGrads loss_grads(const Eigen::Ref<const DescriptorBatch>& anchors,
                        const Eigen::Ref<const DescriptorBatch>& positives,
                        const std::vector<MinedTriplet>& mined,
                        const Eigen::Ref<const Eigen::VectorXd>& weights, MetricKind kind,
                        double margin);

/// Gradient of d(anchor, positive)^2 with respect to the positive.
Eigen::VectorXd matching_term_grad(const Eigen::Ref<const Descriptor>& anchor,
                                   const Eigen::Ref<const Descriptor>& positive, MetricKind kind);

}  // namespace adasample
