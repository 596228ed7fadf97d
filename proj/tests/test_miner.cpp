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

#include <numbers>

#include "adasample/errors.hpp"
#include "adasample/miner.hpp"
#include "adasample/tensornet.hpp"
#include "oracles.hpp"

namespace {

using adasample::HardNegative;
using adasample::MetricKind;
using adasample::NegativeMode;
using adasample::NegativeSource;

TEST(HardestNegatives, TwoPairsByHand) {
  Eigen::MatrixXd a(2, 2), p(2, 2);
  const double t = 0.3;
  a << 1, std::cos(t), 0, std::sin(t);        // anchors 0.3 rad apart
  p << 0, std::cos(1.2), 1, std::sin(1.2);    // positives |pi/2 - 1.2| apart
  const auto neg = adasample::hardest_negatives(a, p, MetricKind::kAngular);
  ASSERT_EQ(neg.size(), 2u);
  EXPECT_NEAR(neg[0].d_neg, 0.3, 1e-12);
  EXPECT_EQ(neg[0].source, NegativeSource::kAnchorVsAnchor);
  EXPECT_EQ(neg[0].j, 1u);
  EXPECT_EQ(neg[1].j, 0u);
  const double pp = std::numbers::pi / 2 - 1.2;
  Eigen::MatrixXd a2 = a;
  a2.col(1) << std::cos(1.0), std::sin(1.0);
  const auto neg2 = adasample::hardest_negatives(a2, p, MetricKind::kAngular);
  EXPECT_NEAR(neg2[0].d_neg, std::min(1.0, pp), 1e-12);
  EXPECT_EQ(neg2[0].source, NegativeSource::kPositiveVsPositive);
}

TEST(HardestNegatives, MatchesEnumerationOnRandomBatches) {
  auto rng = adasample::make_rng(21, 0);
  for (int t = 0; t < 300; ++t) {
    const auto n = static_cast<Eigen::Index>(2 + adasample::uniform_index(rng, 15));
    const Eigen::MatrixXd a = oracle::random_unit_batch(4, n, rng);
    const Eigen::MatrixXd p = oracle::random_unit_batch(4, n, rng);
    for (auto kind : {MetricKind::kAngular, MetricKind::kEuclidean})
      for (auto mode : {NegativeMode::kSameSide, NegativeMode::kCross})
        EXPECT_EQ(adasample::hardest_negatives(a, p, kind, mode), oracle::hardest_negatives(a, p, kind, mode));
  }
}

TEST(HardestNegatives, TiesGoToLowestIndexThenAnchorSide) {
  // Duplicated descriptors create exact ties on both sides.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 4);
  a(0, 0) = 1;
  a(1, 1) = 1;
  a(1, 2) = 1;
  a(2, 3) = 1;
  const Eigen::MatrixXd p = a;
  const auto neg = adasample::hardest_negatives(a, p, MetricKind::kEuclidean);
  EXPECT_EQ(neg[0], (HardNegative{std::sqrt(2.0), NegativeSource::kAnchorVsAnchor, 1}));
  EXPECT_EQ(neg[1], (HardNegative{0.0, NegativeSource::kAnchorVsAnchor, 2}));
  EXPECT_EQ(neg[3], (HardNegative{std::sqrt(2.0), NegativeSource::kAnchorVsAnchor, 0}));
  EXPECT_EQ(neg, oracle::hardest_negatives(a, p, MetricKind::kEuclidean, NegativeMode::kSameSide));
}

TEST(HardestNegatives, OrthogonalAnchorsGiveRightAngles) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(6, 6);
  for (const auto& h : adasample::hardest_negatives(a, a, MetricKind::kAngular)) {
    EXPECT_NEAR(h.d_neg, std::numbers::pi / 2, 1e-15);
  }
}

TEST(HardestNegatives, Errors) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Identity(3, 1);
  EXPECT_THROW(adasample::hardest_negatives(one, one, MetricKind::kAngular), adasample::InvalidArgument);
  const Eigen::MatrixXd two = Eigen::MatrixXd::Identity(3, 2);
  const Eigen::MatrixXd three = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_THROW(adasample::hardest_negatives(two, three, MetricKind::kAngular), adasample::InvalidArgument);
}

TEST(TripletLoss, Examples) {
  EXPECT_EQ(adasample::triplet_loss(0.0, 1.0, 1.0), 0.0);
  EXPECT_EQ(adasample::triplet_loss(1.0, 1.0, 1.0), 1.0);
  EXPECT_EQ(adasample::triplet_loss(0.0, 2.0, 1.0), 0.0);
  auto rng = adasample::make_rng(22, 0);
  for (int t = 0; t < 1000; ++t) {
    EXPECT_GE(adasample::triplet_loss(4 * adasample::uniform01(rng), 4 * adasample::uniform01(rng),
                                      2 * adasample::uniform01(rng)),
              0.0);
  }
}

TEST(MineTriplets, FieldsAreConsistent) {
  auto rng = adasample::make_rng(23, 0);
  const Eigen::MatrixXd a = oracle::random_unit_batch(5, 7, rng);
  const Eigen::MatrixXd p = oracle::random_unit_batch(5, 7, rng);
  const auto mined = adasample::mine_triplets(a, p, MetricKind::kAngular, 1.0);
  for (std::size_t i = 0; i < mined.size(); ++i) {
    const auto& m = mined[i];
    EXPECT_EQ(m.pair_index, i);
    EXPECT_NE(m.neg_pair_index, i);
    EXPECT_EQ(m.d_pos, adasample::unchecked_distance(a.col(static_cast<Eigen::Index>(i)),
                                                     p.col(static_cast<Eigen::Index>(i)), MetricKind::kAngular));
    EXPECT_EQ(m.loss, adasample::triplet_loss(m.d_pos, m.d_neg, 1.0));
  }
}

double weighted_loss(const Eigen::MatrixXd& a, const Eigen::MatrixXd& p, const Eigen::VectorXd& w, MetricKind kind,
                     double margin, NegativeMode mode) {
  const auto mined = adasample::mine_triplets(a, p, kind, margin, mode);
  double s = 0.0;
  for (std::size_t i = 0; i < mined.size(); ++i) s += w[static_cast<Eigen::Index>(i)] * mined[i].loss;
  return s;
}

TEST(LossGrads, InactiveHingesGiveZero) {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(4, 4);
  const auto mined = adasample::mine_triplets(a, a, MetricKind::kEuclidean, 0.5);
  for (const auto& m : mined) ASSERT_EQ(m.loss, 0.0);
  const auto g = adasample::loss_grads(a, a, mined, Eigen::VectorXd::Ones(4), MetricKind::kEuclidean, 0.5);
  EXPECT_EQ(g.anchors.norm(), 0.0);
  EXPECT_EQ(g.positives.norm(), 0.0);
}

TEST(LossGrads, MatchesFiniteDifferencesInDescriptorSpace) {
  auto rng = adasample::make_rng(24, 0);
  int checked = 0;
  for (int t = 0; t < 60; ++t) {
    const auto n = static_cast<Eigen::Index>(2 + adasample::uniform_index(rng, 6));
    const Eigen::MatrixXd a = oracle::random_unit_batch(4, n, rng);
    const Eigen::MatrixXd p = oracle::random_unit_batch(4, n, rng);
    Eigen::VectorXd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = 0.5 + adasample::uniform01(rng);
    for (auto kind : {MetricKind::kAngular, MetricKind::kEuclidean}) {
      for (auto mode : {NegativeMode::kSameSide, NegativeMode::kCross}) {
        const double margin = 1.0;
        const auto mined = adasample::mine_triplets(a, p, kind, margin, mode);
        // Stay away from hinge kinks.
        bool near_kink = false;
        for (const auto& m : mined) near_kink |= std::abs(margin + m.d_pos * m.d_pos - m.d_neg * m.d_neg) < 1e-3;
        if (near_kink) continue;
        const auto g = adasample::loss_grads(a, p, mined, w, kind, margin);
        const double h = 1e-6;
        Eigen::MatrixXd fa(4, n), fp(4, n);
        for (Eigen::Index c = 0; c < n; ++c) {
          for (Eigen::Index r = 0; r < 4; ++r) {
            Eigen::MatrixXd ap = a, am = a, pp = p, pm = p;
            ap(r, c) += h;
            am(r, c) -= h;
            pp(r, c) += h;
            pm(r, c) -= h;
            fa(r, c) = (weighted_loss(ap, p, w, kind, margin, mode) - weighted_loss(am, p, w, kind, margin, mode)) / (2 * h);
            fp(r, c) = (weighted_loss(a, pp, w, kind, margin, mode) - weighted_loss(a, pm, w, kind, margin, mode)) / (2 * h);
          }
        }
        const double scale = std::max(1.0, fa.norm() + fp.norm());
        EXPECT_LT(((g.anchors - fa).norm() + (g.positives - fp).norm()) / scale, 1e-6);
        ++checked;
      }
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(LossGrads, RejectsStaleMinedStructure) {
  auto rng = adasample::make_rng(25, 0);
  const Eigen::MatrixXd a = oracle::random_unit_batch(4, 3, rng);
  auto mined = adasample::mine_triplets(a, a, MetricKind::kAngular, 1.0);
  mined[0].neg_pair_index = 7;
  EXPECT_THROW(adasample::loss_grads(a, a, mined, Eigen::VectorXd::Ones(3), MetricKind::kAngular, 1.0),
               adasample::InvalidArgument);
  mined = adasample::mine_triplets(a, a, MetricKind::kAngular, 1.0);
  EXPECT_THROW(adasample::loss_grads(a, a, mined, Eigen::VectorXd::Ones(2), MetricKind::kAngular, 1.0),
               adasample::InvalidArgument);
}

TEST(MatchingTerm, TwiceTheDistanceForEuclidean) {
  auto rng = adasample::make_rng(26, 0);
  for (int t = 0; t < 100; ++t) {
    const Eigen::MatrixXd m = oracle::random_unit_batch(8, 2, rng);
    const double d = adasample::distance(m.col(0), m.col(1), MetricKind::kEuclidean);
    EXPECT_NEAR(adasample::matching_term_grad(m.col(0), m.col(1), MetricKind::kEuclidean).norm(), 2.0 * d, 1e-10);
  }
}

// Through the network: loss of the mined batch as a function of the weights.
TEST(EndToEnd, NetworkPlusLossMatchesFiniteDifferences) {
  auto rng = adasample::make_rng(27, 0);
  int checked = 0;
  for (int layers = 1; layers <= 3; ++layers) {
    for (int t = 0; t < 4; ++t) {
      std::vector<Eigen::Index> dims = {6};
      for (int l = 0; l < layers; ++l) dims.push_back(5);
      const auto params = adasample::init_params(dims, static_cast<std::uint64_t>(10 * layers + t));
      const auto n = static_cast<Eigen::Index>(2 + t * 2);  // up to 8 pairs
      Eigen::MatrixXd x(6, 2 * n);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = adasample::standard_normal(rng);
      Eigen::VectorXd w(n);
      for (Eigen::Index i = 0; i < n; ++i) w[i] = 0.5 + adasample::uniform01(rng);
      for (auto kind : {MetricKind::kAngular, MetricKind::kEuclidean}) {
        auto total = [&](const adasample::Params& q) {
          const Eigen::MatrixXd y = adasample::forward(q, x).descriptors;
          return weighted_loss(y.leftCols(n), y.rightCols(n), w, kind, 1.0, NegativeMode::kSameSide);
        };
        const auto fw = adasample::forward(params, x);
        const Eigen::MatrixXd an = fw.descriptors.leftCols(n);
        const Eigen::MatrixXd po = fw.descriptors.rightCols(n);
        const auto mined = adasample::mine_triplets(an, po, kind, 1.0);
        const auto g = adasample::loss_grads(an, po, mined, w, kind, 1.0);
        Eigen::MatrixXd out(g.anchors.rows(), 2 * n);
        out << g.anchors, g.positives;
        const auto back = adasample::backward(params, fw.cache, out);
        const auto fd = adasample::finite_diff_grad<double>(params, total, 1e-6);
        adasample::Gradient diff = back.param_grads;
        diff += (adasample::Gradient(fd) *= -1.0);
        EXPECT_LT(diff.norm() / std::max(fd.norm(), 1e-12), 1e-5) << "layers " << layers << " n " << n;
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 24);
}

TEST(NegativeModeNames, RoundTrip) {
  EXPECT_EQ(adasample::parse_negative_mode("same_side"), NegativeMode::kSameSide);
  EXPECT_EQ(adasample::parse_negative_mode(adasample::to_string(NegativeMode::kCross)), NegativeMode::kCross);
  EXPECT_THROW(adasample::parse_negative_mode("semi_hard"), adasample::InvalidArgument);
}

}  // namespace
