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

#include <cstring>
#include <sstream>

#include "adasample/errors.hpp"
#include "adasample/tensornet.hpp"
#include "oracles.hpp"

namespace {

using adasample::Activation;
using adasample::Gradient;
using adasample::Params;

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  auto rng = adasample::make_rng(seed, 99);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = adasample::standard_normal(rng);
  return m;
}

// A smooth nonlinear function of the descriptors, with its output gradient:
// L = sum_b u_b.y_b + 1/2 (v_b.y_b)^2.
struct ToyLoss {
  Eigen::MatrixXd u, v;
  double value(const Eigen::MatrixXd& y) const {
    double s = 0.0;
    for (Eigen::Index b = 0; b < y.cols(); ++b) {
      const double t = v.col(b).dot(y.col(b));
      s += u.col(b).dot(y.col(b)) + 0.5 * t * t;
    }
    return s;
  }
  Eigen::MatrixXd grad(const Eigen::MatrixXd& y) const {
    Eigen::MatrixXd g = u;
    for (Eigen::Index b = 0; b < y.cols(); ++b) g.col(b) += v.col(b).dot(y.col(b)) * v.col(b);
    return g;
  }
};

double relative_error(const Gradient& a, const Gradient& b) {
  Gradient diff = a;
  diff += (Gradient(b) *= -1.0);
  return diff.norm() / std::max({a.norm(), b.norm(), 1e-300});
}

TEST(InitParams, SameSeedIsBitwiseIdentical) {
  const auto a = adasample::init_params({4, 4}, 7);
  const auto b = adasample::init_params({4, 4}, 7);
  ASSERT_EQ(a.layers.size(), 1u);
  EXPECT_EQ(0, std::memcmp(a.layers[0].data(), b.layers[0].data(), sizeof(double) * 16));
}

TEST(InitParams, ShapesChain) {
  const auto p = adasample::init_params({8, 16, 32}, 3);
  ASSERT_EQ(p.depth(), 2u);
  EXPECT_EQ(p.layers[0].rows(), 16);
  EXPECT_EQ(p.layers[0].cols(), 8);
  EXPECT_EQ(p.layers[1].rows(), 32);
  EXPECT_EQ(p.layers[1].cols(), 16);
  EXPECT_NO_THROW(p.validate());
}

TEST(InitParams, EntryMeanWithinThreeSigma) {
  const auto p = adasample::init_params({64, 32}, 1);
  const auto& w = p.layers[0];
  const double n = static_cast<double>(w.size());
  const double sigma = std::sqrt(2.0 / 64.0) / std::sqrt(n);
  EXPECT_LT(std::abs(w.mean()), 3.0 * sigma);
  // The variance is the other half of the scheme: 2/fan_in within a loose band.
  const double var = (w.array() - w.mean()).square().sum() / (n - 1.0);
  EXPECT_NEAR(var, 2.0 / 64.0, 0.25 * 2.0 / 64.0);
}

TEST(InitParams, RejectsBadDims) {
  EXPECT_THROW(adasample::init_params({}, 1), adasample::InvalidArgument);
  EXPECT_THROW(adasample::init_params({5}, 1), adasample::InvalidArgument);
  EXPECT_THROW(adasample::init_params({5, 0}, 1), adasample::InvalidArgument);
  EXPECT_THROW(adasample::init_params({-1, 3}, 1), adasample::InvalidArgument);
}

TEST(Forward, IdentityLayerPassesUnitInputThrough) {
  Params p;
  p.layers.push_back(Eigen::MatrixXd::Identity(5, 5));
  auto rng = adasample::make_rng(3, 0);
  const Eigen::MatrixXd x = oracle::random_unit_batch(5, 4, rng);
  const auto out = adasample::forward(p, x);
  EXPECT_LT((out.descriptors - x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Forward, OutputsAreUnitAndPure) {
  for (auto act : {Activation::kTanh, Activation::kRelu}) {
    const auto p = adasample::init_params({10, 7, 6}, 11, act);
    const Eigen::MatrixXd x = random_matrix(10, 9, 5);
    const auto a = adasample::forward(p, x);
    const auto b = adasample::forward(p, x);
    for (Eigen::Index j = 0; j < 9; ++j) EXPECT_NEAR(a.descriptors.col(j).norm(), 1.0, 1e-6);
    EXPECT_TRUE(a.descriptors == b.descriptors);
    EXPECT_EQ(a.cache.depth(), 2u);
    EXPECT_EQ(a.cache.activations.size(), 2u);
  }
}

TEST(Forward, InvariantToPositiveScalingOfLastLayer) {
  auto p = adasample::init_params({6, 5, 4}, 2);
  const Eigen::MatrixXd x = random_matrix(6, 3, 8);
  const auto a = adasample::forward(p, x);
  p.layers.back() *= 3.7;
  const auto b = adasample::forward(p, x);
  EXPECT_LT((a.descriptors - b.descriptors).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Forward, Errors) {
  const auto p = adasample::init_params({6, 4}, 2);
  EXPECT_THROW(adasample::forward(p, Eigen::MatrixXd::Ones(5, 2)), adasample::InvalidArgument);
  EXPECT_THROW(adasample::forward(p, Eigen::MatrixXd::Zero(6, 2)), adasample::DegenerateError);
}

TEST(Backward, ZeroOutputGradsGiveZeros) {
  const auto p = adasample::init_params({6, 5, 4}, 2);
  const auto fw = adasample::forward(p, random_matrix(6, 3, 1));
  const auto back = adasample::backward(p, fw.cache, Eigen::MatrixXd::Zero(4, 3));
  EXPECT_EQ(back.param_grads.squared_norm(), 0.0);
  EXPECT_EQ(back.per_sample_norms.squaredNorm(), 0.0);
}

TEST(Backward, ShapeMismatchRejected) {
  const auto p = adasample::init_params({6, 5, 4}, 2);
  const auto fw = adasample::forward(p, random_matrix(6, 3, 1));
  EXPECT_THROW(adasample::backward(p, fw.cache, Eigen::MatrixXd::Zero(4, 2)), adasample::InvalidArgument);
  EXPECT_THROW(adasample::backward(p, fw.cache, Eigen::MatrixXd::Zero(3, 3)), adasample::InvalidArgument);
}

TEST(Backward, HomogeneousInOutputGrad) {
  const auto p = adasample::init_params({6, 5, 4}, 2);
  const auto fw = adasample::forward(p, random_matrix(6, 3, 1));
  const Eigen::MatrixXd g = random_matrix(4, 3, 4);
  const auto a = adasample::backward(p, fw.cache, g);
  const auto b = adasample::backward(p, fw.cache, (-2.5 * g).eval());
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(b.per_sample_norms[i], 2.5 * a.per_sample_norms[i], 1e-12);
}

class GradientCheck : public ::testing::TestWithParam<std::tuple<int, Activation, std::uint64_t>> {};

TEST_P(GradientCheck, MatchesCentralDifferences) {
  const auto [layers, act, seed] = GetParam();
  std::vector<Eigen::Index> dims = {5};
  for (int l = 0; l < layers; ++l) dims.push_back(4 + l);
  auto p = adasample::init_params(dims, seed, act);
  if (act == Activation::kRelu) {
    // Keep pre-activations away from the kink so central differences are valid.
    for (auto& w : p.layers) w.array() += 0.05;
  }
  const Eigen::MatrixXd x = random_matrix(5, 3, seed + 100);
  const Eigen::Index out_dim = dims.back();
  const ToyLoss toy{random_matrix(out_dim, 3, seed + 200), random_matrix(out_dim, 3, seed + 300)};

  const auto fw = adasample::forward(p, x);
  const auto back = adasample::backward(p, fw.cache, toy.grad(fw.descriptors));
  const auto fd = adasample::finite_diff_grad<double>(
      p, [&](const Params& q) { return toy.value(adasample::forward(q, x).descriptors); }, 1e-6);
  EXPECT_LT(relative_error(back.param_grads, fd), 1e-5);
}

INSTANTIATE_TEST_SUITE_P(Depths, GradientCheck,
                         ::testing::Combine(::testing::Values(1, 2, 3),
                                            ::testing::Values(Activation::kTanh, Activation::kRelu),
                                            ::testing::Values(1u, 2u, 3u)));

TEST(Backward, PerSampleNormEqualsSingleSampleRunExactly) {
  const auto p = adasample::init_params({7, 6, 5, 4}, 9);
  const Eigen::MatrixXd x = random_matrix(7, 6, 10);
  const Eigen::MatrixXd g = random_matrix(4, 6, 11);
  const auto batch = adasample::backward(p, adasample::forward(p, x).cache, g);
  Gradient summed = Gradient::zeros_like(p);
  for (Eigen::Index b = 0; b < 6; ++b) {
    const Eigen::MatrixXd xb = x.col(b);
    const auto fw = adasample::forward(p, xb);
    const auto single = adasample::backward(p, fw.cache, g.col(b).eval());
    EXPECT_EQ(batch.per_sample_norms[b], single.per_sample_norms[0]) << "sample " << b;
    // The reported norm is the norm of that sample's own gradient.
    EXPECT_NEAR(single.per_sample_norms[0], single.param_grads.norm(), 1e-12 * single.param_grads.norm());
    summed += single.param_grads;
  }
  Gradient diff = summed;
  diff += (Gradient(batch.param_grads) *= -1.0);
  EXPECT_LT(diff.norm(), 1e-12 * summed.norm());
}

TEST(Backward, SelectColumnsMatchesSubsetForward) {
  const auto p = adasample::init_params({7, 6, 4}, 9);
  const Eigen::MatrixXd x = random_matrix(7, 5, 10);
  const auto fw = adasample::forward(p, x);
  const auto sub = adasample::select_columns(fw.cache, {3, 1});
  Eigen::MatrixXd xs(7, 2);
  xs << x.col(3), x.col(1);
  const auto direct = adasample::forward(p, xs);
  EXPECT_TRUE(sub.outputs == direct.cache.outputs);
  EXPECT_THROW(adasample::select_columns(fw.cache, {5}), adasample::InvalidArgument);
}

TEST(Backward, NormIsZeroForGradAlongOutput) {
  // A gradient parallel to the output lies in the null space of the
  // normalization Jacobian, so no parameter moves.
  const auto p = adasample::init_params({5, 4}, 4);
  const auto fw = adasample::forward(p, random_matrix(5, 2, 3));
  const auto back = adasample::backward(p, fw.cache, (3.0 * fw.descriptors).eval());
  EXPECT_LT(back.per_sample_norms.maxCoeff(), 1e-14);
}

TEST(FiniteDiff, TrivialLosses) {
  const auto p = adasample::init_params({3, 4, 2}, 5);
  const auto half_sq = adasample::finite_diff_grad<double>(
      p, [](const Params& q) { return 0.5 * (q.layers[0].squaredNorm() + q.layers[1].squaredNorm()); }, 1e-4);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_LT((half_sq.layers[l] - p.layers[l]).cwiseAbs().maxCoeff(), 1e-8);
  const auto constant = adasample::finite_diff_grad<double>(p, [](const Params&) { return 4.0; }, 1e-4);
  EXPECT_EQ(constant.squared_norm(), 0.0);
  const auto sum = adasample::finite_diff_grad<double>(
      p, [](const Params& q) { return q.layers[0].sum() + q.layers[1].sum(); }, 1e-3);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_LT((sum.layers[l].array() - 1.0).abs().maxCoeff(), 1e-9);
}

TEST(FiniteDiff, Errors) {
  const auto p = adasample::init_params({3, 2}, 5);
  EXPECT_THROW(adasample::finite_diff_grad<double>(p, [](const Params&) { return 1.0; }, 0.0),
               adasample::InvalidArgument);
  EXPECT_THROW(adasample::finite_diff_grad<double>(
                   p, [](const Params&) { return std::numeric_limits<double>::quiet_NaN(); }, 1e-3),
               adasample::NumericError);
}

TEST(Templated, FloatScalarRuns) {
  const auto p = adasample::init_params<float>({6, 4}, 2);
  Eigen::MatrixXf x = Eigen::MatrixXf::Random(6, 3);
  const auto fw = adasample::forward(p, x);
  for (Eigen::Index j = 0; j < 3; ++j) EXPECT_NEAR(fw.descriptors.col(j).norm(), 1.0f, 1e-5f);
}

TEST(ParamsIo, RoundTripIsBitwise) {
  const auto p = adasample::init_params({5, 4, 3}, 8, Activation::kRelu);
  std::stringstream buf;
  adasample::write_params(p, buf);
  const auto q = adasample::read_params(buf, Activation::kRelu);
  ASSERT_EQ(q.depth(), 2u);
  EXPECT_EQ(q.activation, Activation::kRelu);
  for (std::size_t l = 0; l < 2; ++l) EXPECT_TRUE(p.layers[l] == q.layers[l]);
}

TEST(ParamsIo, HeaderLayoutAndRowMajorOrder) {
  Params p;
  p.layers.push_back((Eigen::MatrixXd(2, 3) << 1, 2, 3, 4, 5, 6).finished());
  std::stringstream buf;
  adasample::write_params(p, buf);
  const std::string bytes = buf.str();
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 2 * 4 + 6 * 8);
  EXPECT_EQ(bytes.substr(0, 4), "ADNW");
  double second;
  std::memcpy(&second, bytes.data() + 20 + 8, 8);
  EXPECT_EQ(second, 2.0);  // row-major: (0,1) follows (0,0)
}

TEST(ParamsIo, CorruptInputsRaiseFormatErrors) {
  const auto p = adasample::init_params({5, 4}, 8);
  std::stringstream buf;
  adasample::write_params(p, buf);
  const std::string good = buf.str();
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, good.size() - 1}) {
    std::stringstream in(good.substr(0, cut));
    EXPECT_THROW(adasample::read_params(in), adasample::FormatError) << "cut at " << cut;
  }
  std::string wrong = good;
  wrong[0] = 'X';
  std::stringstream in(wrong);
  try {
    adasample::read_params(in);
    FAIL() << "expected a format error";
  } catch (const adasample::FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("ADNW"), std::string::npos);
    EXPECT_EQ(e.offset(), 0u);
  }
  std::string version = good;
  version[4] = 9;
  std::stringstream vin(version);
  EXPECT_THROW(adasample::read_params(vin), adasample::FormatError);
  std::stringstream trailing(good + "x");
  EXPECT_THROW(adasample::read_params(trailing), adasample::FormatError);
}

TEST(ActivationNames, RoundTrip) {
  EXPECT_EQ(adasample::parse_activation("tanh"), Activation::kTanh);
  EXPECT_EQ(adasample::parse_activation(adasample::to_string(Activation::kRelu)), Activation::kRelu);
  EXPECT_THROW(adasample::parse_activation("sigmoid"), adasample::InvalidArgument);
}

}  // namespace
