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

// Distances between unit descriptors and their gradients.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "adasample/errors.hpp"

namespace adasample {

enum class MetricKind { kEuclidean, kAngular };

std::string_view to_string(MetricKind kind);
MetricKind parse_metric(std::string_view name);

/// Descriptors are unit-norm columns.
using Descriptor = Eigen::VectorXd;
using DescriptorBatch = Eigen::MatrixXd;

/// Angular gradients are evaluated no closer than this to s = +-1.
inline constexpr double kAngularClamp = 1e-9;
/// Tolerated deviation from unit norm before a descriptor is rejected.
inline constexpr double kUnitTolerance = 1e-3;

template <typename Derived>
void require_unit(const Eigen::MatrixBase<Derived>& v, const char* name) {
  const auto n = v.norm();
  if (!(std::abs(n - 1.0) <= kUnitTolerance)) {
    throw InvalidArgument(std::string(name) + " is not unit-norm (norm " + std::to_string(n) + ")");
  }
}

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar unchecked_distance(const Eigen::MatrixBase<DerivedA>& a,
                                             const Eigen::MatrixBase<DerivedB>& b, MetricKind kind) {
  using Scalar = typename DerivedA::Scalar;
  switch (kind) {
    case MetricKind::kEuclidean:
      return (a - b).norm();
    case MetricKind::kAngular:
      return std::acos(std::clamp<Scalar>(a.dot(b), Scalar(-1), Scalar(1)));
  }
  throw InvalidArgument("unknown metric");
}

/// Euclidean result in [0, 2], angular (arccos of the clamped dot) in [0, pi].
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar distance(const Eigen::MatrixBase<DerivedA>& a,
                                   const Eigen::MatrixBase<DerivedB>& b, MetricKind kind) {
  if (a.size() != b.size()) throw InvalidArgument("descriptor dimensions differ");
  require_unit(a, "first descriptor");
  require_unit(b, "second descriptor");
  return unchecked_distance(a, b, kind);
}

struct DistanceGrad {
  Eigen::VectorXd grad_a;
  Eigen::VectorXd grad_b;
  // Angular: dot product was within kAngularClamp of +-1. Euclidean: a == b.
  bool saturated = false;
};

/// Ambient-space gradient of distance(a, b) with respect to each argument.
template <typename DerivedA, typename DerivedB>
DistanceGrad distance_grad(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
                           MetricKind kind) {
  if (a.size() != b.size()) throw InvalidArgument("descriptor dimensions differ");
  require_unit(a, "first descriptor");
  require_unit(b, "second descriptor");
  DistanceGrad out;
  switch (kind) {
    case MetricKind::kEuclidean: {
      Eigen::VectorXd diff = a - b;
      const double d = diff.norm();
      if (d == 0.0) {
        out.grad_a = Eigen::VectorXd::Zero(a.size());
        out.grad_b = Eigen::VectorXd::Zero(a.size());
        out.saturated = true;
        return out;
      }
      out.grad_a = diff / d;
      out.grad_b = -out.grad_a;
      return out;
    }
    case MetricKind::kAngular: {
      double s = a.dot(b);
      const double limit = 1.0 - kAngularClamp;
      if (std::abs(s) >= limit) {
        s = std::copysign(limit, s);
        out.saturated = true;
      }
      const double factor = -1.0 / std::sqrt(1.0 - s * s);
      out.grad_a = factor * b;
      out.grad_b = factor * a;
      return out;
    }
  }
  throw InvalidArgument("unknown metric");
}

/// Entry (i, j) is distance(a.col(i), b.col(j)).
template <typename DerivedA, typename DerivedB>
Eigen::MatrixXd pairwise_distances(const Eigen::MatrixBase<DerivedA>& batch_a,
                                   const Eigen::MatrixBase<DerivedB>& batch_b, MetricKind kind) {
  if (batch_a.rows() != batch_b.rows()) {
    throw InvalidArgument("descriptor dimensions differ: " + std::to_string(batch_a.rows()) + " vs " +
                          std::to_string(batch_b.rows()));
  }
  for (Eigen::Index i = 0; i < batch_a.cols(); ++i) require_unit(batch_a.col(i), "descriptor");
  for (Eigen::Index j = 0; j < batch_b.cols(); ++j) require_unit(batch_b.col(j), "descriptor");
  Eigen::MatrixXd out(batch_a.cols(), batch_b.cols());
  for (Eigen::Index i = 0; i < batch_a.cols(); ++i)
    for (Eigen::Index j = 0; j < batch_b.cols(); ++j)
      out(i, j) = unchecked_distance(batch_a.col(i), batch_b.col(j), kind);
  return out;
}

}  // namespace adasample
