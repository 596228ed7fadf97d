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

#include "adasample/metricspace.hpp"

namespace adasample {

std::string_view to_string(MetricKind kind) {
  return kind == MetricKind::kAngular ? "angular" : "euclidean";
}

MetricKind parse_metric(std::string_view name) {
  if (name == "angular") return MetricKind::kAngular;
  if (name == "euclidean") return MetricKind::kEuclidean;
  throw InvalidArgument("unknown metric '" + std::string(name) + "' (expected angular or euclidean)");
}

}  // namespace adasample
