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

// Verification and retrieval metrics, the distance-vs-informativeness probe,
// and the Mann-Whitney U test used for multi-seed comparisons.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "adasample/data.hpp"
#include "adasample/metricspace.hpp"
#include "adasample/miner.hpp"
#include "adasample/tensornet.hpp"

namespace adasample {

/// False positive rate at the smallest threshold that accepts at least
/// `recall` of the positives (distance <= threshold counts as accepted).
double fpr_at_recall(std::span<const double> pos_distances, std::span<const double> neg_distances,
                     double recall);

struct RetrievalResult {
  double map = 0.0;
  std::size_t evaluated_queries = 0;
  // Queries with no relevant gallery item; left out of the mean.
  std::size_t excluded_queries = 0;
};

/// Mean average precision of distance-ranked galleries. Ties in distance are
/// ranked by gallery index.
RetrievalResult retrieval_map(const Eigen::Ref<const DescriptorBatch>& queries,
                              const std::vector<std::uint32_t>& query_labels,
                              const Eigen::Ref<const DescriptorBatch>& gallery,
                              const std::vector<std::uint32_t>& gallery_labels, MetricKind kind);

/// Sample Pearson correlation. Throws DegenerateError when either input has
/// zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

struct MannWhitneyResult {
  double u = 0.0;        // pairs (a_i > b_j) + 0.5 * ties
  double p_value = 1.0;  // P(U <= u) under the null
  bool exact = false;
};

/// One-sided Mann-Whitney test of "a is stochastically smaller than b".
/// Exact null distribution (midranks, ties included) when the pooled size is
/// at most kExactLimit; otherwise a normal approximation with tie and
/// continuity corrections.
inline constexpr std::size_t kExactLimit = 20;
MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b);
MannWhitneyResult mann_whitney_u_normal(std::span<const double> a, std::span<const double> b);

/// Which gradient measures a candidate's informativeness.
enum class InfoMeasure {
  kFullParameter,  // norm of the full weight gradient through the candidate patch
  kOutputSpace,    // norm of dL/d(descriptor) at the candidate
};

/// Loss under which the probe differentiates.
enum class ProbeLoss {
  kTriplet,          // hinge triplet with the hardest negative in the probe batch
  kMatchingSquared,  // d(anchor, candidate)^2 alone
};

struct ProbeOptions {
  std::size_t num_classes = 32;
  MetricKind metric = MetricKind::kAngular;
  double margin = 1.0;
  NegativeMode neg_mode = NegativeMode::kSameSide;
  ProbeLoss loss = ProbeLoss::kTriplet;
  InfoMeasure measure = InfoMeasure::kFullParameter;
  // Exponent on distance for the distance-induced probabilities.
  double exponent = 1.0;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  // One entry per candidate positive, classes concatenated; each class block
  // sums to one.
  Eigen::VectorXd p_dist;
  Eigen::VectorXd p_info;
  Eigen::VectorXd distances;
  Eigen::VectorXd info;
  std::vector<std::uint32_t> class_ids;
  std::optional<double> pearson;  // empty when a side has zero variance
};

/// For each sampled class: a random anchor, then for every other member the
/// distance-induced probability and the gradient-norm-induced probability of
/// choosing it as the positive.
ProbeResult info_correlation_probe(const Dataset& dataset, const Params& params, const ProbeOptions& options);

struct EvalOptions {
  MetricKind metric = MetricKind::kAngular;
  std::size_t num_matching = 5000;
  std::size_t num_nonmatching = 5000;
  double recall = 0.95;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double fpr95 = 0.0;
  double retrieval_map = 0.0;
  std::optional<double> pearson_info_dist;
  std::size_t num_pairs = 0;
  std::size_t excluded_queries = 0;
};

/// Descriptors for every patch, in dataset order (class-major).
DescriptorBatch describe_dataset(const Params& params, const Dataset& dataset);

/// FPR at `recall` over sampled verification pairs, and retrieval mAP with the
/// first patch of each class as the query against every other patch.
EvalReport evaluate(const Params& params, const Dataset& dataset, const EvalOptions& options);

void write_report(std::ostream& out, const EvalReport& report);
void write_report_csv_header(std::ostream& out);
void write_report_csv_row(std::ostream& out, const EvalReport& report, const std::string& label);

}  // namespace adasample
