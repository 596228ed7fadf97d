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

// Command-line front end and the multi-seed strategy comparison it drives.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adasample/config.hpp"
#include "adasample/data.hpp"

namespace adasample {

/// A sampling strategy to compare. Spelled on the command line as a lambda
/// value ("10", "lambda=10"), "hardest" (exponent pinned at the cap) or
/// "uniform" (uniform positives, no reweighting).
struct Strategy {
  std::string name;
  double lambda = 0.0;
  bool reweight = true;
};

Strategy parse_strategy(std::string_view token);
std::vector<Strategy> parse_strategies(std::string_view list);
std::vector<std::uint64_t> parse_seeds(std::string_view list);

struct CompareCell {
  std::size_t strategy = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double fpr95 = 0.0;
  double retrieval_map = 0.0;
  std::string error;
};

struct StrategySummary {
  std::string name;
  std::vector<double> fpr95;  // successful seeds only
  double mean = 0.0;
  double stddev = 0.0;        // sample standard deviation
  // Against the first strategy: (mean_base - mean) / mean_base.
  double rel_improvement = 0.0;
  // One-sided Mann-Whitney p for "this strategy has lower FPR than the first".
  std::optional<double> p_value;
  std::size_t failed = 0;
};

struct CompareResult {
  std::vector<CompareCell> cells;
  std::vector<StrategySummary> summaries;
  bool partial = false;
};

/// Worker count from ADASAMPLE_THREADS, else the hardware concurrency.
unsigned worker_threads();

/// Trains every (strategy, seed) cell on `train_set` and evaluates FPR95 on
/// `test_set`. Cells are independent and may run concurrently; the
/// aggregation is sequential and ordered.
CompareResult compare_strategies(const RunConfig& base, const Dataset& train_set, const Dataset& test_set,
                                 const std::vector<Strategy>& strategies, const std::vector<std::uint64_t>& seeds,
                                 unsigned threads = 1);

/// "mean±std" rows in percent, relative improvement and p-value.
std::string format_compare_table(const CompareResult& result);
void write_compare_csv(std::ostream& out, const CompareResult& result);

/// Entry point. Returns the process exit code: 0 success, 1 runtime or
/// numeric failure, 2 usage or configuration error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace adasample
