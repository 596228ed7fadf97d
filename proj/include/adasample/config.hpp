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

// Run configuration: one flat key=value document with dotted namespaces
// (sampler.lambda=10). Lines starting with '#' are comments.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "adasample/data.hpp"
#include "adasample/eval.hpp"
#include "adasample/trainer.hpp"

namespace adasample {

struct EvalConfig {
  std::size_t num_matching = 5000;
  std::size_t num_nonmatching = 5000;
  double recall = 0.95;
  // Share of classes held out for evaluation when no separate test set is given.
  double holdout_fraction = 0.2;
  std::size_t probe_classes = 32;
  ProbeLoss probe_loss = ProbeLoss::kTriplet;
  InfoMeasure probe_measure = InfoMeasure::kFullParameter;
  double probe_exponent = 1.0;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  DatasetSpec data;
  TrainConfig train;
  EvalConfig eval;

  /// Copies the run seed into the data and training sections.
  void apply_seed(std::uint64_t s);
  void validate() const;

  EvalOptions eval_options() const;
  ProbeOptions probe_options() const;
};

/// Throws InvalidArgument naming the line for unknown keys and bad values.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);
/// Every key with its current value; parse_config(to_config_text(c)) == c.
std::string to_config_text(const RunConfig& config);

}  // namespace adasample
