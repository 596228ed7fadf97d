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

#include "adasample/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>

#include "adasample/errors.hpp"

namespace adasample {

namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("'" + v + "' is not a number");
  }
  if (used != v.size()) throw InvalidArgument("'" + v + "' is not a number");
  return out;
}

template <typename Int>
Int to_int(const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw InvalidArgument("'" + v + "' is not an integer");
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidArgument("'" + v + "' is not a boolean");
}

template <typename Int>
std::vector<Int> to_int_list(const std::string& v) {
  std::vector<Int> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int<Int>(trim(item)));
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string_view to_string(ProbeLoss loss) { return loss == ProbeLoss::kTriplet ? "triplet" : "matching_squared"; }
ProbeLoss parse_probe_loss(const std::string& v) {
  if (v == "triplet") return ProbeLoss::kTriplet;
  if (v == "matching_squared") return ProbeLoss::kMatchingSquared;
  throw InvalidArgument("unknown probe loss '" + v + "'");
}
std::string_view to_string(InfoMeasure m) {
  return m == InfoMeasure::kFullParameter ? "full_parameter" : "output_space";
}
InfoMeasure parse_measure(const std::string& v) {
  if (v == "full_parameter") return InfoMeasure::kFullParameter;
  if (v == "output_space") return InfoMeasure::kOutputSpace;
  throw InvalidArgument("unknown probe measure '" + v + "'");
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

std::map<std::string, Field> fields(RunConfig& c) {
  std::map<std::string, Field> f;
  auto num = [&f](const std::string& key, double& ref) {
    f[key] = {[&ref](const std::string& v) { ref = to_double(v); }, [&ref] { return fmt(ref); }};
  };
  auto integer = [&f](const std::string& key, int& ref) {
    f[key] = {[&ref](const std::string& v) { ref = to_int<int>(v); }, [&ref] { return std::to_string(ref); }};
  };
  auto size = [&f](const std::string& key, std::size_t& ref) {
    f[key] = {[&ref](const std::string& v) { ref = to_int<std::size_t>(v); }, [&ref] { return std::to_string(ref); }};
  };
  auto flag = [&f](const std::string& key, bool& ref) {
    f[key] = {[&ref](const std::string& v) { ref = to_bool(v); }, [&ref] { return std::string(ref ? "true" : "false"); }};
  };

  f["seed"] = {[&c](const std::string& v) { c.seed = to_int<std::uint64_t>(v); },
               [&c] { return std::to_string(c.seed); }};
  f["out_dir"] = {[&c](const std::string& v) { c.out_dir = v; }, [&c] { return c.out_dir; }};

  integer("data.num_classes", c.data.num_classes);
  integer("data.patches_per_class", c.data.patches_per_class);
  integer("data.patch_size", c.data.patch_size);
  integer("data.texture_octaves", c.data.texture_octaves);
  num("data.warp_magnitude", c.data.warp_magnitude);
  num("data.noise_sigma", c.data.noise_sigma);
  num("data.brightness_jitter", c.data.brightness_jitter);
  num("data.occlusion_prob", c.data.occlusion_prob);
  integer("data.positive_target_k", c.data.positive_target_k);
  num("data.positive_rotation_deg", c.data.positive_rotation_deg);

  f["net.hidden"] = {[&c](const std::string& v) { c.train.net.hidden = to_int_list<Eigen::Index>(v); },
                     [&c] { return join(c.train.net.hidden); }};
  f["net.descriptor_dim"] = {[&c](const std::string& v) { c.train.net.descriptor_dim = to_int<Eigen::Index>(v); },
                             [&c] { return std::to_string(c.train.net.descriptor_dim); }};
  f["net.activation"] = {[&c](const std::string& v) { c.train.net.activation = parse_activation(v); },
                         [&c] { return std::string(to_string(c.train.net.activation)); }};

  integer("train.batch_size", c.train.batch_size);
  num("train.margin", c.train.margin);
  f["train.metric"] = {[&c](const std::string& v) { c.train.metric = parse_metric(v); },
                       [&c] { return std::string(to_string(c.train.metric)); }};
  num("train.lr", c.train.lr);
  num("train.momentum", c.train.momentum);
  num("train.weight_decay", c.train.weight_decay);
  integer("train.epochs", c.train.epochs);
  f["train.lr_drop_epochs"] = {[&c](const std::string& v) { c.train.lr_drop_epochs = to_int_list<int>(v); },
                               [&c] { return join(c.train.lr_drop_epochs); }};
  integer("train.pairs_per_epoch", c.train.pairs_per_epoch);
  f["train.neg_mode"] = {[&c](const std::string& v) { c.train.neg_mode = parse_negative_mode(v); },
                         [&c] { return std::string(to_string(c.train.neg_mode)); }};
  flag("train.augment", c.train.augment);

  num("sampler.lambda", c.train.sampler.lambda);
  num("sampler.ema_decay", c.train.sampler.ema_decay);
  num("sampler.exponent_cap", c.train.sampler.exponent_cap);
  num("sampler.loss_floor", c.train.sampler.loss_floor);
  flag("sampler.reweight", c.train.sampler.reweight);

  size("eval.num_matching", c.eval.num_matching);
  size("eval.num_nonmatching", c.eval.num_nonmatching);
  num("eval.recall", c.eval.recall);
  num("eval.holdout_fraction", c.eval.holdout_fraction);
  size("eval.probe_classes", c.eval.probe_classes);
  f["eval.probe_loss"] = {[&c](const std::string& v) { c.eval.probe_loss = parse_probe_loss(v); },
                          [&c] { return std::string(to_string(c.eval.probe_loss)); }};
  f["eval.probe_measure"] = {[&c](const std::string& v) { c.eval.probe_measure = parse_measure(v); },
                             [&c] { return std::string(to_string(c.eval.probe_measure)); }};
  num("eval.probe_exponent", c.eval.probe_exponent);
  return f;
}

}  // namespace

void RunConfig::apply_seed(std::uint64_t s) {
  seed = s;
  data.seed = s;
  train.seed = s;
}

void RunConfig::validate() const {
  data.validate();
  train.validate();
  if (eval.num_matching == 0 || eval.num_nonmatching == 0) throw InvalidArgument("eval pair counts must be positive");
  if (!(eval.recall > 0.0 && eval.recall <= 1.0)) throw InvalidArgument("eval.recall must lie in (0, 1]");
  if (!(eval.holdout_fraction > 0.0 && eval.holdout_fraction < 1.0)) {
    throw InvalidArgument("eval.holdout_fraction must lie in (0, 1)");
  }
  if (eval.probe_classes < 2) throw InvalidArgument("eval.probe_classes must be at least 2");
  if (!(eval.probe_exponent >= 0.0) || !std::isfinite(eval.probe_exponent)) {
    throw InvalidArgument("eval.probe_exponent must be finite and nonnegative");
  }
}

EvalOptions RunConfig::eval_options() const {
  EvalOptions o;
  o.metric = train.metric;
  o.num_matching = eval.num_matching;
  o.num_nonmatching = eval.num_nonmatching;
  o.recall = eval.recall;
  o.seed = seed;
  return o;
}

ProbeOptions RunConfig::probe_options() const {
  ProbeOptions o;
  o.num_classes = eval.probe_classes;
  o.metric = train.metric;
  o.margin = train.margin;
  o.neg_mode = train.neg_mode;
  o.loss = eval.probe_loss;
  o.measure = eval.probe_measure;
  o.exponent = eval.probe_exponent;
  o.seed = seed;
  return o;
}

RunConfig parse_config(std::string_view text) {
  RunConfig config;
  auto table = fields(config);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  bool seed_set = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    const auto it = table.find(key);
    if (it == table.end()) {
      throw InvalidArgument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    try {
      it->second.set(value);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument("config line " + std::to_string(line_no) + " (" + key + "): " + e.what());
    }
    if (key == "seed") seed_set = true;
  }
  if (seed_set) config.apply_seed(config.seed);
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string to_config_text(const RunConfig& config) {
  RunConfig copy = config;
  const auto table = fields(copy);
  std::string out;
  for (const auto& [key, field] : table) out += key + "=" + field.get() + "\n";
  return out;
}

}  // namespace adasample
