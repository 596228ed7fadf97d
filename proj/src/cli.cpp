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

#include "adasample/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "adasample/errors.hpp"
#include "adasample/eval.hpp"
#include "adasample/tensornet.hpp"
#include "adasample/trainer.hpp"

namespace adasample {

namespace fs = std::filesystem;

Strategy parse_strategy(std::string_view token) {
  std::string t(token);
  if (t == "hardest") return {"hardest", std::numeric_limits<double>::infinity(), true};
  if (t == "uniform") return {"uniform", 0.0, false};
  if (t.rfind("lambda=", 0) == 0) t = t.substr(7);
  std::size_t used = 0;
  double lambda = 0.0;
  try {
    lambda = std::stod(t, &used);
  } catch (const std::exception&) {
    throw InvalidArgument("unknown strategy '" + std::string(token) + "'");
  }
  if (used != t.size() || !(lambda >= 0.0)) throw InvalidArgument("unknown strategy '" + std::string(token) + "'");
  std::ostringstream name;
  name << "lambda=" << t;
  return {name.str(), lambda, true};
}

namespace {

std::vector<std::string> split_list(std::string_view list) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss{std::string(list)};
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::vector<Strategy> parse_strategies(std::string_view list) {
  std::vector<Strategy> out;
  for (const auto& item : split_list(list)) out.push_back(parse_strategy(item));
  return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view list) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(list)) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("bad seed '" + item + "'");
    }
    if (used != item.size()) throw InvalidArgument("bad seed '" + item + "'");
    out.push_back(v);
  }
  return out;
}

unsigned worker_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ADASAMPLE_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
  }
  return hw;
}

CompareResult compare_strategies(const RunConfig& base, const Dataset& train_set, const Dataset& test_set,
                                 const std::vector<Strategy>& strategies, const std::vector<std::uint64_t>& seeds,
                                 unsigned threads) {
  if (strategies.empty()) throw InvalidArgument("no strategies to compare");
  if (seeds.empty()) throw InvalidArgument("no seeds to compare");

  CompareResult result;
  for (std::size_t s = 0; s < strategies.size(); ++s)
    for (auto seed : seeds) result.cells.push_back({s, seed, false, 0.0, 0.0, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.cells.size(); i = next++) {
      CompareCell& cell = result.cells[i];
      try {
        TrainConfig tc = base.train;
        tc.seed = cell.seed;
        tc.sampler.lambda = strategies[cell.strategy].lambda;
        tc.sampler.reweight = strategies[cell.strategy].reweight;
        const TrainResult trained = train(tc, train_set);
        const EvalReport report = evaluate(trained.params, test_set, base.eval_options());
        cell.fpr95 = report.fpr95;
        cell.retrieval_map = report.retrieval_map;
        cell.ok = true;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(result.cells.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  for (std::size_t s = 0; s < strategies.size(); ++s) {
    StrategySummary summary;
    summary.name = strategies[s].name;
    for (const auto& cell : result.cells) {
      if (cell.strategy != s) continue;
      if (cell.ok) {
        summary.fpr95.push_back(cell.fpr95);
      } else {
        ++summary.failed;
        result.partial = true;
      }
    }
    const auto& v = summary.fpr95;
    if (!v.empty()) {
      summary.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - summary.mean) * (x - summary.mean);
      summary.stddev = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
    result.summaries.push_back(std::move(summary));
  }
  const auto& baseline = result.summaries.front();
  for (std::size_t s = 1; s < result.summaries.size(); ++s) {
    auto& summary = result.summaries[s];
    if (baseline.fpr95.empty() || summary.fpr95.empty()) continue;
    if (baseline.mean > 0.0) summary.rel_improvement = (baseline.mean - summary.mean) / baseline.mean;
    summary.p_value = mann_whitney_u(summary.fpr95, baseline.fpr95).p_value;
  }
  return result;
}

std::string format_compare_table(const CompareResult& result) {
  std::ostringstream out;
  out << std::left << std::setw(16) << "strategy" << std::setw(22) << "FPR95 (%)" << std::setw(10) << "Rel"
      << "p value\n";
  for (std::size_t s = 0; s < result.summaries.size(); ++s) {
    const auto& r = result.summaries[s];
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(3) << 100.0 * r.mean << "±" << 100.0 * r.stddev;
    std::ostringstream rel;
    std::ostringstream p;
    if (s == 0) {
      rel << "-";
      p << "-";
    } else {
      rel << std::fixed << std::setprecision(2) << 100.0 * r.rel_improvement << "%";
      if (r.p_value) {
        p << std::fixed << std::setprecision(3) << *r.p_value;
      } else {
        p << "n/a";
      }
    }
    // "±" is two bytes in UTF-8; pad by display width.
    out << std::setw(16) << r.name << cell.str() << std::string(cell.str().size() < 23 ? 23 - cell.str().size() : 1, ' ')
        << std::setw(10) << rel.str() << p.str();
    if (r.failed > 0) out << "  (" << r.failed << " failed)";
    out << '\n';
  }
  if (result.partial) out << "warning: partial table, some runs failed\n";
  return out.str();
}

void write_compare_csv(std::ostream& out, const CompareResult& result) {
  std::ostringstream s;
  s << std::setprecision(17) << "strategy,n_ok,n_failed,mean_fpr95,std_fpr95,rel_improvement,p_value\n";
  for (const auto& r : result.summaries) {
    s << r.name << ',' << r.fpr95.size() << ',' << r.failed << ',' << r.mean << ',' << r.stddev << ','
      << r.rel_improvement << ',';
    if (r.p_value) s << *r.p_value;
    s << '\n';
  }
  out << s.str();
}

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::string dataset_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
};

RunConfig resolve_config(const CommonOptions& o) {
  RunConfig config = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  if (o.seed) config.apply_seed(*o.seed);
  if (o.lambda) config.train.sampler.lambda = *o.lambda;
  config.validate();
  return config;
}

fs::path output_dir(const CommonOptions& o, const RunConfig& config) {
  fs::path dir = o.out_path.empty() ? fs::path(config.out_dir) : fs::path(o.out_path);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  return f;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing --") + what);
  if (!fs::exists(path)) throw std::runtime_error(std::string(what) + " file not found: " + path);
}

int cmd_gen_data(const CommonOptions& o, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  if (o.out_path.empty()) throw UsageError("gen-data needs --out PATH");
  const Dataset dataset = generate_synthetic(config.data);
  const fs::path path(o.out_path);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_dataset(dataset, path.string());
  out << "wrote " << path.string() << ": N=" << dataset.classes.size()
      << " k=" << (dataset.classes.empty() ? 0 : dataset.classes.front().patches.size())
      << " P=" << dataset.patch_size << " seed=" << config.data.seed << '\n';
  return 0;
}

int cmd_train(const CommonOptions& o, std::ostream& out, std::ostream& err) {
  const RunConfig config = resolve_config(o);
  require_file(o.dataset_path, "dataset");
  const Dataset dataset = read_dataset(o.dataset_path);
  const fs::path dir = output_dir(o, config);
  std::ofstream csv = open_out(dir / "metrics.csv");
  write_metrics_header(csv);
  csv.flush();
  try {
    const TrainResult result = train(config.train, dataset, [&csv](const EpochMetrics& row, const TrainState&) {
      write_metrics_row(csv, row);
      csv.flush();
    });
    save_params(result.params, (dir / "params.adnw").string());
    if (result.log.empty()) {
      out << "no epochs run; wrote initial params\n";
    } else {
      out << "final mean loss: " << std::setprecision(10) << result.log.back().mean_loss << '\n';
    }
  } catch (const NumericError& e) {
    err << "training aborted: " << e.what() << " (partial metrics kept in " << (dir / "metrics.csv").string()
        << ")\n";
    return 1;
  }
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& params_path, std::ostream& out) {
  const RunConfig config = resolve_config(o);
  require_file(params_path, "params");
  require_file(o.dataset_path, "dataset");
  const Params params = load_params(params_path, config.train.net.activation);
  const Dataset dataset = read_dataset(o.dataset_path);
  const EvalReport report = evaluate(params, dataset, config.eval_options());
  const fs::path dir = output_dir(o, config);
  {
    auto f = open_out(dir / "report.txt");
    write_report(f, report);
  }
  {
    auto f = open_out(dir / "report.csv");
    write_report_csv_header(f);
    write_report_csv_row(f, report, fs::path(params_path).stem().string());
  }
  out << "fpr95: " << std::setprecision(10) << report.fpr95 << '\n';
  return 0;
}

int cmd_diagnose(const CommonOptions& o, const std::string& params_path, std::ostream& out, std::ostream& err) {
  const RunConfig config = resolve_config(o);
  require_file(params_path, "params");
  require_file(o.dataset_path, "dataset");
  const Params params = load_params(params_path, config.train.net.activation);
  const Dataset dataset = read_dataset(o.dataset_path);
  const ProbeResult probe = info_correlation_probe(dataset, params, config.probe_options());
  const fs::path dir = output_dir(o, config);
  {
    auto f = open_out(dir / "probe.csv");
    std::ostringstream s;
    s << std::setprecision(17) << "class_id,distance,info,p_dist,p_info\n";
    for (Eigen::Index i = 0; i < probe.p_dist.size(); ++i) {
      s << probe.class_ids[static_cast<std::size_t>(i)] << ',' << probe.distances[i] << ',' << probe.info[i] << ','
        << probe.p_dist[i] << ',' << probe.p_info[i] << '\n';
    }
    f << s.str();
  }
  {
    auto f = open_out(dir / "probe.txt");
    f << std::setprecision(17);
    if (probe.pearson) {
      f << "pearson=" << *probe.pearson << '\n';
    } else {
      f << "pearson=undefined\n";
    }
    f << "rows=" << probe.p_dist.size() << '\n';
  }
  if (probe.pearson) {
    out << "pearson: " << std::setprecision(10) << *probe.pearson << '\n';
  } else {
    err << "warning: correlation undefined (a probability vector has zero variance)\n";
  }
  return 0;
}

int cmd_compare(const CommonOptions& o, const std::string& test_path, const std::string& strategies_arg,
                const std::string& seeds_arg, std::ostream& out, std::ostream& err) {
  const RunConfig config = resolve_config(o);
  require_file(o.dataset_path, "dataset");
  const auto strategies = parse_strategies(strategies_arg);
  const auto seeds = parse_seeds(seeds_arg);
  if (strategies.size() < 2) throw UsageError("compare needs at least two strategies");
  if (seeds.size() < 3) throw UsageError("compare needs at least three seeds");

  const Dataset full = read_dataset(o.dataset_path);
  Dataset train_set;
  Dataset test_set;
  if (test_path.empty()) {
    std::tie(train_set, test_set) = split_classes(full, config.eval.holdout_fraction);
  } else {
    require_file(test_path, "test-dataset");
    train_set = full;
    test_set = read_dataset(test_path);
  }

  const CompareResult result = compare_strategies(config, train_set, test_set, strategies, seeds, worker_threads());
  const fs::path dir = output_dir(o, config);
  {
    auto f = open_out(dir / "compare.csv");
    write_compare_csv(f, result);
  }
  {
    auto f = open_out(dir / "compare_runs.csv");
    std::ostringstream s;
    s << std::setprecision(17) << "strategy,seed,ok,fpr95,retrieval_map,error\n";
    for (const auto& c : result.cells) {
      s << strategies[c.strategy].name << ',' << c.seed << ',' << (c.ok ? 1 : 0) << ',' << c.fpr95 << ','
        << c.retrieval_map << ",\"" << c.error << "\"\n";
    }
    f << s.str();
  }
  out << format_compare_table(result);
  for (const auto& c : result.cells)
    if (!c.ok) err << strategies[c.strategy].name << " seed " << c.seed << " failed: " << c.error << '\n';
  return result.partial ? 1 : 0;
}

void add_common(CLI::App* cmd, CommonOptions& o, bool needs_dataset) {
  cmd->add_option("--config", o.config_path, "Run config (key=value)");
  if (needs_dataset) cmd->add_option("--dataset", o.dataset_path, "ADSP dataset file");
  cmd->add_option("--out", o.out_path, "Output path");
  cmd->add_option("--seed", o.seed, "Overrides the config seed");
  cmd->add_option("--lambda", o.lambda, "Overrides sampler.lambda");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive hard-positive sampling for descriptor learning"};
  app.require_subcommand(1);
  CommonOptions o;
  std::string params_path;
  std::string test_path;
  std::string strategies = "0,10";
  std::string seeds = "1,2,3,4,5";

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic ADSP dataset");
  add_common(gen, o, false);
  auto* tr = app.add_subcommand("train", "Train a descriptor network");
  add_common(tr, o, true);
  auto* ev = app.add_subcommand("evaluate", "FPR95 and retrieval mAP on a dataset");
  add_common(ev, o, true);
  ev->add_option("--params", params_path, "ADNW params file")->required();
  auto* dg = app.add_subcommand("diagnose", "Distance vs informativeness probe");
  add_common(dg, o, true);
  dg->add_option("--params", params_path, "ADNW params file")->required();
  auto* cmp = app.add_subcommand("compare", "Multi-seed strategy comparison");
  add_common(cmp, o, true);
  cmp->add_option("--test-dataset", test_path, "Held-out ADSP dataset (default: split off eval.holdout_fraction)");
  cmp->add_option("--strategies", strategies, "Comma list: lambda values, hardest, uniform");
  cmp->add_option("--seeds", seeds, "Comma list of training seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(o, out);
    if (tr->parsed()) return cmd_train(o, out, err);
    if (ev->parsed()) return cmd_evaluate(o, params_path, out);
    if (dg->parsed()) return cmd_diagnose(o, params_path, out, err);
    if (cmp->parsed()) return cmd_compare(o, test_path, strategies, seeds, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

}  // namespace adasample
