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

#include "adasample/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include "adasample/errors.hpp"
#include "adasample/rng.hpp"
#include "adasample/sampler.hpp"

namespace adasample {

double fpr_at_recall(std::span<const double> pos_distances, std::span<const double> neg_distances,
                     double recall) {
  if (pos_distances.empty() || neg_distances.empty()) throw InvalidArgument("need positive and negative distances");
  if (!(recall > 0.0 && recall <= 1.0)) throw InvalidArgument("recall must lie in (0, 1]");
  std::vector<double> pos(pos_distances.begin(), pos_distances.end());
  std::sort(pos.begin(), pos.end());
  const double n = static_cast<double>(pos.size());
  // Guard against recall * n landing a hair above an integer.
  auto needed = static_cast<std::size_t>(std::ceil(recall * n - 1e-9));
  needed = std::clamp<std::size_t>(needed, 1, pos.size());
  const double threshold = pos[needed - 1];
  const auto false_pos =
      std::count_if(neg_distances.begin(), neg_distances.end(), [threshold](double d) { return d <= threshold; });
  return static_cast<double>(false_pos) / static_cast<double>(neg_distances.size());
}

RetrievalResult retrieval_map(const Eigen::Ref<const DescriptorBatch>& queries,
                              const std::vector<std::uint32_t>& query_labels,
                              const Eigen::Ref<const DescriptorBatch>& gallery,
                              const std::vector<std::uint32_t>& gallery_labels, MetricKind kind) {
  if (queries.cols() == 0 || gallery.cols() == 0) throw InvalidArgument("queries and gallery must be nonempty");
  if (static_cast<std::size_t>(queries.cols()) != query_labels.size() ||
      static_cast<std::size_t>(gallery.cols()) != gallery_labels.size()) {
    throw InvalidArgument("one label per descriptor is required");
  }
  const Eigen::MatrixXd dist = pairwise_distances(queries, gallery, kind);
  RetrievalResult result;
  double ap_sum = 0.0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(gallery.cols()));
  for (Eigen::Index q = 0; q < queries.cols(); ++q) {
    const auto label = query_labels[static_cast<std::size_t>(q)];
    const auto relevant = std::count(gallery_labels.begin(), gallery_labels.end(), label);
    if (relevant == 0) {
      ++result.excluded_queries;
      continue;
    }
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return dist(q, a) < dist(q, b); });
    double hits = 0.0;
    double precision_sum = 0.0;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      if (gallery_labels[static_cast<std::size_t>(order[rank])] == label) {
        hits += 1.0;
        precision_sum += hits / static_cast<double>(rank + 1);
      }
    }
    ap_sum += precision_sum / static_cast<double>(relevant);
    ++result.evaluated_queries;
  }
  if (result.evaluated_queries > 0) result.map = ap_sum / static_cast<double>(result.evaluated_queries);
  return result;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("pearson inputs differ in length");
  if (x.size() < 2) throw InvalidArgument("pearson needs at least two points");
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd xc = xv.array() - xv.mean();
  const Eigen::VectorXd yc = yv.array() - yv.mean();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  // Relative test: centered values that are pure rounding noise count as constant.
  const double xs = xv.squaredNorm();
  const double ys = yv.squaredNorm();
  if (!(sxx > 1e-28 * std::max(xs, 1e-300)) || !(syy > 1e-28 * std::max(ys, 1e-300))) {
    throw DegenerateError("correlation is undefined for a zero-variance input");
  }
  return std::clamp(xc.dot(yc) / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

struct Ranked {
  std::vector<double> midranks;  // pooled order, first |a| entries belong to a
  double tie_term = 0.0;         // sum over tie groups of t^3 - t
};

Ranked pooled_midranks(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size() + b.size();
  std::vector<double> values(a.begin(), a.end());
  values.insert(values.end(), b.begin(), b.end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  Ranked r;
  r.midranks.assign(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) r.midranks[order[k]] = mid;
    const double t = static_cast<double>(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  return r;
}

void check_samples(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("Mann-Whitney needs two nonempty samples");
  for (double v : a)
    if (!std::isfinite(v)) throw InvalidArgument("Mann-Whitney inputs must be finite");
  for (double v : b)
    if (!std::isfinite(v)) throw InvalidArgument("Mann-Whitney inputs must be finite");
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

MannWhitneyResult mann_whitney_u_normal(std::span<const double> a, std::span<const double> b) {
  check_samples(a, b);
  const Ranked ranked = pooled_midranks(a, b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double n = na + nb;
  const double rank_sum = std::accumulate(ranked.midranks.begin(), ranked.midranks.begin() + static_cast<std::ptrdiff_t>(a.size()), 0.0);
  MannWhitneyResult result;
  result.u = rank_sum - na * (na + 1.0) / 2.0;
  const double mean = na * nb / 2.0;
  const double var = na * nb / 12.0 * ((n + 1.0) - ranked.tie_term / (n * (n - 1.0)));
  if (!(var > 0.0)) {
    result.p_value = result.u <= mean ? 1.0 : 0.0;
    return result;
  }
  result.p_value = normal_cdf((result.u + 0.5 - mean) / std::sqrt(var));
  return result;
}

MannWhitneyResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  check_samples(a, b);
  const std::size_t n = a.size() + b.size();
  if (n > kExactLimit) return mann_whitney_u_normal(a, b);

  const Ranked ranked = pooled_midranks(a, b);
  // Doubled midranks are integers; count size-|a| subsets by doubled rank sum.
  std::vector<int> twice(n);
  for (std::size_t i = 0; i < n; ++i) twice[i] = static_cast<int>(std::lround(2.0 * ranked.midranks[i]));
  const int max_sum = std::accumulate(twice.begin(), twice.end(), 0);
  const std::size_t na = a.size();
  std::vector<std::vector<double>> ways(na + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t item = 0; item < n; ++item) {
    const int r = twice[item];
    for (std::size_t j = std::min(na, item + 1); j >= 1; --j) {
      for (int s = max_sum; s >= r; --s) ways[j][static_cast<std::size_t>(s)] += ways[j - 1][static_cast<std::size_t>(s - r)];
    }
  }
  int observed = 0;
  for (std::size_t i = 0; i < na; ++i) observed += twice[i];

  double total = 0.0;
  double at_or_below = 0.0;
  for (int s = 0; s <= max_sum; ++s) {
    total += ways[na][static_cast<std::size_t>(s)];
    if (s <= observed) at_or_below += ways[na][static_cast<std::size_t>(s)];
  }
  MannWhitneyResult result;
  const double na_d = static_cast<double>(na);
  result.u = observed / 2.0 - na_d * (na_d + 1.0) / 2.0;
  result.p_value = at_or_below / total;
  result.exact = true;
  return result;
}

ProbeResult info_correlation_probe(const Dataset& dataset, const Params& params, const ProbeOptions& options) {
  std::vector<std::size_t> eligible;
  for (std::size_t c = 0; c < dataset.classes.size(); ++c)
    if (dataset.classes[c].patches.size() >= 2) eligible.push_back(c);
  const std::size_t n = std::min(options.num_classes, eligible.size());
  if (n < 2) throw DatasetError("probe needs at least two classes with two or more patches");

  Rng rng = make_rng(options.seed, Stream::kEval);
  for (std::size_t i = 0; i < n; ++i) std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
  eligible.resize(n);

  std::vector<Eigen::Index> offsets;
  Eigen::Index total = 0;
  for (auto c : eligible) {
    offsets.push_back(total);
    total += static_cast<Eigen::Index>(dataset.classes[c].patches.size());
  }
  const Eigen::Index p2 = static_cast<Eigen::Index>(dataset.patch_size) * dataset.patch_size;
  Eigen::MatrixXd inputs(p2, total);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& patches = dataset.classes[eligible[s]].patches;
    for (std::size_t i = 0; i < patches.size(); ++i) inputs.col(offsets[s] + static_cast<Eigen::Index>(i)) = patch_input(patches[i]);
  }
  const auto fwd = forward(params, inputs);
  const auto& desc = fwd.descriptors;

  // Reference batch: one anchor and one positive per class.
  std::vector<Eigen::Index> anchor_cols(n);
  std::vector<Eigen::Index> positive_cols(n);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t k = dataset.classes[eligible[s]].patches.size();
    const std::size_t a = uniform_index(rng, k);
    std::size_t p = uniform_index(rng, k - 1);
    if (p >= a) ++p;
    anchor_cols[s] = offsets[s] + static_cast<Eigen::Index>(a);
    positive_cols[s] = offsets[s] + static_cast<Eigen::Index>(p);
  }
  DescriptorBatch anchors(desc.rows(), static_cast<Eigen::Index>(n));
  DescriptorBatch positives(desc.rows(), static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    anchors.col(static_cast<Eigen::Index>(s)) = desc.col(anchor_cols[s]);
    positives.col(static_cast<Eigen::Index>(s)) = desc.col(positive_cols[s]);
  }

  std::vector<double> p_dist;
  std::vector<double> p_info;
  std::vector<double> dist_all;
  std::vector<double> info_all;
  ProbeResult result;
  const Eigen::VectorXd unit_weight = Eigen::VectorXd::Ones(1);

  for (std::size_t s = 0; s < n; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const std::size_t k = dataset.classes[eligible[s]].patches.size();
    std::vector<double> d_block;
    std::vector<double> info_block;
    for (std::size_t i = 0; i < k; ++i) {
      const Eigen::Index cand_col = offsets[s] + static_cast<Eigen::Index>(i);
      if (cand_col == anchor_cols[s]) continue;
      DescriptorBatch trial = positives;
      trial.col(si) = desc.col(cand_col);
      const double d_pos = unchecked_distance(anchors.col(si), trial.col(si), options.metric);

      TripletGrads grads;
      if (options.loss == ProbeLoss::kTriplet) {
        const auto negatives = hardest_negatives(anchors, trial, options.metric, options.neg_mode);
        MinedTriplet m;
        m.pair_index = s;
        m.d_pos = d_pos;
        m.d_neg = negatives[s].d_neg;
        m.neg_source = negatives[s].source;
        m.neg_pair_index = negatives[s].j;
        m.loss = triplet_loss(m.d_pos, m.d_neg, options.margin);
        grads = loss_grads(anchors, trial, {m}, unit_weight, options.metric, options.margin);
      } else {
        grads.anchors = DescriptorBatch::Zero(anchors.rows(), anchors.cols());
        grads.positives = DescriptorBatch::Zero(anchors.rows(), anchors.cols());
        grads.positives.col(si) = 2.0 * d_pos * distance_grad(anchors.col(si), trial.col(si), options.metric).grad_b;
      }

      const Eigen::VectorXd cand_grad = grads.positives.col(si);
      double info = 0.0;
      if (options.measure == InfoMeasure::kOutputSpace) {
        info = cand_grad.norm();
      } else {
        const auto sub = select_columns(fwd.cache, std::vector<Eigen::Index>{cand_col});
        info = backward(params, sub, cand_grad).per_sample_norms[0];
      }
      d_block.push_back(d_pos);
      info_block.push_back(info);
      result.class_ids.push_back(dataset.classes[eligible[s]].class_id);
    }
    const Eigen::Map<const Eigen::VectorXd> dv(d_block.data(), static_cast<Eigen::Index>(d_block.size()));
    const Eigen::Map<const Eigen::VectorXd> iv(info_block.data(), static_cast<Eigen::Index>(info_block.size()));
    const Eigen::VectorXd pd = positive_probs(dv, options.exponent);
    const Eigen::VectorXd pi = positive_probs(iv, 1.0);
    p_dist.insert(p_dist.end(), pd.data(), pd.data() + pd.size());
    p_info.insert(p_info.end(), pi.data(), pi.data() + pi.size());
    dist_all.insert(dist_all.end(), d_block.begin(), d_block.end());
    info_all.insert(info_all.end(), info_block.begin(), info_block.end());
  }

  auto to_vec = [](const std::vector<double>& v) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  result.p_dist = to_vec(p_dist);
  result.p_info = to_vec(p_info);
  result.distances = to_vec(dist_all);
  result.info = to_vec(info_all);
  try {
    result.pearson = pearson(p_dist, p_info);
  } catch (const DegenerateError&) {
    result.pearson.reset();
  }
  return result;
}

DescriptorBatch describe_dataset(const Params& params, const Dataset& dataset) {
  const Eigen::Index p2 = static_cast<Eigen::Index>(dataset.patch_size) * dataset.patch_size;
  if (params.input_dim() != p2) {
    throw InvalidArgument("network expects inputs of size " + std::to_string(params.input_dim()) +
                          " but the dataset has " + std::to_string(dataset.patch_size) + "x" +
                          std::to_string(dataset.patch_size) + " patches");
  }
  Eigen::MatrixXd inputs(p2, static_cast<Eigen::Index>(dataset.num_patches()));
  Eigen::Index col = 0;
  for (const auto& group : dataset.classes)
    for (const auto& patch : group.patches) inputs.col(col++) = patch_input(patch);
  return forward(params, inputs).descriptors;
}

EvalReport evaluate(const Params& params, const Dataset& dataset, const EvalOptions& options) {
  const DescriptorBatch desc = describe_dataset(params, dataset);
  std::vector<Eigen::Index> class_offset;
  Eigen::Index total = 0;
  for (const auto& group : dataset.classes) {
    class_offset.push_back(total);
    total += static_cast<Eigen::Index>(group.patches.size());
  }
  auto col_of = [&](const PatchRef& r) { return class_offset[r.class_pos] + static_cast<Eigen::Index>(r.patch_pos); };

  Rng rng = make_rng(options.seed, Stream::kEval);
  const auto pairs = sample_verification_pairs(dataset, options.num_matching, options.num_nonmatching, rng);
  std::vector<double> pos;
  std::vector<double> neg;
  for (const auto& pair : pairs) {
    const double d = unchecked_distance(desc.col(col_of(pair.first)), desc.col(col_of(pair.second)), options.metric);
    (pair.matching ? pos : neg).push_back(d);
  }

  EvalReport report;
  report.num_pairs = pairs.size();
  report.fpr95 = fpr_at_recall(pos, neg, options.recall);

  std::vector<Eigen::Index> query_cols;
  std::vector<Eigen::Index> gallery_cols;
  std::vector<std::uint32_t> query_labels;
  std::vector<std::uint32_t> gallery_labels;
  for (std::size_t c = 0; c < dataset.classes.size(); ++c) {
    const auto& group = dataset.classes[c];
    for (std::size_t i = 0; i < group.patches.size(); ++i) {
      const Eigen::Index col = class_offset[c] + static_cast<Eigen::Index>(i);
      if (i == 0) {
        query_cols.push_back(col);
        query_labels.push_back(group.class_id);
      } else {
        gallery_cols.push_back(col);
        gallery_labels.push_back(group.class_id);
      }
    }
  }
  if (!gallery_cols.empty()) {
    DescriptorBatch queries(desc.rows(), static_cast<Eigen::Index>(query_cols.size()));
    DescriptorBatch gallery(desc.rows(), static_cast<Eigen::Index>(gallery_cols.size()));
    for (std::size_t i = 0; i < query_cols.size(); ++i) queries.col(static_cast<Eigen::Index>(i)) = desc.col(query_cols[i]);
    for (std::size_t i = 0; i < gallery_cols.size(); ++i) gallery.col(static_cast<Eigen::Index>(i)) = desc.col(gallery_cols[i]);
    const auto retrieval = retrieval_map(queries, query_labels, gallery, gallery_labels, options.metric);
    report.retrieval_map = retrieval.map;
    report.excluded_queries = retrieval.excluded_queries;
  }
  return report;
}

void write_report(std::ostream& out, const EvalReport& report) {
  std::ostringstream s;
  s << std::setprecision(17);
  s << "fpr95=" << report.fpr95 << '\n';
  s << "retrieval_map=" << report.retrieval_map << '\n';
  if (report.pearson_info_dist) s << "pearson_info_dist=" << *report.pearson_info_dist << '\n';
  s << "num_pairs=" << report.num_pairs << '\n';
  s << "excluded_queries=" << report.excluded_queries << '\n';
  out << s.str();
}

void write_report_csv_header(std::ostream& out) {
  out << "label,fpr95,retrieval_map,pearson_info_dist,num_pairs,excluded_queries\n";
}

void write_report_csv_row(std::ostream& out, const EvalReport& report, const std::string& label) {
  std::ostringstream s;
  s << std::setprecision(17) << label << ',' << report.fpr95 << ',' << report.retrieval_map << ',';
  if (report.pearson_info_dist) s << *report.pearson_info_dist;
  s << ',' << report.num_pairs << ',' << report.excluded_queries << '\n';
  out << s.str();
}

}  // namespace adasample
