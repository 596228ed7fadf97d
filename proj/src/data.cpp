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

#include "adasample/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>

#include "adasample/errors.hpp"
#include "binary_io.hpp"

namespace adasample {

std::size_t Dataset::num_patches() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.patches.size();
  return n;
}

void DatasetSpec::validate() const {
  if (num_classes < 2) throw InvalidArgument("data.num_classes must be at least 2");
  if (patches_per_class < 2) throw InvalidArgument("data.patches_per_class must be at least 2");
  if (patch_size < 4) throw InvalidArgument("data.patch_size must be at least 4");
  if (texture_octaves < 1 || texture_octaves > 8) throw InvalidArgument("data.texture_octaves must be in [1, 8]");
  if (!(warp_magnitude >= 0.0) || !std::isfinite(warp_magnitude)) {
    throw InvalidArgument("data.warp_magnitude must be finite and nonnegative");
  }
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw InvalidArgument("data.noise_sigma must be finite and nonnegative");
  }
  if (!(brightness_jitter >= 0.0) || !std::isfinite(brightness_jitter)) {
    throw InvalidArgument("data.brightness_jitter must be finite and nonnegative");
  }
  if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0)) {
    throw InvalidArgument("data.occlusion_prob must lie in [0, 1]");
  }
  if (positive_target_k < 0) throw InvalidArgument("data.positive_target_k must be nonnegative");
  if (!(positive_rotation_deg >= 0.0 && positive_rotation_deg <= 180.0)) {
    throw InvalidArgument("data.positive_rotation_deg must lie in [0, 180]");
  }
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kWavesPerOctave = 4;
constexpr double kBaseFrequency = 1.5;  // cycles per patch width

struct Wave {
  double kx, ky, phase, amplitude;
};

// Band-limited texture on the continuous square [-0.5, 0.5]^2 (and beyond).
class Texture {
 public:
  Texture(int octaves, Rng& rng) {
    double power = 0.0;
    for (int o = 0; o < octaves; ++o) {
      const double freq = kBaseFrequency * std::pow(2.0, o);
      for (int m = 0; m < kWavesPerOctave; ++m) {
        const double dir = 2.0 * kPi * uniform01(rng);
        Wave w;
        w.kx = 2.0 * kPi * freq * std::cos(dir);
        w.ky = 2.0 * kPi * freq * std::sin(dir);
        w.phase = 2.0 * kPi * uniform01(rng);
        w.amplitude = std::pow(0.6, o) * (0.5 + uniform01(rng));
        power += 0.5 * w.amplitude * w.amplitude;
        waves_.push_back(w);
      }
    }
    const double scale = 1.0 / std::sqrt(power);
    for (auto& w : waves_) w.amplitude *= scale;
  }

  double operator()(double u, double v) const {
    double s = 0.0;
    for (const auto& w : waves_) s += w.amplitude * std::cos(w.kx * u + w.ky * v + w.phase);
    return s;
  }

 private:
  std::vector<Wave> waves_;
};

struct Occluder {
  bool active = false;
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;
  std::optional<Texture> clutter;

  bool covers(int r, int c) const { return active && r >= r0 && r < r1 && c >= c0 && c < c1; }
};

// With probability `prob`, a view gets a rectangle (40-70% of each side) of
// unrelated texture pasted over it. Nothing is drawn from the stream when the
// probability is zero, so occlusion-free datasets are unaffected.
Occluder draw_occluder(double prob, int size, int octaves, Rng& rng) {
  Occluder occ;
  if (prob <= 0.0 || uniform01(rng) >= prob) return occ;
  occ.active = true;
  const int h = std::max(1, static_cast<int>(std::lround(size * (0.4 + 0.3 * uniform01(rng)))));
  const int w = std::max(1, static_cast<int>(std::lround(size * (0.4 + 0.3 * uniform01(rng)))));
  occ.r0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(size - h + 1)));
  occ.c0 = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(size - w + 1)));
  occ.r1 = occ.r0 + h;
  occ.c1 = occ.c0 + w;
  occ.clutter.emplace(octaves, rng);
  return occ;
}

Eigen::MatrixXd render_view(const Texture& texture, const DatasetSpec& recipe, Rng& rng) {
  const int size = recipe.patch_size;
  const double warp = recipe.warp_magnitude;
  const double noise_sigma = recipe.noise_sigma;
  const double jitter = recipe.brightness_jitter;
  // Per-view strength is half-normal, so a class mixes easy and hard views.
  const double strength = warp * std::abs(standard_normal(rng));
  const double angle = 0.4 * strength * standard_normal(rng);
  const double log_sx = 0.12 * strength * standard_normal(rng);
  const double log_sy = 0.12 * strength * standard_normal(rng);
  const double shear = 0.1 * strength * standard_normal(rng);
  const double tx = 0.06 * strength * standard_normal(rng);
  const double ty = 0.06 * strength * standard_normal(rng);

  const double gain = std::exp(jitter * standard_normal(rng));
  const double offset = jitter * standard_normal(rng);
  const double ramp_x = jitter * standard_normal(rng);
  const double ramp_y = jitter * standard_normal(rng);

  Eigen::Matrix2d rotation;
  rotation << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  Eigen::Matrix2d stretch;
  stretch << std::exp(log_sx), shear, 0.0, std::exp(log_sy);
  const Eigen::Matrix2d a = rotation * stretch;

  const Occluder occluder = draw_occluder(recipe.occlusion_prob, size, recipe.texture_octaves, rng);

  Eigen::MatrixXd pixels(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double u = (c + 0.5) / size - 0.5;
      const double v = (r + 0.5) / size - 0.5;
      const Eigen::Vector2d p = a * Eigen::Vector2d(u, v) + Eigen::Vector2d(tx, ty);
      const double base = occluder.covers(r, c) ? (*occluder.clutter)(p.x(), p.y()) : texture(p.x(), p.y());
      double value = gain * base + offset + ramp_x * u + ramp_y * v;
      if (noise_sigma > 0.0) value += noise_sigma * standard_normal(rng);
      pixels(r, c) = static_cast<double>(static_cast<float>(value));
    }
  }
  return pixels;
}

double reflect(double x, int size) {
  const double hi = size - 1;
  if (hi <= 0.0) return 0.0;
  const double period = 2.0 * hi;
  x = std::fmod(std::abs(x), period);
  return x > hi ? period - x : x;
}

}  // namespace

Dataset generate_synthetic(const DatasetSpec& recipe) {
  recipe.validate();
  Dataset dataset;
  dataset.patch_size = recipe.patch_size;
  dataset.classes.reserve(static_cast<std::size_t>(recipe.num_classes));
  for (int c = 0; c < recipe.num_classes; ++c) {
    // Per-class substream: classes can be generated independently.
    Rng rng = make_rng(recipe.seed, (static_cast<std::uint64_t>(Stream::kData) << 32) | static_cast<std::uint64_t>(c));
    const Texture texture(recipe.texture_octaves, rng);
    ClassGroup group;
    group.class_id = static_cast<std::uint32_t>(c);
    for (int i = 0; i < recipe.patches_per_class; ++i) {
      Patch patch;
      patch.class_id = group.class_id;
      patch.patch_id = static_cast<std::uint32_t>(i);
      patch.pixels = render_view(texture, recipe, rng);
      group.patches.push_back(std::move(patch));
    }
    if (recipe.positive_target_k > recipe.patches_per_class) {
      group = generate_positives(group, static_cast<std::size_t>(recipe.positive_target_k), rng,
                                 recipe.positive_rotation_deg);
      for (auto& p : group.patches) {
        p.pixels = p.pixels.cast<float>().cast<double>();
      }
    }
    dataset.classes.push_back(std::move(group));
  }
  return dataset;
}

Patch apply_dihedral(const Patch& patch, int t) {
  if (patch.pixels.rows() != patch.pixels.cols()) throw InvalidArgument("augmentation needs a square patch");
  if (t < 0 || t >= 8) throw InvalidArgument("dihedral index must be in [0, 8)");
  Patch out = patch;
  const Eigen::Index n = patch.pixels.rows();
  for (int turn = 0; turn < t % 4; ++turn) {
    Eigen::MatrixXd rotated(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) rotated(r, c) = out.pixels(c, n - 1 - r);
    out.pixels = std::move(rotated);
  }
  if (t >= 4) out.pixels = out.pixels.rowwise().reverse().eval();
  return out;
}

Patch augment(const Patch& patch, Rng& rng) {
  if (patch.pixels.rows() != patch.pixels.cols()) throw InvalidArgument("augmentation needs a square patch");
  return apply_dihedral(patch, static_cast<int>(uniform_index(rng, 8)));
}

Eigen::MatrixXd rotate_bilinear(const Eigen::MatrixXd& pixels, double angle_rad) {
  if (pixels.rows() != pixels.cols()) throw InvalidArgument("rotation needs a square patch");
  const int n = static_cast<int>(pixels.rows());
  const double center = 0.5 * (n - 1);
  const double cs = std::cos(angle_rad);
  const double sn = std::sin(angle_rad);
  Eigen::MatrixXd out(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const double x = c - center;
      const double y = r - center;
      // Inverse map: where does this output pixel come from.
      const double sx = reflect(cs * x + sn * y + center, n);
      const double sy = reflect(-sn * x + cs * y + center, n);
      const int x0 = std::min(static_cast<int>(std::floor(sx)), n - 1);
      const int y0 = std::min(static_cast<int>(std::floor(sy)), n - 1);
      const int x1 = std::min(x0 + 1, n - 1);
      const int y1 = std::min(y0 + 1, n - 1);
      const double fx = sx - x0;
      const double fy = sy - y0;
      out(r, c) = (1 - fy) * ((1 - fx) * pixels(y0, x0) + fx * pixels(y0, x1)) +
                  fy * ((1 - fx) * pixels(y1, x0) + fx * pixels(y1, x1));
    }
  }
  return out;
}

ClassGroup generate_positives(const ClassGroup& group, std::size_t target_k, Rng& rng,
                              double max_angle_deg) {
  if (group.patches.empty()) throw InvalidArgument("cannot grow an empty class");
  if (target_k < group.patches.size()) {
    throw InvalidArgument("target size " + std::to_string(target_k) + " is below the current size " +
                          std::to_string(group.patches.size()));
  }
  ClassGroup out = group;
  const std::size_t originals = group.patches.size();
  const double max_rad = max_angle_deg * kPi / 180.0;
  while (out.patches.size() < target_k) {
    const auto& source = group.patches[uniform_index(rng, originals)];
    const double angle = (2.0 * uniform01(rng) - 1.0) * max_rad;
    Patch p;
    p.class_id = group.class_id;
    p.patch_id = static_cast<std::uint32_t>(out.patches.size());
    p.pixels = rotate_bilinear(source.pixels, angle);
    out.patches.push_back(std::move(p));
  }
  return out;
}

NormalizedPatch normalize_patch(const Patch& patch) {
  NormalizedPatch out{patch, false};
  const double mean = patch.pixels.mean();
  const Eigen::MatrixXd centered = patch.pixels.array() - mean;
  const double sd = std::sqrt(centered.squaredNorm() / static_cast<double>(centered.size()));
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    out.patch.pixels.setZero();
    out.constant = true;
    return out;
  }
  out.patch.pixels = centered / sd;
  return out;
}

Eigen::VectorXd patch_input(const Patch& patch) {
  const Eigen::MatrixXd pixels = normalize_patch(patch).patch.pixels;
  Eigen::VectorXd v(pixels.size());
  Eigen::Index k = 0;
  for (Eigen::Index r = 0; r < pixels.rows(); ++r)
    for (Eigen::Index c = 0; c < pixels.cols(); ++c) v[k++] = pixels(r, c);
  return v;
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  const int p = dataset.patch_size;
  if (p <= 0) throw InvalidArgument("dataset has no patch size");
  out.write("ADSP", 4);
  io::put_u32(out, kDatasetVersion);
  io::put_u32(out, static_cast<std::uint32_t>(dataset.classes.size()));
  io::put_u32(out, static_cast<std::uint32_t>(p));
  for (const auto& group : dataset.classes) {
    io::put_u32(out, group.class_id);
    io::put_u32(out, static_cast<std::uint32_t>(group.patches.size()));
    for (const auto& patch : group.patches) {
      if (patch.pixels.rows() != p || patch.pixels.cols() != p) {
        throw InvalidArgument("patch size does not match the dataset patch size");
      }
      for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) io::put_f32(out, static_cast<float>(patch.pixels(r, c)));
    }
  }
}

Dataset read_dataset(std::istream& in) {
  io::Reader reader(in);
  reader.expect_magic("ADSP");
  auto offset = reader.offset();
  const std::uint32_t version = reader.u32("version");
  if (version != kDatasetVersion) throw FormatError("unsupported ADSP version " + std::to_string(version), offset);
  const std::uint32_t num_classes = reader.u32("class count");
  offset = reader.offset();
  const std::uint32_t p = reader.u32("patch size");
  if (p == 0 || p > 4096) throw FormatError("implausible patch size " + std::to_string(p), offset);

  Dataset dataset;
  dataset.patch_size = static_cast<int>(p);
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    ClassGroup group;
    group.class_id = reader.u32("class id");
    const std::uint32_t k = reader.u32("patch count");
    for (std::uint32_t i = 0; i < k; ++i) {
      Patch patch;
      patch.class_id = group.class_id;
      patch.patch_id = i;
      patch.pixels.resize(p, p);
      for (std::uint32_t r = 0; r < p; ++r)
        for (std::uint32_t col = 0; col < p; ++col) patch.pixels(r, col) = reader.f32("pixel");
      group.patches.push_back(std::move(patch));
    }
    dataset.classes.push_back(std::move(group));
  }
  reader.expect_end();
  return dataset;
}

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_dataset(dataset, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  return read_dataset(in);
}

std::pair<Dataset, Dataset> split_classes(const Dataset& dataset, double holdout_fraction) {
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw InvalidArgument("holdout fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.classes.size();
  const auto held = static_cast<std::size_t>(std::ceil(holdout_fraction * static_cast<double>(n)));
  if (held == 0 || held >= n) throw DatasetError("dataset too small to split");
  Dataset train{dataset.patch_size, {dataset.classes.begin(), dataset.classes.end() - static_cast<std::ptrdiff_t>(held)}};
  Dataset test{dataset.patch_size, {dataset.classes.end() - static_cast<std::ptrdiff_t>(held), dataset.classes.end()}};
  return {std::move(train), std::move(test)};
}

std::vector<LabeledPair> sample_verification_pairs(const Dataset& dataset, std::size_t num_matching,
                                                   std::size_t num_nonmatching, Rng& rng) {
  const std::size_t n = dataset.classes.size();
  if (n < 2) throw DatasetError("verification pairs need at least two classes");
  std::vector<std::size_t> multi;
  for (std::size_t c = 0; c < n; ++c)
    if (dataset.classes[c].patches.size() >= 2) multi.push_back(c);
  if (num_matching > 0 && multi.empty()) throw DatasetError("no class has two patches");
  for (const auto& c : dataset.classes)
    if (c.patches.empty()) throw DatasetError("dataset contains an empty class");

  std::vector<LabeledPair> pairs;
  pairs.reserve(num_matching + num_nonmatching);
  for (std::size_t i = 0; i < num_matching; ++i) {
    const std::size_t c = multi[uniform_index(rng, multi.size())];
    const std::size_t k = dataset.classes[c].patches.size();
    const std::size_t a = uniform_index(rng, k);
    std::size_t b = uniform_index(rng, k - 1);
    if (b >= a) ++b;
    pairs.push_back({{c, a}, {c, b}, true});
  }
  for (std::size_t i = 0; i < num_nonmatching; ++i) {
    const std::size_t c1 = uniform_index(rng, n);
    std::size_t c2 = uniform_index(rng, n - 1);
    if (c2 >= c1) ++c2;
    pairs.push_back({{c1, uniform_index(rng, dataset.classes[c1].patches.size())},
                     {c2, uniform_index(rng, dataset.classes[c2].patches.size())},
                     false});
  }
  return pairs;
}

}  // namespace adasample
