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

// Synthetic patch datasets, augmentation, per-patch normalization and the
// ADSP on-disk format.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "adasample/rng.hpp"

namespace adasample {

struct Patch {
  Eigen::MatrixXd pixels;  // P x P, row r / column c
  std::uint32_t class_id = 0;
  std::uint32_t patch_id = 0;

  bool operator==(const Patch& other) const {
    return class_id == other.class_id && patch_id == other.patch_id &&
           pixels.rows() == other.pixels.rows() && pixels.cols() == other.pixels.cols() &&
           pixels == other.pixels;
  }
};

/// All views of one physical point.
struct ClassGroup {
  std::uint32_t class_id = 0;
  std::vector<Patch> patches;

  bool operator==(const ClassGroup&) const = default;
};

struct Dataset {
  int patch_size = 0;
  std::vector<ClassGroup> classes;

  std::size_t num_patches() const;
  bool operator==(const Dataset&) const = default;
};

struct DatasetSpec {
  int num_classes = 2000;
  int patches_per_class = 8;
  int patch_size = 16;
  int texture_octaves = 3;
  // Scale of the per-view random affine warp (rotation, scale, shear, shift).
  double warp_magnitude = 0.5;
  double noise_sigma = 0.2;
  // Gain/offset jitter plus a linear illumination ramp across the patch.
  double brightness_jitter = 0.3;
  // Probability that a view is partly covered by unrelated texture, the
  // synthetic counterpart of occlusions and bad correspondences.
  double occlusion_prob = 0.0;
  // When larger than patches_per_class, every class is grown to this size
  // with rotated copies (generate_positives).
  int positive_target_k = 0;
  double positive_rotation_deg = 30.0;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Each class gets a random band-limited texture; views are rendered from it
/// under per-view affine warps of varying strength, then illumination changes
/// and pixel noise are applied. Pixels are rounded to float32 so the ADSP
/// round trip is exact.
Dataset generate_synthetic(const DatasetSpec& recipe);

/// Dihedral transform index t in [0, 8): rotate 90 degrees counterclockwise
/// (t % 4) times, then mirror left-right when t >= 4.
Patch apply_dihedral(const Patch& patch, int t);

/// Uniformly random one of the eight dihedral transforms.
Patch augment(const Patch& patch, Rng& rng);

/// Rotate about the patch center by angle_rad using bilinear interpolation
/// with reflect padding; output has the input's size.
Eigen::MatrixXd rotate_bilinear(const Eigen::MatrixXd& pixels, double angle_rad);

/// Grows a class to target_k members by rotating randomly chosen existing
/// members by an angle uniform in [-max_angle_deg, max_angle_deg].
ClassGroup generate_positives(const ClassGroup& group, std::size_t target_k, Rng& rng,
                              double max_angle_deg = 30.0);

struct NormalizedPatch {
  Patch patch;
  bool constant = false;
};

/// Zero mean, unit (population) variance. Constant patches become all zeros
/// and are flagged.
NormalizedPatch normalize_patch(const Patch& patch);

/// Normalized pixels flattened row-major into one network input column.
Eigen::VectorXd patch_input(const Patch& patch);

/// ADSP: "ADSP", u32 version, u32 N, u32 P, then per class u32 class_id,
/// u32 k and k row-major float32 little-endian P x P patches.
inline constexpr std::uint32_t kDatasetVersion = 1;
void write_dataset(const Dataset& dataset, std::ostream& out);
Dataset read_dataset(std::istream& in);
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

/// Splits off the last ceil(fraction * N) classes as a held-out set.
std::pair<Dataset, Dataset> split_classes(const Dataset& dataset, double holdout_fraction);

/// Reference to one patch: (class position in the dataset, patch position).
struct PatchRef {
  std::size_t class_pos = 0;
  std::size_t patch_pos = 0;
};

struct LabeledPair {
  PatchRef first;
  PatchRef second;
  bool matching = false;
};

/// num_matching same-class pairs and num_nonmatching cross-class pairs drawn
/// uniformly.
std::vector<LabeledPair> sample_verification_pairs(const Dataset& dataset, std::size_t num_matching,
                                                   std::size_t num_nonmatching, Rng& rng);

}  // namespace adasample
