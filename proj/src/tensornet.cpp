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

#include "adasample/tensornet.hpp"

#include <fstream>
#include <limits>
#include <string>

#include "binary_io.hpp"

namespace adasample {

std::string_view to_string(Activation activation) {
  return activation == Activation::kTanh ? "tanh" : "relu";
}

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw InvalidArgument("unknown activation '" + std::string(name) + "' (expected tanh or relu)");
}

void write_params(const Params& params, std::ostream& out) {
  params.validate();
  out.write("ADNW", 4);
  io::put_u32(out, kParamsVersion);
  io::put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (auto d : params.dims()) io::put_u32(out, static_cast<std::uint32_t>(d));
  for (const auto& w : params.layers)
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) io::put_f64(out, w(r, c));
}

Params read_params(std::istream& in, Activation activation) {
  io::Reader reader(in);
  reader.expect_magic("ADNW");
  const auto version_offset = reader.offset();
  const std::uint32_t version = reader.u32("version");
  if (version != kParamsVersion) {
    throw FormatError("unsupported ADNW version " + std::to_string(version), version_offset);
  }
  const auto count_offset = reader.offset();
  const std::uint32_t layer_count = reader.u32("layer count");
  if (layer_count == 0 || layer_count > 1024) {
    throw FormatError("implausible layer count " + std::to_string(layer_count), count_offset);
  }
  std::vector<Eigen::Index> dims;
  for (std::uint32_t l = 0; l <= layer_count; ++l) {
    const auto offset = reader.offset();
    const std::uint32_t d = reader.u32("dimension");
    if (d == 0 || d > (1u << 24)) throw FormatError("implausible layer dimension " + std::to_string(d), offset);
    dims.push_back(static_cast<Eigen::Index>(d));
  }
  Params params;
  params.activation = activation;
  for (std::size_t l = 1; l < dims.size(); ++l) {
    MatrixX<double> w(dims[l], dims[l - 1]);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = reader.f64("weight");
    params.layers.push_back(std::move(w));
  }
  reader.expect_end();
  return params;
}

void save_params(const Params& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_params(params, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

Params load_params(const std::string& path, Activation activation) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open params file " + path);
  return read_params(in, activation);
}

}  // namespace adasample
