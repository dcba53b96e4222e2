/*
 * Copyright 2026 The ultr Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ultr/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "ultr/errors.h"

namespace ultr {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'U', 'L', 'T', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw ValidationError("checkpoint truncated");
  }
  return value;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& spec = ckpt.ranker.spec();
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, spec.input_dim);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(spec.hidden.size()));
  for (std::size_t w : spec.hidden) put<std::uint64_t>(out, w);
  put<std::uint64_t>(out, spec.init_seed);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config_hash.size()));
  out.write(ckpt.config_hash.data(), static_cast<std::streamsize>(ckpt.config_hash.size()));
  const bool has_norm = !ckpt.normalizer.empty();
  put<std::uint32_t>(out, has_norm ? 1 : 0);
  if (has_norm) {
    for (double v : ckpt.normalizer.lo) put<double>(out, v);
    for (double v : ckpt.normalizer.hi) put<double>(out, v);
  }
  const auto params = ckpt.ranker.parameters();
  put<std::uint64_t>(out, params.size());
  for (double v : params) put<double>(out, v);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("not a ranker checkpoint");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(version));
  }
  MlpSpec spec;
  spec.input_dim = get<std::uint64_t>(in);
  const auto layers = get<std::uint32_t>(in);
  if (layers > 64) throw ValidationError("checkpoint: implausible layer count");
  spec.hidden.resize(layers);
  for (auto& w : spec.hidden) w = get<std::uint64_t>(in);
  spec.init_seed = get<std::uint64_t>(in);
  const auto hash_len = get<std::uint32_t>(in);
  if (hash_len > 4096) throw ValidationError("checkpoint: implausible hash length");
  std::string hash(hash_len, '\0');
  if (hash_len > 0 && !in.read(hash.data(), hash_len)) {
    throw ValidationError("checkpoint truncated");
  }
  MinMaxNormalizer norm;
  if (get<std::uint32_t>(in) == 1) {
    norm.lo.resize(spec.input_dim);
    norm.hi.resize(spec.input_dim);
    for (auto& v : norm.lo) v = get<double>(in);
    for (auto& v : norm.hi) v = get<double>(in);
  }
  Ranker ranker(spec);
  const auto count = get<std::uint64_t>(in);
  if (count != ranker.num_parameters()) {
    throw ValidationError("checkpoint parameter count does not match its spec");
  }
  auto params = ranker.mutable_parameters();
  for (auto& v : params) v = get<double>(in);
  return Checkpoint{std::move(ranker), std::move(norm), std::move(hash)};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                     const std::map<std::string, std::string>& metadata) {
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint " + path.string());
    write_checkpoint(out, ckpt);
  }
  nlohmann::ordered_json meta;
  meta["format_version"] = kCheckpointVersion;
  meta["config_hash"] = ckpt.config_hash;
  meta["input_dim"] = ckpt.ranker.spec().input_dim;
  meta["hidden"] = ckpt.ranker.spec().hidden;
  meta["num_parameters"] = ckpt.ranker.num_parameters();
  meta["normalized"] = !ckpt.normalizer.empty();
  for (const auto& [k, v] : metadata) meta["training"][k] = v;
  std::ofstream side(path.string() + ".json");
  if (!side) throw Error("cannot write checkpoint sidecar for " + path.string());
  side << meta.dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace ultr
