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

#ifndef ULTR_CHECKPOINT_H_
#define ULTR_CHECKPOINT_H_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "ultr/letor_io.h"
#include "ultr/nnrank.h"

namespace ultr {

// Binary container, little-endian:
//   char[8]  "ULTRCKPT"
//   u32      format version (1)
//   u64      input_dim
//   u32      hidden layer count, then u64 width per layer
//   u64      init_seed
//   u32      config-hash length, then that many bytes
//   u32      normalizer present (0/1); if 1: input_dim f64 lo, input_dim f64 hi
//   u64      parameter count, then f64 parameters in Ranker layout
struct Checkpoint {
  Ranker ranker;
  MinMaxNormalizer normalizer;
  std::string config_hash;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

// Writes `path` and a JSON sidecar `path + ".json"` with `metadata`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                     const std::map<std::string, std::string>& metadata);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ultr

#endif  // ULTR_CHECKPOINT_H_
