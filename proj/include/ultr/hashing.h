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

#ifndef ULTR_HASHING_H_
#define ULTR_HASHING_H_

#include <cstdint>
#include <string>
#include <string_view>

namespace ultr {

// Hex SHA-1 of "blob <size>\0<content>", i.e. what `git hash-object` prints.
std::string git_blob_hash(std::string_view content);

// Stable 64-bit FNV-1a; used to derive per-query random substreams.
std::uint64_t fnv1a64(std::string_view text);

// SplitMix64 finaliser; mixes seeds into well-spread substream seeds.
std::uint64_t mix_seed(std::uint64_t x);

// Seed for substream `counter` of `key` under master `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key,
                          std::uint64_t counter);

}  // namespace ultr

#endif  // ULTR_HASHING_H_
