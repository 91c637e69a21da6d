// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "auglab/tensor.hpp"

namespace auglab {

// Binary checkpoint container, little-endian throughout:
//   "ADCK" | u32 version | records until EOF
//   record = u32 name length | name bytes (UTF-8) | u32 rank |
//            u64 extents[rank] | f64 payload (row-major)
// Round trips are bit-exact; the same container carries weights and 0/1 masks.
inline constexpr uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

}  // namespace auglab
