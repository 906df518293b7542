// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tensor files: one text header line `shape=1x1x28x28 dtype=f32` followed
// by raw little-endian f32 payload.

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "arielml/types.hpp"

namespace arielml {

struct TensorFile {
  std::vector<uint32_t> shape;
  std::vector<float> data;
};

TensorFile read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path,
                  std::span<const uint32_t> shape, std::span<const float> data);

}  // namespace arielml
