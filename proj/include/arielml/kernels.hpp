// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tiled operator kernels. Every kernel executes an arbitrary sub-range of
// its op's partitioned output axis and writes nothing outside that range,
// which is what makes work items contention-free. Quantized arithmetic:
// i32 accumulation, double-precision requantization with ties rounded away
// from zero, NaN quantizes to the zero point.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "arielml/module.hpp"
#include "arielml/types.hpp"

namespace arielml {

// Per-worker staging memory; grows on demand and records its high-water
// mark (the host-side stand-in for per-core stack usage).
class ScratchArena {
 public:
  std::span<std::byte> request(size_t bytes) {
    if (bytes > buf_.size()) buf_.resize(bytes);
    high_water_ = std::max<uint64_t>(high_water_, bytes);
    return {buf_.data(), bytes};
  }
  uint64_t high_water() const { return high_water_; }
  void reset_high_water() { high_water_ = 0; }

 private:
  std::vector<std::byte> buf_;
  uint64_t high_water_ = 0;
};

// Immutable per-dispatch bindings shared by all work items of one op.
struct OpContext {
  const OpRecord* op = nullptr;
  const TensorDesc* in_desc = nullptr;
  const TensorDesc* out_desc = nullptr;
  std::span<const std::byte> input;    // full input tensor bytes
  std::span<const std::byte> weights;  // packed [weights][pad4][bias] slice
  std::span<std::byte> output;         // full output tensor bytes
};

// Executes op over partition units [begin, end). Writes are confined to
// the output bytes covered by that range.
void run_kernel(const OpContext& ctx, uint32_t begin, uint32_t end,
                ScratchArena& scratch);

}  // namespace arielml
