// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force reference interpreter for ModelGraph. Deliberately shares no
// code with the kernels module (independent loops, its own rounding): this
// is the ground truth the tiled runtime is tested against.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "arielml/graph.hpp"
#include "arielml/types.hpp"

namespace arielml {

struct OracleResult {
  // One entry per layer, in layer order; raw bytes of the layer's output
  // tensor (dtype per the graph for oracle_int, f32 for oracle_f32).
  std::vector<std::vector<std::byte>> layer_outputs;
  // Bytes of the graph output tensor.
  std::vector<std::byte> output;

  std::span<const float> output_f32() const {
    return {reinterpret_cast<const float*>(output.data()),
            output.size() / sizeof(float)};
  }
};

// Integer-exact interpretation with the documented quantized semantics.
// `input` is the raw bytes of the graph input tensor.
OracleResult oracle_int(const ModelGraph& g, std::span<const std::byte> input);

// The same graph executed entirely in f32, ignoring quantization: weights
// and biases are dequantized first, quantize/dequantize become identity.
OracleResult oracle_f32(const ModelGraph& g, std::span<const float> input);

// FNV-1a over a byte span; used by the CLI to print per-layer checksums.
uint64_t fnv1a(std::span<const std::byte> bytes);

}  // namespace arielml
