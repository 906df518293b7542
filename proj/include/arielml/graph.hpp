// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Front-end description of a small quantized network plus the loader for
// the line-oriented graph file format (see docs/graph-format.md).

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "arielml/errors.hpp"
#include "arielml/types.hpp"

namespace arielml {

struct LayerDesc {
  LayerKind kind = LayerKind::dense;
  std::vector<uint32_t> inputs;  // tensor ids
  uint32_t output = 0;           // tensor id

  // conv2d
  uint32_t kernel_h = 0, kernel_w = 0;
  uint32_t out_channels = 0;
  // maxpool2d
  uint32_t pool_h = 0, pool_w = 0;
  // conv2d + maxpool2d
  uint32_t stride = 1;
  // dense
  uint32_t in_features = 0, out_features = 0;

  // Quantized conv2d/dense weights use (weight_scale, zero_point 0).
  double weight_scale = 0.0;
  // Byte offsets into the weight blob; present only for conv2d/dense.
  std::optional<uint64_t> weight_offset;
  std::optional<uint64_t> bias_offset;

  bool operator==(const LayerDesc&) const = default;
};

struct ModelGraph {
  std::vector<TensorDesc> tensors;  // unique ids, any order
  std::vector<LayerDesc> layers;    // topological order
  std::vector<std::byte> weights;   // little-endian blob, offsets on layers
  uint32_t input_id = 0;
  uint32_t output_id = 0;

  const TensorDesc* find_tensor(uint32_t id) const {
    for (const auto& t : tensors)
      if (t.id == id) return &t;
    return nullptr;
  }

  bool operator==(const ModelGraph&) const = default;
};

struct Diagnostic {
  // Index of the offending layer, or -1 when the issue is tensor-level.
  int layer = -1;
  // Tensor id involved, or -1.
  int64_t tensor = -1;
  std::string message;
};

std::string format_diagnostics(const std::vector<Diagnostic>& diags);

// Expected blob byte length of the weight matrix / bias vector of a
// conv2d or dense layer. Quantized layers store i8 weights and i32 bias,
// float layers store f32 for both.
uint64_t weight_bytes(const LayerDesc& layer, const ModelGraph& g);
uint64_t bias_bytes(const LayerDesc& layer, const ModelGraph& g);

// Empty result iff every ModelGraph invariant holds.
std::vector<Diagnostic> validate_graph(const ModelGraph& g);

// Parses graph text. `blob` is the content of the sidecar weight file,
// already resolved by the caller; load_graph resolves it relative to the
// graph file's directory. Throws ParseError on malformed text.
ModelGraph parse_graph(const std::string& text, std::vector<std::byte> blob);

// Returns the relative weight-blob path named by the graph text ("" when
// the graph carries no weights).
std::string graph_weight_path(const std::string& text);

// Loads, parses and validates. Throws ParseError / ValidationError / IoError.
ModelGraph load_graph(const std::filesystem::path& path);

// Renders g back to graph text (canonical form; weight blob not included).
std::string serialize_graph(const ModelGraph& g, const std::string& weight_path);

}  // namespace arielml
