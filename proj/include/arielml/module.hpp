// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Compiled module artifact: tensor descriptors, buffer plans, operator
// records with tile configurations, VM bytecode and the weight blob.
// Binary layout is documented bit-exactly in docs/module-format.md.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "arielml/graph.hpp"
#include "arielml/types.hpp"

namespace arielml {

inline constexpr char kModuleMagic[4] = {'A', 'M', 'L', 'M'};
inline constexpr uint16_t kModuleVersion = 1;
inline constexpr uint32_t kNoTensor = 0xFFFFFFFFu;

// Static partitioning of one operator's output axis into work items.
struct TileConfig {
  uint32_t axis = 0;         // canonical partition axis, see docs
  uint32_t tile_extent = 1;  // units per work item
  uint32_t item_count = 1;   // ceil(extent / tile_extent)

  bool operator==(const TileConfig&) const = default;
};

enum class BufferKind : uint8_t {
  weights = 0,     // blob-backed, read-only
  activation = 1,  // heap arena, Alloc/Free managed
  io = 2,          // caller-provided
};

inline const char* buffer_kind_name(BufferKind k) {
  switch (k) {
    case BufferKind::weights: return "weights";
    case BufferKind::activation: return "activation";
    case BufferKind::io: return "io";
  }
  return "?";
}

struct BufferPlan {
  uint32_t buffer_id = 0;
  uint64_t byte_size = 0;  // element bytes rounded up to metadata.alignment
  BufferKind kind = BufferKind::activation;
  uint32_t tensor_id = kNoTensor;  // kNoTensor for weights buffers

  bool operator==(const BufferPlan&) const = default;
};

struct ConvAttrs {
  uint32_t kernel_h = 0, kernel_w = 0, stride = 1, out_channels = 0;
  double weight_scale = 0.0;  // 0 for float layers
  bool operator==(const ConvAttrs&) const = default;
};

struct PoolAttrs {
  uint32_t pool_h = 0, pool_w = 0, stride = 1;
  bool operator==(const PoolAttrs&) const = default;
};

struct DenseAttrs {
  uint32_t in_features = 0, out_features = 0;
  double weight_scale = 0.0;
  bool operator==(const DenseAttrs&) const = default;
};

using OpAttrs = std::variant<std::monostate, ConvAttrs, PoolAttrs, DenseAttrs>;

// (offset, length) into the module weight blob; the slice packs the weight
// matrix, padding to a 4-byte boundary, then the bias vector.
struct WeightSlice {
  uint32_t offset = 0;
  uint32_t length = 0;
  bool operator==(const WeightSlice&) const = default;
};

struct OpRecord {
  uint32_t op_id = 0;
  LayerKind kind = LayerKind::dense;
  OpAttrs attrs;
  // Data inputs first; weight-carrying ops append their weights buffer last.
  std::vector<uint32_t> input_buffers;
  uint32_t output_buffer = 0;
  std::optional<WeightSlice> weight_slice;
  TileConfig tile;

  bool operator==(const OpRecord&) const = default;
};

enum class Opcode : uint8_t {
  alloc = 0,
  dispatch = 1,
  wait = 2,
  free_buffer = 3,
  ret = 4,
};

struct Instruction {
  Opcode op = Opcode::ret;
  uint32_t operand = 0;  // buffer_id (alloc/free) or op_id (dispatch)

  bool operator==(const Instruction&) const = default;
};

struct Bytecode {
  std::vector<Instruction> instructions;
  bool operator==(const Bytecode&) const = default;
};

struct ModuleMetadata {
  uint32_t worker_count_hint = 1;
  std::string entry_point = "main";
  uint32_t input_desc = 0;   // tensor id
  uint32_t output_desc = 0;  // tensor id
  uint32_t alignment = 16;   // bytes, one of {4, 8, 16, 32, 64}

  bool operator==(const ModuleMetadata&) const = default;
};

struct CompiledModule {
  ModuleMetadata metadata;
  std::vector<TensorDesc> tensors;
  std::vector<BufferPlan> buffers;
  std::vector<std::byte> weights;
  std::vector<OpRecord> ops;
  Bytecode program;

  const TensorDesc* find_tensor(uint32_t id) const {
    for (const auto& t : tensors)
      if (t.id == id) return &t;
    return nullptr;
  }
  const BufferPlan* find_buffer(uint32_t id) const {
    for (const auto& b : buffers)
      if (b.buffer_id == id) return &b;
    return nullptr;
  }
  // Tensor backing a buffer, or nullptr for weights buffers.
  const TensorDesc* buffer_tensor(uint32_t buffer_id) const {
    const BufferPlan* b = find_buffer(buffer_id);
    if (!b || b->tensor_id == kNoTensor) return nullptr;
    return find_tensor(b->tensor_id);
  }

  bool operator==(const CompiledModule&) const = default;
};

// Number of partition units along the op's canonical axis: output rows for
// dense, flattened (batch x channel x row) for conv2d/maxpool2d, element
// count for elementwise ops. Zero if descriptors are inconsistent.
uint64_t partition_extent(const OpRecord& op, const CompiledModule& m);

// Output bytes covered by one partition unit.
uint64_t partition_unit_bytes(const OpRecord& op, const CompiledModule& m);

// Empty iff every CompiledModule invariant holds, including the bytecode
// hazard rule (a Wait separates a Dispatch writing a buffer from any
// Dispatch reading it).
std::vector<Diagnostic> verify_module(const CompiledModule& m);

// Deterministic byte-exact serialization. Throws VerifyError if m invalid.
std::vector<std::byte> encode_module(const CompiledModule& m);

// Throws BadMagicError / VersionUnsupportedError / SectionOverlapError on
// structural damage and VerifyError when the decoded module fails
// verify_module.
CompiledModule decode_module(std::span<const std::byte> bytes);

void write_module(const CompiledModule& m, const std::filesystem::path& path);
CompiledModule read_module(const std::filesystem::path& path);

// Walks Alloc/Free instructions and returns the peak of the running sum of
// live activation bytes (the analytic heap plan the profiler must match).
uint64_t analyze_peak_heap(const CompiledModule& m);

// Human-readable bytecode listing for `inspect`.
std::string disassemble(const CompiledModule& m);

}  // namespace arielml
