// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Lowers a validated ModelGraph into a CompiledModule: buffer assignment,
// per-operator tile planning, bytecode emission and metadata construction.

#pragma once

#include "arielml/graph.hpp"
#include "arielml/module.hpp"

namespace arielml {

struct TargetInfo {
  uint32_t worker_count = 1;
  uint32_t alignment = 16;       // bytes, power of two in {4,8,16,32,64}
  uint32_t oversubscription = 1; // work items per worker per op
};

// tile_extent = ceil(extent / (workers * oversubscription)), clamped to >= 1.
// Throws TilingError only for a zero extent.
TileConfig plan_tiles(uint64_t extent, const TargetInfo& t);

// One Alloc (first use) / Dispatch / Wait group per op, Free immediately
// after the last consumer's Wait, terminated by Return. `ops` must be in
// topological order and reference `buffers` ids.
Bytecode emit_bytecode(const std::vector<OpRecord>& ops,
                       const std::vector<BufferPlan>& buffers);

// Full pipeline. Requires validate_graph(g) to be empty; the result always
// satisfies verify_module.
CompiledModule compile(const ModelGraph& g, const TargetInfo& t);

}  // namespace arielml
