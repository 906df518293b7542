// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/compiler.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>
#include <map>
#include <set>

namespace arielml {

TileConfig plan_tiles(uint64_t extent, const TargetInfo& t) {
  if (extent == 0) throw TilingError("cannot tile a zero-extent output");
  uint64_t slots = uint64_t(t.worker_count) * std::max(1u, t.oversubscription);
  uint64_t tile = std::max<uint64_t>(1, ceil_div(extent, slots));
  TileConfig cfg;
  cfg.axis = 0;
  cfg.tile_extent = static_cast<uint32_t>(tile);
  cfg.item_count = static_cast<uint32_t>(ceil_div(extent, tile));
  return cfg;
}

Bytecode emit_bytecode(const std::vector<OpRecord>& ops,
                       const std::vector<BufferPlan>& buffers) {
  auto kind_of = [&](uint32_t id) {
    for (const auto& b : buffers)
      if (b.buffer_id == id) return b.kind;
    return BufferKind::io;
  };

  // Last op touching each activation buffer (producer counts as a use so
  // dead intermediates are freed right after they are written).
  std::map<uint32_t, size_t> last_use;
  for (size_t i = 0; i < ops.size(); ++i) {
    for (uint32_t b : ops[i].input_buffers)
      if (kind_of(b) == BufferKind::activation) last_use[b] = i;
    if (kind_of(ops[i].output_buffer) == BufferKind::activation)
      last_use[ops[i].output_buffer] = std::max(last_use[ops[i].output_buffer], i);
  }

  Bytecode bc;
  std::set<uint32_t> allocated;
  for (size_t i = 0; i < ops.size(); ++i) {
    const OpRecord& op = ops[i];
    uint32_t out = op.output_buffer;
    if (kind_of(out) == BufferKind::activation && !allocated.count(out)) {
      bc.instructions.push_back({Opcode::alloc, out});
      allocated.insert(out);
    }
    bc.instructions.push_back({Opcode::dispatch, op.op_id});
    bc.instructions.push_back({Opcode::wait, 0});
    for (const auto& [buf, last] : last_use)
      if (last == i && allocated.count(buf)) {
        bc.instructions.push_back({Opcode::free_buffer, buf});
        allocated.erase(buf);
      }
  }
  bc.instructions.push_back({Opcode::ret, 0});
  return bc;
}

CompiledModule compile(const ModelGraph& g, const TargetInfo& t) {
  auto diags = validate_graph(g);
  if (!diags.empty())
    throw ValidationError("compile requires a valid graph:\n" +
                          format_diagnostics(diags));
  if (t.worker_count == 0) throw ValidationError("worker_count must be >= 1");
  if (t.alignment != 4 && t.alignment != 8 && t.alignment != 16 &&
      t.alignment != 32 && t.alignment != 64)
    throw ValidationError("alignment must be one of {4,8,16,32,64}");

  CompiledModule m;
  m.metadata.worker_count_hint = t.worker_count;
  m.metadata.alignment = t.alignment;
  m.metadata.entry_point = "main";
  m.metadata.input_desc = g.input_id;
  m.metadata.output_desc = g.output_id;
  m.tensors = g.tensors;

  // One buffer per tensor, ids dense in tensor order.
  std::map<uint32_t, uint32_t> tensor_buffer;
  for (const auto& tn : g.tensors) {
    BufferPlan b;
    b.buffer_id = static_cast<uint32_t>(m.buffers.size());
    b.kind = (tn.id == g.input_id || tn.id == g.output_id) ? BufferKind::io
                                                           : BufferKind::activation;
    b.tensor_id = tn.id;
    b.byte_size = round_up(tn.byte_size(), t.alignment);
    tensor_buffer[tn.id] = b.buffer_id;
    m.buffers.push_back(b);
  }

  for (size_t i = 0; i < g.layers.size(); ++i) {
    const LayerDesc& l = g.layers[i];
    OpRecord op;
    op.op_id = static_cast<uint32_t>(i);
    op.kind = l.kind;
    switch (l.kind) {
      case LayerKind::conv2d:
        op.attrs = ConvAttrs{l.kernel_h, l.kernel_w, l.stride, l.out_channels,
                             l.weight_scale};
        break;
      case LayerKind::maxpool2d:
        op.attrs = PoolAttrs{l.pool_h, l.pool_w, l.stride};
        break;
      case LayerKind::dense:
        op.attrs = DenseAttrs{l.in_features, l.out_features, l.weight_scale};
        break;
      case LayerKind::relu:
      case LayerKind::quantize:
      case LayerKind::dequantize:
      case LayerKind::flatten:
        break;
      default:
        throw UnsupportedLayerError("layer " + std::to_string(i) +
                                    ": unsupported kind");
    }
    op.input_buffers = {tensor_buffer.at(l.inputs[0])};
    op.output_buffer = tensor_buffer.at(l.output);

    if (l.weight_offset) {
      // Pack [weights][pad to 4][bias] into the module blob, slice-aligned.
      uint64_t wb = weight_bytes(l, g);
      uint64_t bb = bias_bytes(l, g);
      uint64_t start = round_up(m.weights.size(), t.alignment);
      m.weights.resize(start + round_up(wb, 4) + bb);
      std::memcpy(m.weights.data() + start, g.weights.data() + *l.weight_offset,
                  wb);
      std::memcpy(m.weights.data() + start + round_up(wb, 4),
                  g.weights.data() + *l.bias_offset, bb);
      op.weight_slice = WeightSlice{
          static_cast<uint32_t>(start),
          static_cast<uint32_t>(round_up(wb, 4) + bb)};

      BufferPlan wbuf;
      wbuf.buffer_id = static_cast<uint32_t>(m.buffers.size());
      wbuf.kind = BufferKind::weights;
      wbuf.tensor_id = kNoTensor;
      wbuf.byte_size = op.weight_slice->length;
      m.buffers.push_back(wbuf);
      op.input_buffers.push_back(wbuf.buffer_id);
    }

    m.ops.push_back(std::move(op));
  }

  // Tile planning needs output descriptors in place.
  for (auto& op : m.ops) {
    uint64_t extent = partition_extent(op, m);
    op.tile = plan_tiles(extent, t);
  }

  m.program = emit_bytecode(m.ops, m.buffers);

  auto vdiags = verify_module(m);
  assert(vdiags.empty() && "compile must produce a verifiable module");
  (void)vdiags;
  return m;
}

}  // namespace arielml
