// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/module.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace arielml {

namespace {

// Section ids, in file order.
enum : uint32_t {
  kSecMetadata = 1,
  kSecTensors = 2,
  kSecBuffers = 3,
  kSecOps = 4,
  kSecBytecode = 5,
  kSecWeights = 6,
};
constexpr uint32_t kSectionOrder[] = {kSecMetadata, kSecTensors, kSecBuffers,
                                      kSecOps,      kSecBytecode, kSecWeights};

class Writer {
 public:
  void u8(uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
  void u16(uint16_t v) { u8(v & 0xFF); u8(v >> 8); }
  void u32(uint32_t v) { for (int i = 0; i < 4; ++i) u8((v >> (8 * i)) & 0xFF); }
  void u64(uint64_t v) { for (int i = 0; i < 8; ++i) u8((v >> (8 * i)) & 0xFF); }
  void i32(int32_t v) { u32(static_cast<uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    for (char c : s) u8(static_cast<uint8_t>(c));
  }
  void bytes(std::span<const std::byte> b) {
    buf_.insert(buf_.end(), b.begin(), b.end());
  }
  size_t size() const { return buf_.size(); }
  std::vector<std::byte> take() { return std::move(buf_); }

 private:
  std::vector<std::byte> buf_;
};

class Reader {
 public:
  Reader(std::span<const std::byte> data, const char* what)
      : data_(data), what_(what) {}

  uint8_t u8() {
    need(1);
    return static_cast<uint8_t>(data_[pos_++]);
  }
  uint16_t u16() { uint16_t v = u8(); return v | (uint16_t(u8()) << 8); }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= uint32_t(static_cast<uint8_t>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    uint64_t lo = u32();
    return lo | (uint64_t(u32()) << 32);
  }
  int32_t i32() { return static_cast<int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::vector<std::byte> rest() {
    std::vector<std::byte> out(data_.begin() + pos_, data_.end());
    pos_ = data_.size();
    return out;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(size_t n) {
    if (pos_ + n > data_.size())
      throw SectionOverlapError(std::string(what_) + ": truncated");
  }
  std::span<const std::byte> data_;
  const char* what_;
  size_t pos_ = 0;
};

void encode_metadata(Writer& w, const ModuleMetadata& md) {
  w.u32(md.worker_count_hint);
  w.u32(md.alignment);
  w.u32(md.input_desc);
  w.u32(md.output_desc);
  w.str(md.entry_point);
}

ModuleMetadata decode_metadata(Reader& r) {
  ModuleMetadata md;
  md.worker_count_hint = r.u32();
  md.alignment = r.u32();
  md.input_desc = r.u32();
  md.output_desc = r.u32();
  md.entry_point = r.str();
  return md;
}

void encode_tensors(Writer& w, const std::vector<TensorDesc>& ts) {
  w.u32(static_cast<uint32_t>(ts.size()));
  for (const auto& t : ts) {
    w.u32(t.id);
    w.u8(static_cast<uint8_t>(t.dtype));
    w.u8(t.quant ? 1 : 0);
    w.u32(static_cast<uint32_t>(t.shape.size()));
    for (uint32_t d : t.shape) w.u32(d);
    if (t.quant) {
      w.f64(t.quant->scale);
      w.i32(t.quant->zero_point);
    }
  }
}

std::vector<TensorDesc> decode_tensors(Reader& r) {
  uint32_t n = r.u32();
  std::vector<TensorDesc> ts;
  ts.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    TensorDesc t;
    t.id = r.u32();
    uint8_t dt = r.u8();
    if (dt > 2) throw SectionOverlapError("tensors: bad dtype byte");
    t.dtype = static_cast<DType>(dt);
    uint8_t hq = r.u8();
    uint32_t rank = r.u32();
    if (rank > 8) throw SectionOverlapError("tensors: implausible rank");
    t.shape.resize(rank);
    for (uint32_t d = 0; d < rank; ++d) t.shape[d] = r.u32();
    if (hq) {
      QuantParams q;
      q.scale = r.f64();
      q.zero_point = r.i32();
      t.quant = q;
    }
    ts.push_back(std::move(t));
  }
  return ts;
}

void encode_buffers(Writer& w, const std::vector<BufferPlan>& bs) {
  w.u32(static_cast<uint32_t>(bs.size()));
  for (const auto& b : bs) {
    w.u32(b.buffer_id);
    w.u8(static_cast<uint8_t>(b.kind));
    w.u32(b.tensor_id);
    w.u64(b.byte_size);
  }
}

std::vector<BufferPlan> decode_buffers(Reader& r) {
  uint32_t n = r.u32();
  std::vector<BufferPlan> bs;
  bs.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    BufferPlan b;
    b.buffer_id = r.u32();
    uint8_t k = r.u8();
    if (k > 2) throw SectionOverlapError("buffers: bad kind byte");
    b.kind = static_cast<BufferKind>(k);
    b.tensor_id = r.u32();
    b.byte_size = r.u64();
    bs.push_back(b);
  }
  return bs;
}

void encode_ops(Writer& w, const std::vector<OpRecord>& ops) {
  w.u32(static_cast<uint32_t>(ops.size()));
  for (const auto& op : ops) {
    w.u32(op.op_id);
    w.u8(static_cast<uint8_t>(op.kind));
    switch (op.kind) {
      case LayerKind::conv2d: {
        const auto& a = std::get<ConvAttrs>(op.attrs);
        w.u32(a.kernel_h);
        w.u32(a.kernel_w);
        w.u32(a.stride);
        w.u32(a.out_channels);
        w.f64(a.weight_scale);
        break;
      }
      case LayerKind::maxpool2d: {
        const auto& a = std::get<PoolAttrs>(op.attrs);
        w.u32(a.pool_h);
        w.u32(a.pool_w);
        w.u32(a.stride);
        break;
      }
      case LayerKind::dense: {
        const auto& a = std::get<DenseAttrs>(op.attrs);
        w.u32(a.in_features);
        w.u32(a.out_features);
        w.f64(a.weight_scale);
        break;
      }
      default:
        break;
    }
    w.u32(static_cast<uint32_t>(op.input_buffers.size()));
    for (uint32_t b : op.input_buffers) w.u32(b);
    w.u32(op.output_buffer);
    w.u8(op.weight_slice ? 1 : 0);
    if (op.weight_slice) {
      w.u32(op.weight_slice->offset);
      w.u32(op.weight_slice->length);
    }
    w.u32(op.tile.axis);
    w.u32(op.tile.tile_extent);
    w.u32(op.tile.item_count);
  }
}

std::vector<OpRecord> decode_ops(Reader& r) {
  uint32_t n = r.u32();
  std::vector<OpRecord> ops;
  ops.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    OpRecord op;
    op.op_id = r.u32();
    uint8_t k = r.u8();
    if (k > 6) throw SectionOverlapError("ops: bad kind byte");
    op.kind = static_cast<LayerKind>(k);
    switch (op.kind) {
      case LayerKind::conv2d: {
        ConvAttrs a;
        a.kernel_h = r.u32();
        a.kernel_w = r.u32();
        a.stride = r.u32();
        a.out_channels = r.u32();
        a.weight_scale = r.f64();
        op.attrs = a;
        break;
      }
      case LayerKind::maxpool2d: {
        PoolAttrs a;
        a.pool_h = r.u32();
        a.pool_w = r.u32();
        a.stride = r.u32();
        op.attrs = a;
        break;
      }
      case LayerKind::dense: {
        DenseAttrs a;
        a.in_features = r.u32();
        a.out_features = r.u32();
        a.weight_scale = r.f64();
        op.attrs = a;
        break;
      }
      default:
        break;
    }
    uint32_t nin = r.u32();
    if (nin > 16) throw SectionOverlapError("ops: implausible input count");
    op.input_buffers.resize(nin);
    for (uint32_t j = 0; j < nin; ++j) op.input_buffers[j] = r.u32();
    op.output_buffer = r.u32();
    if (r.u8()) {
      WeightSlice ws;
      ws.offset = r.u32();
      ws.length = r.u32();
      op.weight_slice = ws;
    }
    op.tile.axis = r.u32();
    op.tile.tile_extent = r.u32();
    op.tile.item_count = r.u32();
    ops.push_back(std::move(op));
  }
  return ops;
}

void encode_bytecode(Writer& w, const Bytecode& bc) {
  w.u32(static_cast<uint32_t>(bc.instructions.size()));
  for (const auto& ins : bc.instructions) {
    w.u8(static_cast<uint8_t>(ins.op));
    w.u32(ins.operand);
  }
}

Bytecode decode_bytecode(Reader& r) {
  uint32_t n = r.u32();
  Bytecode bc;
  bc.instructions.reserve(n);
  for (uint32_t i = 0; i < n; ++i) {
    uint8_t oc = r.u8();
    if (oc > 4) throw SectionOverlapError("bytecode: bad opcode");
    Instruction ins;
    ins.op = static_cast<Opcode>(oc);
    ins.operand = r.u32();
    bc.instructions.push_back(ins);
  }
  return bc;
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::alloc: return "Alloc";
    case Opcode::dispatch: return "Dispatch";
    case Opcode::wait: return "Wait";
    case Opcode::free_buffer: return "Free";
    case Opcode::ret: return "Return";
  }
  return "?";
}

}  // namespace

uint64_t partition_extent(const OpRecord& op, const CompiledModule& m) {
  const TensorDesc* out = m.buffer_tensor(op.output_buffer);
  if (!out) return 0;
  switch (op.kind) {
    case LayerKind::dense:
      return out->shape.empty() ? 0 : out->shape[0];
    case LayerKind::conv2d:
    case LayerKind::maxpool2d:
      if (out->shape.size() != 4) return 0;
      return uint64_t(out->shape[0]) * out->shape[1] * out->shape[2];
    default:
      return out->element_count();
  }
}

uint64_t partition_unit_bytes(const OpRecord& op, const CompiledModule& m) {
  const TensorDesc* out = m.buffer_tensor(op.output_buffer);
  if (!out) return 0;
  switch (op.kind) {
    case LayerKind::dense:
      return dtype_size(out->dtype);
    case LayerKind::conv2d:
    case LayerKind::maxpool2d:
      if (out->shape.size() != 4) return 0;
      return uint64_t(out->shape[3]) * dtype_size(out->dtype);  // one row
    default:
      return dtype_size(out->dtype);
  }
}

std::vector<Diagnostic> verify_module(const CompiledModule& m) {
  std::vector<Diagnostic> diags;
  auto diag = [&](std::string msg) { diags.push_back({-1, -1, std::move(msg)}); };

  // Metadata.
  const auto& md = m.metadata;
  if (md.worker_count_hint == 0) diag("metadata: worker_count_hint must be >= 1");
  if (md.alignment != 4 && md.alignment != 8 && md.alignment != 16 &&
      md.alignment != 32 && md.alignment != 64)
    diag("metadata: alignment must be one of {4,8,16,32,64}");
  if (md.entry_point.empty()) diag("metadata: entry_point must be non-empty");
  if (!m.find_tensor(md.input_desc)) diag("metadata: input_desc tensor missing");
  if (!m.find_tensor(md.output_desc)) diag("metadata: output_desc tensor missing");

  // Tensors.
  std::set<uint32_t> tids;
  for (const auto& t : m.tensors) {
    if (!tids.insert(t.id).second)
      diag("tensor " + std::to_string(t.id) + ": duplicate id");
    if (t.shape.empty()) diag("tensor " + std::to_string(t.id) + ": empty shape");
    for (uint32_t d : t.shape)
      if (d == 0) diag("tensor " + std::to_string(t.id) + ": zero dimension");
    if (t.dtype == DType::i8 && !t.quant)
      diag("tensor " + std::to_string(t.id) + ": i8 requires quant params");
    if (t.dtype == DType::f32 && t.quant)
      diag("tensor " + std::to_string(t.id) + ": f32 must not carry quant");
    if (t.quant && !(t.quant->scale > 0.0))
      diag("tensor " + std::to_string(t.id) + ": scale must be positive");
    if (t.quant && (t.quant->zero_point < -128 || t.quant->zero_point > 127))
      diag("tensor " + std::to_string(t.id) + ": zero_point outside i8 range");
  }

  // Buffers.
  std::set<uint32_t> bids;
  for (const auto& b : m.buffers) {
    if (!bids.insert(b.buffer_id).second)
      diag("buffer " + std::to_string(b.buffer_id) + ": duplicate id");
    if (b.kind == BufferKind::weights) {
      if (b.tensor_id != kNoTensor)
        diag("buffer " + std::to_string(b.buffer_id) +
             ": weights buffer must not reference a tensor");
      if (b.byte_size == 0)
        diag("buffer " + std::to_string(b.buffer_id) + ": zero byte_size");
    } else {
      const TensorDesc* t = m.find_tensor(b.tensor_id);
      if (!t) {
        diag("buffer " + std::to_string(b.buffer_id) +
             ": references missing tensor " + std::to_string(b.tensor_id));
      } else if (md.alignment != 0 &&
                 b.byte_size != round_up(t->byte_size(), md.alignment)) {
        diag("buffer " + std::to_string(b.buffer_id) +
             ": byte_size != tensor bytes rounded to alignment");
      }
    }
  }

  // Ops.
  std::set<uint32_t> op_ids;
  for (size_t i = 0; i < m.ops.size(); ++i) {
    const OpRecord& op = m.ops[i];
    std::string who = "op " + std::to_string(op.op_id);
    if (op.op_id != i) diag(who + ": op_id must equal its index");
    if (!op_ids.insert(op.op_id).second) diag(who + ": duplicate op_id");

    for (uint32_t b : op.input_buffers)
      if (!m.find_buffer(b))
        diag(who + ": input buffer " + std::to_string(b) + " missing");
    if (!m.find_buffer(op.output_buffer))
      diag(who + ": output buffer " + std::to_string(op.output_buffer) +
           " missing");
    for (uint32_t b : op.input_buffers)
      if (b == op.output_buffer)
        diag(who + ": output buffer also listed as input");

    bool wants_weights =
        op.kind == LayerKind::conv2d || op.kind == LayerKind::dense;
    if (wants_weights && !op.weight_slice)
      diag(who + ": missing weight slice");
    if (!wants_weights && op.weight_slice)
      diag(who + ": unexpected weight slice");
    if (op.weight_slice) {
      uint64_t end = uint64_t(op.weight_slice->offset) + op.weight_slice->length;
      if (end > m.weights.size())
        diag(who + ": weight slice extends past blob end");
    }

    // Attr/kind agreement.
    bool attrs_ok = true;
    switch (op.kind) {
      case LayerKind::conv2d:
        attrs_ok = std::holds_alternative<ConvAttrs>(op.attrs);
        break;
      case LayerKind::maxpool2d:
        attrs_ok = std::holds_alternative<PoolAttrs>(op.attrs);
        break;
      case LayerKind::dense:
        attrs_ok = std::holds_alternative<DenseAttrs>(op.attrs);
        break;
      default:
        attrs_ok = std::holds_alternative<std::monostate>(op.attrs);
        break;
    }
    if (!attrs_ok) {
      diag(who + ": attrs do not match op kind");
      continue;
    }

    // Tile coverage.
    uint64_t extent = partition_extent(op, m);
    if (extent == 0) {
      diag(who + ": cannot determine partition extent");
    } else {
      if (op.tile.axis != 0) diag(who + ": tile axis must be 0 (canonical)");
      if (op.tile.tile_extent == 0) diag(who + ": tile_extent must be >= 1");
      else if (op.tile.item_count != ceil_div(extent, op.tile.tile_extent))
        diag(who + ": item_count != ceil(extent / tile_extent)");
    }

    // Shape agreement between attrs and bound tensors.
    const TensorDesc* in =
        op.input_buffers.empty() ? nullptr : m.buffer_tensor(op.input_buffers[0]);
    const TensorDesc* out = m.buffer_tensor(op.output_buffer);
    if (in && out) {
      ModelGraph shim;
      shim.tensors = {*in, *out};
      shim.weights.resize(m.weights.size());
      LayerDesc l;
      l.kind = op.kind;
      l.inputs = {in->id};
      l.output = out->id;
      if (const auto* a = std::get_if<ConvAttrs>(&op.attrs)) {
        l.kernel_h = a->kernel_h;
        l.kernel_w = a->kernel_w;
        l.stride = a->stride;
        l.out_channels = a->out_channels;
        l.weight_scale = a->weight_scale;
      } else if (const auto* a = std::get_if<PoolAttrs>(&op.attrs)) {
        l.pool_h = a->pool_h;
        l.pool_w = a->pool_w;
        l.stride = a->stride;
      } else if (const auto* a = std::get_if<DenseAttrs>(&op.attrs)) {
        l.in_features = a->in_features;
        l.out_features = a->out_features;
        l.weight_scale = a->weight_scale;
      }
      if (op.weight_slice) {
        l.weight_offset = 0;
        l.bias_offset = 0;
      }
      shim.input_id = in->id;
      shim.output_id = out->id;
      shim.layers = {l};
      // Reuse the graph-level shape rules on the single-op shim; writer and
      // io-bridging rules do not apply here.
      for (const auto& d : validate_graph(shim)) {
        if (d.message.find("never written") != std::string::npos) continue;
        if (d.message.find("must be quantize") != std::string::npos) continue;
        if (d.message.find("must be dequantize") != std::string::npos) continue;
        diag(who + ": " + d.message);
      }
      if (op.weight_slice) {
        ModelGraph sized = shim;
        uint64_t want =
            round_up(weight_bytes(l, sized), 4) + bias_bytes(l, sized);
        if (op.weight_slice->length != want)
          diag(who + ": weight slice length != packed weights+bias size");
      }
    }
  }

  // Bytecode structure.
  const auto& ins = m.program.instructions;
  if (ins.empty() || ins.back().op != Opcode::ret)
    diag("bytecode: program must end with Return");
  for (size_t i = 0; i + 1 < ins.size(); ++i)
    if (ins[i].op == Opcode::ret) diag("bytecode: Return before end of program");

  std::set<uint32_t> allocated, freed;
  // After the last Wait, which buffers have pending writes / were read.
  std::map<uint32_t, uint32_t> dirty;  // buffer -> writer op_id
  std::set<uint32_t> dispatched_ops;
  for (size_t pc = 0; pc < ins.size(); ++pc) {
    const Instruction& in = ins[pc];
    switch (in.op) {
      case Opcode::alloc: {
        const BufferPlan* b = m.find_buffer(in.operand);
        if (!b) { diag("bytecode: Alloc of unknown buffer " + std::to_string(in.operand)); break; }
        if (b->kind != BufferKind::activation)
          diag("bytecode: Alloc of non-activation buffer " + std::to_string(in.operand));
        if (allocated.count(in.operand) || freed.count(in.operand))
          diag("bytecode: double Alloc of buffer " + std::to_string(in.operand));
        allocated.insert(in.operand);
        break;
      }
      case Opcode::free_buffer: {
        if (!allocated.count(in.operand))
          diag("bytecode: Free of unallocated buffer " + std::to_string(in.operand));
        if (freed.count(in.operand))
          diag("bytecode: double Free of buffer " + std::to_string(in.operand));
        if (dirty.count(in.operand))
          diag("bytecode: Free of buffer " + std::to_string(in.operand) +
               " with in-flight writes (missing Wait)");
        freed.insert(in.operand);
        allocated.erase(in.operand);
        break;
      }
      case Opcode::dispatch: {
        const OpRecord* op = nullptr;
        for (const auto& o : m.ops)
          if (o.op_id == in.operand) { op = &o; break; }
        if (!op) { diag("bytecode: Dispatch of unknown op " + std::to_string(in.operand)); break; }
        dispatched_ops.insert(in.operand);
        auto touchable = [&](uint32_t b) {
          const BufferPlan* bp = m.find_buffer(b);
          if (!bp) return;  // already diagnosed
          if (bp->kind == BufferKind::activation && !allocated.count(b))
            diag("bytecode: op " + std::to_string(op->op_id) +
                 " touches buffer " + std::to_string(b) + " before Alloc");
        };
        for (uint32_t b : op->input_buffers) {
          touchable(b);
          auto it = dirty.find(b);
          if (it != dirty.end())
            diag("bytecode: op " + std::to_string(op->op_id) + " reads buffer " +
                 std::to_string(b) + " written by op " +
                 std::to_string(it->second) + " without an intervening Wait");
        }
        touchable(op->output_buffer);
        dirty[op->output_buffer] = op->op_id;
        break;
      }
      case Opcode::wait:
        dirty.clear();
        break;
      case Opcode::ret:
        if (!dirty.empty())
          diag("bytecode: Return with in-flight dispatches (missing Wait)");
        for (uint32_t b : allocated)
          diag("bytecode: buffer " + std::to_string(b) + " never freed");
        break;
    }
  }

  return diags;
}

std::vector<std::byte> encode_module(const CompiledModule& m) {
  auto diags = verify_module(m);
  if (!diags.empty())
    throw VerifyError("cannot encode invalid module:\n" +
                      format_diagnostics(diags));

  Writer sections[6];
  encode_metadata(sections[0], m.metadata);
  encode_tensors(sections[1], m.tensors);
  encode_buffers(sections[2], m.buffers);
  encode_ops(sections[3], m.ops);
  encode_bytecode(sections[4], m.program);
  sections[5].bytes(m.weights);

  Writer w;
  w.bytes(std::span<const std::byte>(
      reinterpret_cast<const std::byte*>(kModuleMagic), 4));
  w.u16(kModuleVersion);
  w.u8(0);  // little-endian marker
  w.u8(0);  // reserved
  w.u32(6);
  uint32_t header_size = 4 + 2 + 1 + 1 + 4 + 6 * 12;
  uint32_t offset = header_size;
  for (int i = 0; i < 6; ++i) {
    w.u32(kSectionOrder[i]);
    w.u32(offset);
    w.u32(static_cast<uint32_t>(sections[i].size()));
    offset += static_cast<uint32_t>(sections[i].size());
  }
  for (int i = 0; i < 6; ++i) {
    auto body = sections[i].take();
    w.bytes(body);
  }
  return w.take();
}

CompiledModule decode_module(std::span<const std::byte> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModuleMagic, 4) != 0)
    throw BadMagicError("bad magic");
  Reader hdr(bytes, "header");
  (void)hdr.u32();  // magic
  uint16_t version = hdr.u16();
  if (version != kModuleVersion)
    throw VersionUnsupportedError("unsupported module version " +
                                  std::to_string(version));
  uint8_t endian = hdr.u8();
  if (endian != 0)
    throw VersionUnsupportedError("non-little-endian module");
  (void)hdr.u8();  // reserved
  uint32_t nsec = hdr.u32();
  if (nsec != 6) throw SectionOverlapError("expected 6 sections");

  struct Sec { uint32_t id, offset, length; };
  std::vector<Sec> secs;
  uint64_t cursor = 4 + 2 + 1 + 1 + 4 + uint64_t(nsec) * 12;
  for (uint32_t i = 0; i < nsec; ++i) {
    Sec s{hdr.u32(), hdr.u32(), hdr.u32()};
    if (s.id != kSectionOrder[i])
      throw SectionOverlapError("unexpected section id " + std::to_string(s.id));
    if (s.offset != cursor)
      throw SectionOverlapError("section " + std::to_string(s.id) +
                                " offset overlaps or leaves a gap");
    if (uint64_t(s.offset) + s.length > bytes.size())
      throw SectionOverlapError("section " + std::to_string(s.id) +
                                " extends past end of file");
    cursor = uint64_t(s.offset) + s.length;
    secs.push_back(s);
  }
  if (cursor != bytes.size())
    throw SectionOverlapError("trailing bytes after last section");

  auto sec_span = [&](int i) {
    return bytes.subspan(secs[i].offset, secs[i].length);
  };

  CompiledModule m;
  {
    Reader r(sec_span(0), "metadata");
    m.metadata = decode_metadata(r);
    if (!r.done()) throw SectionOverlapError("metadata: trailing bytes");
  }
  {
    Reader r(sec_span(1), "tensors");
    m.tensors = decode_tensors(r);
    if (!r.done()) throw SectionOverlapError("tensors: trailing bytes");
  }
  {
    Reader r(sec_span(2), "buffers");
    m.buffers = decode_buffers(r);
    if (!r.done()) throw SectionOverlapError("buffers: trailing bytes");
  }
  {
    Reader r(sec_span(3), "ops");
    m.ops = decode_ops(r);
    if (!r.done()) throw SectionOverlapError("ops: trailing bytes");
  }
  {
    Reader r(sec_span(4), "bytecode");
    m.program = decode_bytecode(r);
    if (!r.done()) throw SectionOverlapError("bytecode: trailing bytes");
  }
  {
    Reader r(sec_span(5), "weights");
    m.weights = r.rest();
  }

  auto diags = verify_module(m);
  if (!diags.empty())
    throw VerifyError("decoded module fails verification:\n" +
                      format_diagnostics(diags));
  return m;
}

void write_module(const CompiledModule& m, const std::filesystem::path& path) {
  auto bytes = encode_module(m);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open module file for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write on module file: " + path.string());
}

CompiledModule read_module(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open module file: " + path.string());
  f.seekg(0, std::ios::end);
  std::vector<std::byte> bytes(static_cast<size_t>(f.tellg()));
  f.seekg(0);
  f.read(reinterpret_cast<char*>(bytes.data()),
         static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short read on module file: " + path.string());
  return decode_module(bytes);
}

uint64_t analyze_peak_heap(const CompiledModule& m) {
  uint64_t live = 0, peak = 0;
  for (const auto& ins : m.program.instructions) {
    if (ins.op == Opcode::alloc) {
      if (const BufferPlan* b = m.find_buffer(ins.operand)) {
        live += b->byte_size;
        peak = std::max(peak, live);
      }
    } else if (ins.op == Opcode::free_buffer) {
      if (const BufferPlan* b = m.find_buffer(ins.operand)) live -= b->byte_size;
    }
  }
  return peak;
}

std::string disassemble(const CompiledModule& m) {
  std::ostringstream os;
  uint64_t live = 0;
  for (size_t pc = 0; pc < m.program.instructions.size(); ++pc) {
    const Instruction& ins = m.program.instructions[pc];
    os << pc << ": " << opcode_name(ins.op);
    switch (ins.op) {
      case Opcode::alloc:
      case Opcode::free_buffer: {
        const BufferPlan* b = m.find_buffer(ins.operand);
        uint64_t sz = b ? b->byte_size : 0;
        live += (ins.op == Opcode::alloc) ? sz : -sz;
        os << " buffer " << ins.operand << " (" << sz << " B, live " << live
           << " B)";
        break;
      }
      case Opcode::dispatch: {
        os << " op " << ins.operand;
        for (const auto& op : m.ops)
          if (op.op_id == ins.operand)
            os << " (" << layer_kind_name(op.kind) << ", "
               << op.tile.item_count << " item"
               << (op.tile.item_count == 1 ? "" : "s") << " x "
               << op.tile.tile_extent << ")";
        break;
      }
      default:
        break;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace arielml
