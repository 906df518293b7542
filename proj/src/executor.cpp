// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>

namespace arielml {

namespace {

inline uint64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::span<std::byte> MemoryArena::allocate(uint32_t buffer_id, uint64_t bytes) {
  if (live_.count(buffer_id))
    throw AllocError("double alloc of buffer " + std::to_string(buffer_id));
  if (cap_ != 0 && live_bytes_ + bytes > cap_)
    throw AllocError("arena cap exceeded allocating buffer " +
                     std::to_string(buffer_id) + " (" +
                     std::to_string(live_bytes_ + bytes) + " > " +
                     std::to_string(cap_) + " bytes)");
  Block b;
  b.data = std::make_unique<std::byte[]>(bytes);
  b.size = bytes;
  std::span<std::byte> out{b.data.get(), bytes};
  live_bytes_ += bytes;
  peak_bytes_ = std::max(peak_bytes_, live_bytes_);
  ++total_allocs_;
  live_.emplace(buffer_id, std::move(b));
  return out;
}

void MemoryArena::release(uint32_t buffer_id) {
  auto it = live_.find(buffer_id);
  if (it == live_.end())
    throw AllocError("free of non-live buffer " + std::to_string(buffer_id));
  live_bytes_ -= it->second.size;
  ++total_frees_;
  live_.erase(it);
}

std::span<std::byte> MemoryArena::view(uint32_t buffer_id) {
  auto it = live_.find(buffer_id);
  if (it == live_.end())
    throw AllocError("view of non-live buffer " + std::to_string(buffer_id));
  return {it->second.data.get(), it->second.size};
}

std::vector<std::pair<uint32_t, uint32_t>> item_ranges(
    const OpRecord& op, const CompiledModule& m) {
  uint64_t extent = partition_extent(op, m);
  std::vector<std::pair<uint32_t, uint32_t>> out;
  out.reserve(op.tile.item_count);
  for (uint32_t i = 0; i < op.tile.item_count; ++i) {
    uint64_t b = uint64_t(i) * op.tile.tile_extent;
    uint64_t e = std::min<uint64_t>(extent, b + op.tile.tile_extent);
    out.emplace_back(static_cast<uint32_t>(b), static_cast<uint32_t>(e));
  }
  return out;
}

Executor::Executor(const CompiledModule& m, std::span<const float> input,
                   WorkerPool* pool, const RunOptions& opts)
    : m_(m), input_(input), pool_(pool), opts_(opts),
      arena_(opts.arena_cap_bytes) {
  if (opts_.verify) {
    auto diags = verify_module(m_);
    if (!diags.empty())
      throw VerifyError("module failed verification:\n" +
                        format_diagnostics(diags));
  }
  const TensorDesc* in = m_.find_tensor(m_.metadata.input_desc);
  const TensorDesc* out = m_.find_tensor(m_.metadata.output_desc);
  if (!in || !out) throw VerifyError("module io descriptors missing");
  if (in->dtype != DType::f32 || out->dtype != DType::f32)
    throw ShapeMismatchError("module io tensors must be f32");
  if (input.size() != in->element_count())
    throw ShapeMismatchError("input has " + std::to_string(input.size()) +
                             " elements, module expects " +
                             std::to_string(in->element_count()));
  io_out_.resize(out->byte_size());
  // Degenerate module whose output tensor IS the input: plain copy.
  if (m_.metadata.output_desc == m_.metadata.input_desc)
    std::memcpy(io_out_.data(), input.data(), io_out_.size());
  if (!opts_.simulate && !pool_)
    throw ValidationError("real execution requires a worker pool");
  if (pool_ && !opts_.simulate) {
    pool_->begin_run(opts_.jitter_seed, opts_.jitter_max_us);
    run_open_ = true;
  }
  start_ns_ = now_ns();
}

Executor::~Executor() {
  if (run_open_) {
    // Unwind path: make sure no items stay in flight before releasing.
    try { pool_->barrier(); } catch (...) {}
    pool_->end_run();
  }
}

const BufferPlan& Executor::plan(uint32_t buffer_id) const {
  const BufferPlan* b = m_.find_buffer(buffer_id);
  if (!b) throw VerifyError("unknown buffer " + std::to_string(buffer_id));
  return *b;
}

std::span<std::byte> Executor::writable_view(uint32_t buffer_id) {
  const BufferPlan& b = plan(buffer_id);
  if (b.kind == BufferKind::io) {
    if (b.tensor_id == m_.metadata.output_desc)
      return {io_out_.data(), io_out_.size()};
    throw VerifyError("op writes the module input buffer");
  }
  return arena_.view(buffer_id);
}

std::span<const std::byte> Executor::readable_view(uint32_t buffer_id) {
  const BufferPlan& b = plan(buffer_id);
  if (b.kind == BufferKind::io) {
    if (b.tensor_id == m_.metadata.input_desc)
      return {reinterpret_cast<const std::byte*>(input_.data()),
              input_.size() * sizeof(float)};
    return {io_out_.data(), io_out_.size()};
  }
  if (b.kind == BufferKind::weights)
    throw VerifyError("weights buffers bind via the op weight slice");
  return arena_.view(buffer_id);
}

void Executor::dispatch(uint32_t op_id) {
  const OpRecord& op = m_.ops.at(op_id);

  auto ctx = std::make_unique<OpContext>();
  ctx->op = &op;
  ctx->in_desc = m_.buffer_tensor(op.input_buffers.at(0));
  ctx->out_desc = m_.buffer_tensor(op.output_buffer);
  ctx->input = readable_view(op.input_buffers.at(0));
  if (op.weight_slice)
    ctx->weights = std::span<const std::byte>(
        m_.weights.data() + op.weight_slice->offset, op.weight_slice->length);
  ctx->output = writable_view(op.output_buffer);

  auto ranges = item_ranges(op, m_);
  OpenOp open;
  open.op_id = op_id;
  open.start_ns = opts_.simulate ? sim_clock_ : now_ns();
  open.ctx = std::move(ctx);
  open.stats.resize(ranges.size());

  if (opts_.simulate) {
    // Virtual-clock greedy schedule; items execute serially in FIFO order.
    std::vector<uint64_t> costs;
    costs.reserve(ranges.size());
    for (auto [b, e] : ranges) costs.push_back(e - b);
    uint32_t vworkers = opts_.sim_workers ? opts_.sim_workers
                                           : std::max(1u, m_.metadata.worker_count_hint);
    SimSchedule sched = simulate_greedy(costs, vworkers);
    for (const SimEvent& ev : sched.events) {
      auto [b, e] = ranges[ev.item_index];
      run_kernel(*open.ctx, b, e, sim_scratch_);
      open.stats[ev.item_index] = {ev.worker, sim_clock_ + ev.start,
                                   sim_clock_ + ev.end, ev.item_index};
      if (opts_.sim_trace)
        opts_.sim_trace({op_id, ev.item_index, ev.worker, sim_clock_ + ev.start,
                         sim_clock_ + ev.end});
    }
    sim_clock_ += sched.makespan;
  } else {
    std::vector<WorkItem> items;
    items.reserve(ranges.size());
    for (uint32_t i = 0; i < ranges.size(); ++i)
      items.push_back({open.ctx.get(), op_id, i, ranges[i].first,
                       ranges[i].second});
    pool_->submit(std::move(items), &open.stats);
  }
  open_ops_.push_back(std::move(open));
}

void Executor::wait_barrier() {
  if (!opts_.simulate) pool_->barrier();
  uint64_t t = opts_.simulate ? sim_clock_ : now_ns();
  for (auto& open : open_ops_) {
    OpTiming ot;
    ot.op_id = open.op_id;
    ot.items = static_cast<uint32_t>(open.stats.size());
    ot.wall_ns = t - open.start_ns;
    for (const auto& s : open.stats) ot.worker_ns += s.end_ns - s.start_ns;
    ot.item_stats = std::move(open.stats);
    timings_.push_back(std::move(ot));
  }
  open_ops_.clear();
}

bool Executor::step() {
  if (done_) return false;
  const Instruction& ins = m_.program.instructions.at(pc_++);
  switch (ins.op) {
    case Opcode::alloc:
      arena_.allocate(ins.operand, plan(ins.operand).byte_size);
      break;
    case Opcode::free_buffer:
      arena_.release(ins.operand);
      break;
    case Opcode::dispatch:
      dispatch(ins.operand);
      break;
    case Opcode::wait:
      wait_barrier();
      break;
    case Opcode::ret:
      if (!open_ops_.empty()) wait_barrier();  // defensive for hand-built code
      done_ = true;
      break;
  }
  return !done_;
}

RunResult Executor::take_result() {
  RunResult r;
  const TensorDesc* out = m_.find_tensor(m_.metadata.output_desc);
  r.output.resize(out->element_count());
  std::memcpy(r.output.data(), io_out_.data(), r.output.size() * sizeof(float));
  r.total_ns = opts_.simulate ? sim_clock_ : now_ns() - start_ns_;
  r.op_timings = std::move(timings_);
  r.peak_heap_bytes = arena_.peak_bytes();
  r.arena_live_at_return = arena_.live_bytes();
  r.arena_total_allocs = arena_.total_allocs();
  r.arena_total_frees = arena_.total_frees();
  if (opts_.simulate) {
    r.scratch_peak_bytes = {sim_scratch_.high_water()};
    r.workers_used = opts_.sim_workers ? opts_.sim_workers
                                       : std::max(1u, m_.metadata.worker_count_hint);
  } else {
    r.workers_used = pool_->size();
    if (run_open_) {
      pool_->end_run();
      run_open_ = false;
    }
    r.scratch_peak_bytes = pool_->scratch_peaks();
  }
  return r;
}

RunResult run_inference(const CompiledModule& m, std::span<const float> input,
                        WorkerPool& pool, const RunOptions& opts) {
  Executor ex(m, input, &pool, opts);
  while (ex.step()) {
  }
  return ex.take_result();
}

std::vector<float> run_inference(const CompiledModule& m,
                                 std::span<const float> input,
                                 uint32_t workers) {
  WorkerPool pool(workers);
  return run_inference(m, input, pool, {}).output;
}

}  // namespace arielml
