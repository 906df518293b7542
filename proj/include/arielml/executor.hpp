// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bytecode interpreter: turns module instructions into commands, decodes
// Dispatch commands into work items via each op's tile configuration and
// enforces Wait barriers. One control context advances the program; only
// pool workers execute kernels.

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "arielml/kernels.hpp"
#include "arielml/module.hpp"
#include "arielml/scheduler.hpp"

namespace arielml {

// Heap arena backing activation buffers. Byte accounting follows the
// BufferPlan sizes exactly, so the measured peak matches the analytic
// Alloc/Free scan of the bytecode.
class MemoryArena {
 public:
  explicit MemoryArena(uint64_t cap_bytes = 0) : cap_(cap_bytes) {}

  std::span<std::byte> allocate(uint32_t buffer_id, uint64_t bytes);
  void release(uint32_t buffer_id);
  std::span<std::byte> view(uint32_t buffer_id);
  bool live(uint32_t buffer_id) const { return live_.count(buffer_id) != 0; }

  uint64_t live_bytes() const { return live_bytes_; }
  uint64_t peak_bytes() const { return peak_bytes_; }
  uint64_t total_allocs() const { return total_allocs_; }
  uint64_t total_frees() const { return total_frees_; }

 private:
  struct Block {
    std::unique_ptr<std::byte[]> data;
    uint64_t size = 0;
  };
  std::map<uint32_t, Block> live_;
  uint64_t cap_ = 0;
  uint64_t live_bytes_ = 0;
  uint64_t peak_bytes_ = 0;
  uint64_t total_allocs_ = 0;
  uint64_t total_frees_ = 0;
};

struct SimTraceRow {
  uint32_t op_id = 0;
  uint32_t item_index = 0;
  uint32_t worker = 0;
  uint64_t vstart = 0, vend = 0;  // virtual clock ticks
};

struct RunOptions {
  uint64_t arena_cap_bytes = 0;  // 0 = unbounded
  uint64_t jitter_seed = 0;
  uint32_t jitter_max_us = 0;    // > 0 injects per-item start jitter
  bool simulate = false;         // virtual-clock scheduling, single context
  uint32_t sim_workers = 0;      // virtual worker count; 0 = metadata hint
  bool verify = true;            // verify_module before executing
  std::function<void(const SimTraceRow&)> sim_trace;
};

struct OpTiming {
  uint32_t op_id = 0;
  uint32_t items = 0;
  uint64_t wall_ns = 0;    // dispatch to barrier completion
  uint64_t worker_ns = 0;  // sum of item execution times
  std::vector<ItemStats> item_stats;
};

struct RunResult {
  std::vector<float> output;
  uint64_t total_ns = 0;
  std::vector<OpTiming> op_timings;
  uint64_t peak_heap_bytes = 0;
  uint64_t arena_live_at_return = 0;
  uint64_t arena_total_allocs = 0;
  uint64_t arena_total_frees = 0;
  std::vector<uint64_t> scratch_peak_bytes;  // per worker
  uint32_t workers_used = 1;
};

// Work items for one dispatch: item_count ranges per the op's TileConfig,
// pairwise disjoint and covering [0, extent).
std::vector<std::pair<uint32_t, uint32_t>> item_ranges(const OpRecord& op,
                                                       const CompiledModule& m);

// Step-at-a-time executor; exposed so tests can drive single instructions.
class Executor {
 public:
  // `pool` may be null in simulate mode. `input` must outlive execution.
  Executor(const CompiledModule& m, std::span<const float> input,
           WorkerPool* pool, const RunOptions& opts);
  ~Executor();

  // Executes the instruction at pc. Returns false once Return executed.
  bool step();
  bool done() const { return done_; }
  RunResult take_result();

 private:
  void dispatch(uint32_t op_id);
  void wait_barrier();
  const BufferPlan& plan(uint32_t buffer_id) const;
  std::span<std::byte> writable_view(uint32_t buffer_id);
  std::span<const std::byte> readable_view(uint32_t buffer_id);

  const CompiledModule& m_;
  std::span<const float> input_;
  WorkerPool* pool_;
  RunOptions opts_;
  MemoryArena arena_;
  std::vector<std::byte> io_out_;
  size_t pc_ = 0;
  bool done_ = false;
  bool run_open_ = false;

  struct OpenOp {
    uint32_t op_id;
    uint64_t start_ns;
    std::unique_ptr<OpContext> ctx;
    std::vector<ItemStats> stats;
  };
  std::vector<OpenOp> open_ops_;  // dispatched since the last Wait
  std::vector<OpTiming> timings_;
  ScratchArena sim_scratch_;
  uint64_t sim_clock_ = 0;
  uint64_t start_ns_ = 0;
};

// Interprets the whole program and returns output plus run statistics.
RunResult run_inference(const CompiledModule& m, std::span<const float> input,
                        WorkerPool& pool, const RunOptions& opts = {});

// One-shot convenience: private pool with `workers` workers.
std::vector<float> run_inference(const CompiledModule& m,
                                 std::span<const float> input,
                                 uint32_t workers);

}  // namespace arielml
