// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Greedy multicore scheduler: a FIFO workload queue drained by a pool of
// workers, one item at a time, until empty. Completion order is
// unconstrained; the executor's barrier is the only ordering point. A
// deterministic virtual-clock simulation of the same policy exists for
// timing-free property tests.

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "arielml/errors.hpp"
#include "arielml/kernels.hpp"

namespace arielml {

// One contention-free slice of an operator's computation.
struct WorkItem {
  const OpContext* ctx = nullptr;
  uint32_t op_id = 0;
  uint32_t item_index = 0;
  uint32_t begin = 0, end = 0;  // partition units
};

// Filled by the worker that executed the item; slots are pre-allocated per
// dispatch so recording is contention-free.
struct ItemStats {
  uint32_t worker = 0;
  uint64_t start_ns = 0;
  uint64_t end_ns = 0;
  uint64_t pop_seq = 0;  // global FIFO pop order
};

struct PendingItem {
  WorkItem item;
  ItemStats* stats = nullptr;
};

// Single-producer multi-consumer FIFO with a closed flag. Consumers poll
// with try_pop (workers spin while an inference is active) and fall back
// to wait_for_work when idle.
class WorkloadQueue {
 public:
  void push(std::vector<PendingItem>&& items);
  std::optional<PendingItem> try_pop();
  // Blocks until items may be available or the queue is closed.
  void wait_for_work();
  void close();
  void reopen();
  size_t approx_size() const {
    return approx_size_.load(std::memory_order_acquire);
  }
  bool is_closed() const { return closed_hint_.load(std::memory_order_acquire); }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<PendingItem> items_;
  std::atomic<size_t> approx_size_{0};
  std::atomic<bool> closed_hint_{false};
  uint64_t pop_counter_ = 0;
  bool closed_ = false;
};

class WorkerPool {
 public:
  explicit WorkerPool(uint32_t workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  // Joins and respawns workers; rejected while a run is active.
  void resize(uint32_t workers);
  uint32_t size() const { return static_cast<uint32_t>(workers_.size()); }

  // Brackets one inference. Scratch high-water marks reset at begin_run.
  void begin_run(uint64_t jitter_seed = 0, uint32_t jitter_max_us = 0);
  // stats, when given, must stay alive until the next barrier() returns and
  // must have one slot per item.
  void submit(std::vector<WorkItem> items, std::vector<ItemStats>* stats);
  // Blocks until every submitted item finished; surfaces the first worker
  // failure as ExecutionError (remaining items are drained unexecuted).
  void barrier();
  void end_run();

  std::vector<uint64_t> scratch_peaks() const;
  bool run_active() const { return run_active_.load(); }

 private:
  void spawn(uint32_t workers);
  void join_all();
  void worker_main(uint32_t wid);

  WorkloadQueue queue_;
  std::atomic<int64_t> inflight_{0};
  std::atomic<bool> run_active_{false};
  std::atomic<bool> failed_{false};

  std::mutex done_mu_;
  std::condition_variable cv_done_;

  std::mutex err_mu_;
  std::exception_ptr error_;
  uint32_t error_op_ = 0, error_item_ = 0;

  uint64_t jitter_seed_ = 0;
  uint32_t jitter_max_us_ = 0;

  std::vector<std::thread> workers_;
  std::vector<std::unique_ptr<ScratchArena>> scratch_;
};

// Deterministic greedy-FIFO schedule under a virtual clock: item i is
// assigned to the earliest-available worker (lowest id on ties) and runs
// for costs[i] ticks. All items are ready at tick 0.
struct SimEvent {
  uint32_t item_index = 0;
  uint32_t worker = 0;
  uint64_t start = 0, end = 0;
};

struct SimSchedule {
  std::vector<SimEvent> events;  // in assignment (FIFO) order
  uint64_t makespan = 0;
  uint32_t workers = 1;
};

SimSchedule simulate_greedy(std::span<const uint64_t> costs, uint32_t workers);

}  // namespace arielml
