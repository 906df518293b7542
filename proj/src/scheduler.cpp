// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/scheduler.hpp"

#include <algorithm>
#include <chrono>

#if defined(__x86_64__) || defined(__i386__)
#include <immintrin.h>
#define ARIELML_PAUSE() _mm_pause()
#else
#define ARIELML_PAUSE() std::this_thread::yield()
#endif

namespace arielml {

namespace {

inline uint64_t now_ns() {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Idle workers spin this many pauses before sleeping, so back-to-back
// inferences (profiling repeats, benchmarks) never pay a futex wake.
constexpr uint32_t kIdleSpins = 1u << 16;

}  // namespace

void WorkloadQueue::push(std::vector<PendingItem>&& items) {
  {
    std::lock_guard lk(mu_);
    for (auto& it : items) items_.push_back(std::move(it));
    approx_size_.store(items_.size(), std::memory_order_release);
  }
  cv_.notify_all();
}

std::optional<PendingItem> WorkloadQueue::try_pop() {
  std::lock_guard lk(mu_);
  if (items_.empty()) return std::nullopt;
  PendingItem it = std::move(items_.front());
  items_.pop_front();
  approx_size_.store(items_.size(), std::memory_order_release);
  if (it.stats) it.stats->pop_seq = pop_counter_;
  ++pop_counter_;
  return it;
}

void WorkloadQueue::wait_for_work() {
  std::unique_lock lk(mu_);
  cv_.wait(lk, [&] { return closed_ || !items_.empty(); });
}

void WorkloadQueue::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
    closed_hint_.store(true, std::memory_order_release);
  }
  cv_.notify_all();
}

void WorkloadQueue::reopen() {
  std::lock_guard lk(mu_);
  closed_ = false;
  closed_hint_.store(false, std::memory_order_release);
  pop_counter_ = 0;
}

WorkerPool::WorkerPool(uint32_t workers) {
  if (workers == 0) throw ValidationError("worker count must be >= 1");
  spawn(workers);
}

WorkerPool::~WorkerPool() { join_all(); }

void WorkerPool::spawn(uint32_t workers) {
  queue_.reopen();
  scratch_.clear();
  for (uint32_t i = 0; i < workers; ++i)
    scratch_.push_back(std::make_unique<ScratchArena>());
  for (uint32_t i = 0; i < workers; ++i)
    workers_.emplace_back([this, i] { worker_main(i); });
}

void WorkerPool::join_all() {
  queue_.close();
  for (auto& t : workers_) t.join();
  workers_.clear();
}

void WorkerPool::resize(uint32_t workers) {
  if (workers == 0) throw ValidationError("worker count must be >= 1");
  if (run_active_.load()) throw BusyError("cannot resize during an inference");
  if (workers == size()) return;
  join_all();
  spawn(workers);
}

void WorkerPool::begin_run(uint64_t jitter_seed, uint32_t jitter_max_us) {
  if (run_active_.exchange(true))
    throw BusyError("an inference is already in flight");
  failed_.store(false);
  {
    std::lock_guard lk(err_mu_);
    error_ = nullptr;
  }
  jitter_seed_ = jitter_seed;
  jitter_max_us_ = jitter_max_us;
  for (auto& s : scratch_) s->reset_high_water();
}

void WorkerPool::submit(std::vector<WorkItem> items,
                        std::vector<ItemStats>* stats) {
  std::vector<PendingItem> pending;
  pending.reserve(items.size());
  for (size_t i = 0; i < items.size(); ++i)
    pending.push_back({items[i], stats ? &(*stats)[i] : nullptr});
  inflight_.fetch_add(static_cast<int64_t>(pending.size()),
                      std::memory_order_acq_rel);
  queue_.push(std::move(pending));
}

void WorkerPool::barrier() {
  // Short spin, then sleep; the executor must not burn a core while
  // workers compute.
  for (int i = 0; i < 2048; ++i) {
    if (inflight_.load(std::memory_order_acquire) == 0) break;
    ARIELML_PAUSE();
  }
  if (inflight_.load(std::memory_order_acquire) != 0) {
    std::unique_lock lk(done_mu_);
    cv_done_.wait(lk, [&] {
      return inflight_.load(std::memory_order_acquire) == 0;
    });
  }
  if (failed_.load()) {
    std::lock_guard lk(err_mu_);
    failed_.store(false);
    std::string what = "worker failure";
    try {
      if (error_) std::rethrow_exception(error_);
    } catch (const std::exception& e) {
      what = e.what();
    }
    error_ = nullptr;
    throw ExecutionError(error_op_, error_item_, what);
  }
}

void WorkerPool::end_run() { run_active_.store(false); }

std::vector<uint64_t> WorkerPool::scratch_peaks() const {
  std::vector<uint64_t> out;
  out.reserve(scratch_.size());
  for (const auto& s : scratch_) out.push_back(s->high_water());
  return out;
}

void WorkerPool::worker_main(uint32_t wid) {
  ScratchArena& scratch = *scratch_[wid];
  uint32_t spins = 0;
  for (;;) {
    std::optional<PendingItem> pi;
    if (queue_.approx_size() != 0) pi = queue_.try_pop();
    if (!pi) {
      if (queue_.is_closed()) {
        if (queue_.approx_size() == 0) return;
        continue;
      }
      if (run_active_.load(std::memory_order_acquire)) {
        // Stay hot for the whole inference; yield now and then so the
        // executor can run when workers outnumber cores.
        ARIELML_PAUSE();
        if ((++spins & 0x3FF) == 0) std::this_thread::yield();
      } else if (++spins < kIdleSpins) {
        ARIELML_PAUSE();
      } else {
        queue_.wait_for_work();
        spins = 0;
      }
      continue;
    }
    spins = 0;

    const WorkItem& item = pi->item;
    if (!failed_.load(std::memory_order_acquire)) {
      if (jitter_max_us_ > 0) {
        uint64_t h = splitmix64(jitter_seed_ ^ (uint64_t(item.op_id) << 32) ^
                                item.item_index);
        uint64_t delay = (h % (uint64_t(jitter_max_us_) + 1)) * 1000;
        uint64_t until = now_ns() + delay;
        while (now_ns() < until) ARIELML_PAUSE();
      }
      uint64_t t0 = now_ns();
      try {
        run_kernel(*item.ctx, item.begin, item.end, scratch);
        if (pi->stats) {
          pi->stats->worker = wid;
          pi->stats->start_ns = t0;
          pi->stats->end_ns = now_ns();
        }
      } catch (...) {
        std::lock_guard lk(err_mu_);
        if (!error_) {
          error_ = std::current_exception();
          error_op_ = item.op_id;
          error_item_ = item.item_index;
        }
        failed_.store(true, std::memory_order_release);
      }
    }
    // Drained-without-execution items still count down so the barrier
    // releases and can report the failure.
    if (inflight_.fetch_sub(1, std::memory_order_acq_rel) == 1) {
      std::lock_guard lk(done_mu_);
      cv_done_.notify_all();
    }
  }
}

SimSchedule simulate_greedy(std::span<const uint64_t> costs, uint32_t workers) {
  if (workers == 0) throw ValidationError("worker count must be >= 1");
  SimSchedule s;
  s.workers = workers;
  std::vector<uint64_t> avail(workers, 0);
  for (size_t i = 0; i < costs.size(); ++i) {
    uint32_t w = 0;
    for (uint32_t j = 1; j < workers; ++j)
      if (avail[j] < avail[w]) w = j;
    SimEvent e;
    e.item_index = static_cast<uint32_t>(i);
    e.worker = w;
    e.start = avail[w];
    e.end = e.start + costs[i];
    avail[w] = e.end;
    s.makespan = std::max(s.makespan, e.end);
    s.events.push_back(e);
  }
  return s;
}

}  // namespace arielml
