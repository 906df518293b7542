// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Latency and memory profiling: end-to-end wall time, per-operator
// barrier-to-barrier latency, arena peak heap and per-worker scratch
// high-water marks. Report schema documented in docs/profile-schema.md.

#pragma once

#include <string>
#include <vector>

#include "arielml/executor.hpp"
#include "arielml/module.hpp"

namespace arielml {

struct OpProfile {
  uint32_t op_id = 0;
  LayerKind kind = LayerKind::dense;
  uint32_t items = 0;
  uint64_t wall_ns = 0;
  uint64_t worker_ns = 0;
};

struct ProfileReport {
  uint64_t total_ns = 0;
  std::vector<OpProfile> per_op;
  uint64_t peak_heap_bytes = 0;
  std::vector<uint64_t> per_worker_scratch_peak_bytes;
  uint32_t workers_used = 1;
  uint32_t repeats = 1;
};

enum class ReportFormat { table, json, csv };

// Runs `repeats` inferences and reports the run with the median total time
// (lower middle for even repeat counts), so per-op numbers stay mutually
// consistent. Instrumentation is observational: outputs are unaffected.
ProfileReport profile_inference(const CompiledModule& m,
                                std::span<const float> input, WorkerPool& pool,
                                uint32_t repeats,
                                const RunOptions& opts = {});

// Builds the report view of a single finished run.
ProfileReport report_from_run(const CompiledModule& m, const RunResult& run,
                              uint32_t repeats);

std::string render_report(const ProfileReport& r, ReportFormat format);

// Parses the JSON rendering back (schema round-trip support).
ProfileReport report_from_json(const std::string& json_text);

struct BenchRow {
  uint32_t workers = 1;
  uint64_t median_total_ns = 0;
  double speedup = 1.0;  // vs the first row
};

// Median total latency per worker count, one shared pool resized between
// entries; speedup is relative to the first entry.
std::vector<BenchRow> bench_module(const CompiledModule& m,
                                   std::span<const float> input,
                                   const std::vector<uint32_t>& workers_list,
                                   uint32_t repeats);

}  // namespace arielml
