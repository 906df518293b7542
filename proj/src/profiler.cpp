// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/profiler.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace arielml {

ProfileReport report_from_run(const CompiledModule& m, const RunResult& run,
                              uint32_t repeats) {
  ProfileReport r;
  r.total_ns = run.total_ns;
  r.peak_heap_bytes = run.peak_heap_bytes;
  r.per_worker_scratch_peak_bytes = run.scratch_peak_bytes;
  r.workers_used = run.workers_used;
  r.repeats = repeats;
  for (const OpTiming& t : run.op_timings) {
    OpProfile p;
    p.op_id = t.op_id;
    p.kind = m.ops.at(t.op_id).kind;
    p.items = t.items;
    p.wall_ns = t.wall_ns;
    p.worker_ns = t.worker_ns;
    r.per_op.push_back(p);
  }
  return r;
}

ProfileReport profile_inference(const CompiledModule& m,
                                std::span<const float> input, WorkerPool& pool,
                                uint32_t repeats, const RunOptions& opts) {
  if (repeats == 0) throw ValidationError("repeats must be >= 1");
  std::vector<RunResult> runs;
  runs.reserve(repeats);
  for (uint32_t i = 0; i < repeats; ++i)
    runs.push_back(run_inference(m, input, pool, opts));

  std::vector<size_t> order(runs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return runs[a].total_ns < runs[b].total_ns;
  });
  const RunResult& median = runs[order[(order.size() - 1) / 2]];
  return report_from_run(m, median, repeats);
}

std::string render_report(const ProfileReport& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::json: {
      nlohmann::json j;
      j["total_ns"] = r.total_ns;
      j["workers"] = r.workers_used;
      j["repeats"] = r.repeats;
      j["peak_heap_bytes"] = r.peak_heap_bytes;
      j["per_worker_scratch_peak_bytes"] = r.per_worker_scratch_peak_bytes;
      j["ops"] = nlohmann::json::array();
      for (const auto& op : r.per_op) {
        j["ops"].push_back({{"op_id", op.op_id},
                            {"kind", layer_kind_name(op.kind)},
                            {"items", op.items},
                            {"wall_ns", op.wall_ns},
                            {"worker_ns", op.worker_ns}});
      }
      return j.dump(2) + "\n";
    }
    case ReportFormat::csv: {
      std::ostringstream os;
      os << "op_id,kind,items,wall_ns,worker_ns\n";
      for (const auto& op : r.per_op)
        os << op.op_id << "," << layer_kind_name(op.kind) << "," << op.items
           << "," << op.wall_ns << "," << op.worker_ns << "\n";
      return os.str();
    }
    case ReportFormat::table: {
      std::ostringstream os;
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%-6s %-11s %6s %14s %14s\n", "op",
                    "kind", "items", "wall_ns", "worker_ns");
      os << buf;
      uint64_t wall_sum = 0, worker_sum = 0;
      for (const auto& op : r.per_op) {
        std::snprintf(buf, sizeof(buf), "%-6u %-11s %6u %14llu %14llu\n",
                      op.op_id, layer_kind_name(op.kind), op.items,
                      static_cast<unsigned long long>(op.wall_ns),
                      static_cast<unsigned long long>(op.worker_ns));
        os << buf;
        wall_sum += op.wall_ns;
        worker_sum += op.worker_ns;
      }
      std::snprintf(buf, sizeof(buf), "%-6s %-11s %6s %14llu %14llu\n", "total",
                    "", "", static_cast<unsigned long long>(wall_sum),
                    static_cast<unsigned long long>(worker_sum));
      os << buf;
      std::snprintf(buf, sizeof(buf),
                    "end-to-end %llu ns, workers %u, peak heap %llu B\n",
                    static_cast<unsigned long long>(r.total_ns),
                    r.workers_used,
                    static_cast<unsigned long long>(r.peak_heap_bytes));
      os << buf;
      std::ostringstream sc;
      for (size_t i = 0; i < r.per_worker_scratch_peak_bytes.size(); ++i)
        sc << (i ? " " : "") << r.per_worker_scratch_peak_bytes[i];
      os << "scratch high-water per worker: [" << sc.str() << "] B\n";
      return os.str();
    }
  }
  return "";
}

ProfileReport report_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text);
  ProfileReport r;
  r.total_ns = j.at("total_ns").get<uint64_t>();
  r.workers_used = j.at("workers").get<uint32_t>();
  r.repeats = j.at("repeats").get<uint32_t>();
  r.peak_heap_bytes = j.at("peak_heap_bytes").get<uint64_t>();
  r.per_worker_scratch_peak_bytes =
      j.at("per_worker_scratch_peak_bytes").get<std::vector<uint64_t>>();
  for (const auto& o : j.at("ops")) {
    OpProfile p;
    p.op_id = o.at("op_id").get<uint32_t>();
    auto kind = layer_kind_from_name(o.at("kind").get<std::string>());
    if (!kind) throw ParseError("profile json: unknown op kind");
    p.kind = *kind;
    p.items = o.at("items").get<uint32_t>();
    p.wall_ns = o.at("wall_ns").get<uint64_t>();
    p.worker_ns = o.at("worker_ns").get<uint64_t>();
    r.per_op.push_back(p);
  }
  return r;
}

std::vector<BenchRow> bench_module(const CompiledModule& m,
                                   std::span<const float> input,
                                   const std::vector<uint32_t>& workers_list,
                                   uint32_t repeats) {
  if (workers_list.empty())
    throw ValidationError("workers list must be non-empty");
  std::vector<BenchRow> rows;
  WorkerPool pool(workers_list.front());
  for (uint32_t w : workers_list) {
    pool.resize(w);
    // Warm-up settles thread wakeup and allocator state out of the medians.
    (void)run_inference(m, input, pool, {});
    ProfileReport rep = profile_inference(m, input, pool, repeats);
    BenchRow row;
    row.workers = w;
    row.median_total_ns = rep.total_ns;
    row.speedup = rows.empty()
                      ? 1.0
                      : double(rows.front().median_total_ns) /
                            double(rep.total_ns ? rep.total_ns : 1);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace arielml
