// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// arielml CLI: build a module from a graph file, inspect it, run inference
// (runtime or reference oracle), and benchmark across worker counts.
// Exit codes: 0 success, 1 validation, 2 I/O, 3 execution.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arielml/compiler.hpp"
#include "arielml/executor.hpp"
#include "arielml/graph.hpp"
#include "arielml/module.hpp"
#include "arielml/oracle.hpp"
#include "arielml/profiler.hpp"
#include "arielml/tensor_io.hpp"

namespace {

using namespace arielml;

constexpr const char* kWorkersEnv = "ARIELML_WORKERS";

uint32_t default_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return static_cast<uint32_t>(v);
  }
  return 1;
}

void print_tensor_text(std::span<const uint32_t> shape,
                       std::span<const float> data) {
  std::printf("shape=");
  for (size_t i = 0; i < shape.size(); ++i)
    std::printf("%s%u", i ? "x" : "", shape[i]);
  std::printf(" dtype=f32\n");
  for (size_t i = 0; i < data.size(); ++i)
    std::printf("%.9g%s", data[i],
                (i + 1 == data.size() || (i + 1) % 8 == 0) ? "\n" : " ");
}

std::vector<uint32_t> parse_workers_list(const std::string& s) {
  std::vector<uint32_t> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    std::string part =
        s.substr(start, comma == std::string::npos ? comma : comma - start);
    try {
      size_t pos = 0;
      unsigned long v = std::stoul(part, &pos);
      if (pos != part.size() || v == 0) throw std::invalid_argument("bad");
      out.push_back(static_cast<uint32_t>(v));
    } catch (const std::exception&) {
      throw ValidationError("workers list must be positive integers: '" + s +
                            "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int cmd_build(const std::string& graph_path, const std::string& out_path,
              uint32_t workers, uint32_t align, uint32_t oversub) {
  ModelGraph g = load_graph(graph_path);
  TargetInfo target{workers, align, oversub};
  CompiledModule m = compile(g, target);
  write_module(m, out_path);

  auto bytes = encode_module(m);
  uint32_t dispatches = 0;
  for (const auto& ins : m.program.instructions)
    if (ins.op == Opcode::dispatch) ++dispatches;
  std::printf("module %s\n", out_path.c_str());
  std::printf("  ops         %zu (%u dispatches)\n", m.ops.size(), dispatches);
  std::printf("  tensors     %zu\n", m.tensors.size());
  std::printf("  buffers     %zu\n", m.buffers.size());
  // Section table starts at byte 12: {id, offset, length} per section.
  static const char* kSectionNames[] = {"metadata", "tensors", "buffers",
                                        "ops",      "bytecode", "weights"};
  std::printf("  file bytes  %zu (header %u", bytes.size(), 12 + 6 * 12);
  for (int s = 0; s < 6; ++s) {
    uint32_t len = 0;
    std::memcpy(&len, bytes.data() + 12 + s * 12 + 8, 4);
    std::printf(", %s %u", kSectionNames[s], len);
  }
  std::printf(")\n");
  std::printf("  peak heap   %llu B (analytic)\n",
              static_cast<unsigned long long>(analyze_peak_heap(m)));
  return 0;
}

int cmd_run(const std::string& module_path, const std::string& input_path,
            uint32_t workers, bool oracle, bool oracle_f32_mode, bool profile,
            const std::string& format, uint32_t repeats,
            const std::string& out_path, bool sim) {
  TensorFile input = read_tensor(input_path);

  if (oracle || oracle_f32_mode) {
    // The oracle interprets the graph file directly.
    ModelGraph g = load_graph(module_path);
    const TensorDesc* din = g.find_tensor(g.input_id);
    if (!din || din->shape != input.shape)
      throw ShapeMismatchError("input shape does not match graph input");
    OracleResult res;
    if (oracle_f32_mode) {
      res = oracle_f32(g, input.data);
    } else {
      res = oracle_int(g, std::as_bytes(std::span(input.data)));
    }
    for (size_t i = 0; i < g.layers.size(); ++i) {
      std::printf("layer %zu %-11s tensor %u fnv1a=%016llx\n", i,
                  layer_kind_name(g.layers[i].kind), g.layers[i].output,
                  static_cast<unsigned long long>(fnv1a(res.layer_outputs[i])));
    }
    const TensorDesc* dout = g.find_tensor(g.output_id);
    auto out = res.output_f32();
    print_tensor_text(dout->shape, out);
    if (!out_path.empty()) write_tensor(out_path, dout->shape, out);
    return 0;
  }

  CompiledModule m = read_module(module_path);
  const TensorDesc* din = m.find_tensor(m.metadata.input_desc);
  if (din->shape != input.shape)
    throw ShapeMismatchError("input shape does not match module input_desc");

  RunOptions opts;
  opts.simulate = sim;
  opts.sim_workers = sim ? workers : 0;
  if (sim)
    opts.sim_trace = [](const SimTraceRow& row) {
      std::printf("sim op %u item %u worker %u [%llu, %llu)\n", row.op_id,
                  row.item_index, row.worker,
                  static_cast<unsigned long long>(row.vstart),
                  static_cast<unsigned long long>(row.vend));
    };

  RunResult run;
  if (sim) {
    Executor ex(m, input.data, nullptr, opts);
    while (ex.step()) {
    }
    run = ex.take_result();
  } else {
    WorkerPool pool(workers);
    run = run_inference(m, input.data, pool, opts);
    if (profile) {
      ProfileReport rep = profile_inference(m, input.data, pool, repeats);
      ReportFormat rf = format == "json"  ? ReportFormat::json
                        : format == "csv" ? ReportFormat::csv
                                          : ReportFormat::table;
      std::printf("%s", render_report(rep, rf).c_str());
    }
  }

  const TensorDesc* dout = m.find_tensor(m.metadata.output_desc);
  print_tensor_text(dout->shape, run.output);
  if (!out_path.empty()) write_tensor(out_path, dout->shape, run.output);
  return 0;
}

int cmd_bench(const std::string& module_path, const std::string& input_path,
              const std::string& workers_list, uint32_t repeats, bool csv) {
  CompiledModule m = read_module(module_path);
  TensorFile input = read_tensor(input_path);
  auto list = parse_workers_list(workers_list);
  auto rows = bench_module(m, input.data, list, repeats);
  if (csv) {
    std::printf("workers,total_ns,speedup\n");
    for (const auto& r : rows)
      std::printf("%u,%llu,%.4f\n", r.workers,
                  static_cast<unsigned long long>(r.median_total_ns),
                  r.speedup);
  } else {
    std::printf("%-8s %14s %8s\n", "workers", "total_ns", "speedup");
    for (const auto& r : rows)
      std::printf("%-8u %14llu %8.2f\n", r.workers,
                  static_cast<unsigned long long>(r.median_total_ns),
                  r.speedup);
  }
  return 0;
}

int cmd_inspect(const std::string& module_path) {
  CompiledModule m = read_module(module_path);
  std::printf("module version %u, little-endian\n", kModuleVersion);
  std::printf("entry point    %s\n", m.metadata.entry_point.c_str());
  std::printf("worker hint    %u\n", m.metadata.worker_count_hint);
  std::printf("alignment      %u B\n", m.metadata.alignment);
  const TensorDesc* din = m.find_tensor(m.metadata.input_desc);
  const TensorDesc* dout = m.find_tensor(m.metadata.output_desc);
  auto shape_str = [](const TensorDesc* t) {
    std::string s;
    for (size_t i = 0; i < t->shape.size(); ++i)
      s += (i ? "x" : "") + std::to_string(t->shape[i]);
    return s;
  };
  std::printf("input          tensor %u %s %s\n", m.metadata.input_desc,
              shape_str(din).c_str(), dtype_name(din->dtype));
  std::printf("output         tensor %u %s %s\n", m.metadata.output_desc,
              shape_str(dout).c_str(), dtype_name(dout->dtype));
  std::printf("weights blob   %zu B\n", m.weights.size());
  std::printf("\nops:\n");
  for (const auto& op : m.ops) {
    uint64_t extent = partition_extent(op, m);
    std::printf("  op %-3u %-11s extent %-6llu tile_extent %-5u items %u\n",
                op.op_id, layer_kind_name(op.kind),
                static_cast<unsigned long long>(extent), op.tile.tile_extent,
                op.tile.item_count);
  }
  std::printf("\nbytecode:\n%s", disassemble(m).c_str());
  std::printf("\nanalytic peak heap: %llu B\n",
              static_cast<unsigned long long>(analyze_peak_heap(m)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tiny quantized-network build pipeline and multicore runtime"};
  app.require_subcommand(1);

  std::string graph_path, module_path, input_path, out_path;
  uint32_t workers = default_workers();
  uint32_t align = 16, oversub = 1, repeats = 10;
  std::string workers_list = "1,2,4";
  std::string format = "table";
  bool oracle = false, oracle_f32_flag = false, profile = false, sim = false,
       csv = false;

  auto* build = app.add_subcommand("build", "compile a graph into a module");
  build->add_option("graph", graph_path, "graph file")->required();
  build->add_option("module", module_path, "output module file")->required();
  build->add_option("--workers", workers, "worker count hint");
  build->add_option("--align", align, "buffer alignment in bytes");
  build->add_option("--oversub", oversub, "work items per worker per op");

  auto* run = app.add_subcommand("run", "execute a module on an input tensor");
  run->add_option("module", module_path, "module file (graph file with --oracle)")
      ->required();
  run->add_option("input", input_path, "input tensor file")->required();
  run->add_option("--workers", workers, "worker count");
  run->add_flag("--oracle", oracle,
                "interpret the argument as a graph file and run the integer "
                "reference oracle");
  run->add_flag("--oracle-f32", oracle_f32_flag,
                "like --oracle but in pure f32 (quantization ignored)");
  run->add_flag("--profile", profile, "print a profile report");
  run->add_option("--format", format, "profile format: table|json|csv")
      ->check(CLI::IsMember({"table", "json", "csv"}));
  run->add_option("--repeats", repeats, "profile repeats (median)");
  run->add_option("--out", out_path, "also write the output tensor here");
  run->add_flag("--sim", sim, "deterministic virtual-clock scheduling");

  auto* bench = app.add_subcommand("bench", "median latency across worker counts");
  bench->add_option("module", module_path, "module file")->required();
  bench->add_option("input", input_path, "input tensor file")->required();
  bench->add_option("--workers-list", workers_list, "comma-separated counts");
  bench->add_option("--repeats", repeats, "repeats per worker count");
  bench->add_flag("--csv", csv, "machine-readable output");

  auto* inspect = app.add_subcommand("inspect", "decode and describe a module");
  inspect->add_option("module", module_path, "module file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (build->parsed())
      return cmd_build(graph_path, module_path, workers, align, oversub);
    if (run->parsed())
      return cmd_run(module_path, input_path, workers, oracle, oracle_f32_flag,
                     profile, format, repeats, out_path, sim);
    if (bench->parsed())
      return cmd_bench(module_path, input_path, workers_list, repeats, csv);
    if (inspect->parsed()) return cmd_inspect(module_path);
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ExecutionError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
