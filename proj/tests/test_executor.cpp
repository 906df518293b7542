// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <random>

#include "arielml/compiler.hpp"
#include "arielml/executor.hpp"
#include "arielml/oracle.hpp"
#include "arielml/tensor_io.hpp"
#include "test_support.hpp"

using namespace arielml;
using namespace arielml::testing;

namespace {

struct Fixture {
  ModelGraph graph;
  CompiledModule module;
  std::vector<float> input;

  Fixture() {
    graph = load_graph(fixture_dir() / "lenet5.graph");
    module = compile(graph, TargetInfo{2, 16, 1});
    input = read_tensor(fixture_dir() / "input_0.tensor").data;
  }
};

}  // namespace

TEST_CASE("identity module maps [5.0] to [5.0]") {
  CompiledModule m = compile(identity_dense_graph(), {});
  std::vector<float> in = {5.0f};
  auto out = run_inference(m, in, 1);
  REQUIRE(out.size() == 1);
  CHECK(out[0] == 5.0f);
}

TEST_CASE("outputs are bit-identical across worker counts") {
  Fixture f;
  auto base = run_inference(f.module, f.input, 1);
  for (uint32_t w : {2u, 4u, 8u}) {
    auto out = run_inference(f.module, f.input, w);
    CHECK(std::memcmp(base.data(), out.data(), base.size() * 4) == 0);
  }
}

TEST_CASE("module output equals the oracle bit-exactly") {
  Fixture f;
  auto out = run_inference(f.module, f.input, 4);
  OracleResult oracle =
      oracle_int(f.graph, to_bytes(f.input.data(), f.input.size() * 4));
  auto expect = oracle.output_f32();
  REQUIRE(out.size() == expect.size());
  for (size_t i = 0; i < out.size(); ++i) CHECK(out[i] == expect[i]);
}

TEST_CASE("decode_dispatch item ranges follow the ceil rule") {
  // dense rows=4, tile_extent=2 -> [0,2) [2,4)
  GraphBuilder b;
  uint32_t in = b.add_tensor({4}, DType::i8, 0.1, 0);
  uint32_t out = b.add_tensor({4}, DType::i8, 0.1, 0);
  LayerDesc l;
  l.kind = LayerKind::dense;
  l.inputs = {in};
  l.output = out;
  l.in_features = l.out_features = 4;
  l.weight_scale = 0.01;
  l.weight_offset = b.put_i8(std::vector<int8_t>(16, 1));
  l.bias_offset = b.put_i32(std::vector<int32_t>(4, 0));
  b.g.layers = {l};
  b.g.input_id = in;
  b.g.output_id = out;
  CompiledModule m = compile(b.g, TargetInfo{2, 16, 1});
  auto ranges = item_ranges(m.ops[0], m);
  REQUIRE(ranges.size() == 2);
  CHECK(ranges[0] == std::pair<uint32_t, uint32_t>{0, 2});
  CHECK(ranges[1] == std::pair<uint32_t, uint32_t>{2, 4});

  // extent 5, tile_extent 2 -> [0,2) [2,4) [4,5)
  OpRecord fake = m.ops[0];
  fake.tile = TileConfig{0, 2, 3};
  CompiledModule m5 = m;
  m5.tensors[1].shape = {5};
  auto r5 = item_ranges(fake, m5);
  REQUIRE(r5.size() == 3);
  CHECK(r5[2] == std::pair<uint32_t, uint32_t>{4, 5});

  // single item covers the whole extent
  fake.tile = TileConfig{0, 5, 1};
  auto r1 = item_ranges(fake, m5);
  REQUIRE(r1.size() == 1);
  CHECK(r1[0] == std::pair<uint32_t, uint32_t>{0, 5});
}

TEST_CASE("step semantics: alloc/free accounting and barrier passthrough") {
  // Module with one activation buffer (100 B, alignment 4), no ops.
  CompiledModule m;
  m.metadata = {1, "main", 0, 1, 4};
  TensorDesc in;
  in.id = 0;
  in.shape = {1};
  in.dtype = DType::f32;
  TensorDesc out = in;
  out.id = 1;
  TensorDesc scratch;
  scratch.id = 2;
  scratch.shape = {25};
  scratch.dtype = DType::f32;
  m.tensors = {in, out, scratch};
  m.buffers = {
      {0, 4, BufferKind::io, 0},
      {1, 4, BufferKind::io, 1},
      {2, 100, BufferKind::activation, 2},
  };
  m.program.instructions = {
      {Opcode::wait, 0},  // barrier with nothing in flight continues
      {Opcode::alloc, 2},
      {Opcode::free_buffer, 2},
      {Opcode::ret, 0},
  };
  REQUIRE(verify_module(m).empty());
  std::vector<float> input = {0.0f};
  WorkerPool pool(1);
  RunResult r = run_inference(m, input, pool, {});
  CHECK(r.peak_heap_bytes == 100);
  CHECK(r.arena_live_at_return == 0);
  CHECK(r.arena_total_allocs == 1);
  CHECK(r.arena_total_frees == 1);
}

TEST_CASE("fixture peak heap matches the analytic scan") {
  Fixture f;
  WorkerPool pool(2);
  RunResult r = run_inference(f.module, f.input, pool, {});
  CHECK(r.peak_heap_bytes == analyze_peak_heap(f.module));
  CHECK(r.arena_live_at_return == 0);
  CHECK(r.arena_total_allocs == r.arena_total_frees);
}

TEST_CASE("barrier soundness: items never straddle a Wait") {
  Fixture f;
  WorkerPool pool(4);
  RunOptions opts;
  opts.jitter_seed = 9;
  opts.jitter_max_us = 30;
  RunResult r = run_inference(f.module, f.input, pool, opts);
  REQUIRE(r.op_timings.size() == f.module.ops.size());
  uint64_t prev_max_end = 0;
  for (const auto& t : r.op_timings) {
    uint64_t min_start = UINT64_MAX, max_end = 0;
    for (const auto& s : t.item_stats) {
      min_start = std::min(min_start, s.start_ns);
      max_end = std::max(max_end, s.end_ns);
    }
    CHECK(min_start >= prev_max_end);
    prev_max_end = max_end;
  }
}

TEST_CASE("schedule independence under randomized jitter") {
  Fixture f;
  WorkerPool pool(4);
  std::vector<float> base;
  for (uint32_t run = 0; run < 10; ++run) {
    RunOptions opts;
    opts.jitter_seed = 1000 + run;
    opts.jitter_max_us = 50;
    RunResult r = run_inference(f.module, f.input, pool, opts);
    if (run == 0) {
      base = r.output;
    } else {
      CHECK(std::memcmp(base.data(), r.output.data(), base.size() * 4) == 0);
    }
  }
}

TEST_CASE("simulate mode produces identical output and a greedy trace") {
  Fixture f;
  std::vector<SimTraceRow> trace;
  RunOptions opts;
  opts.simulate = true;
  opts.sim_workers = 2;
  opts.sim_trace = [&](const SimTraceRow& row) { trace.push_back(row); };
  Executor ex(f.module, f.input, nullptr, opts);
  while (ex.step()) {
  }
  RunResult sim = ex.take_result();
  auto real = run_inference(f.module, f.input, 2);
  CHECK(std::memcmp(sim.output.data(), real.data(), real.size() * 4) == 0);
  // 10 ops x 2 items each.
  CHECK(trace.size() == 20);
  CHECK(sim.total_ns > 0);  // virtual makespan accumulates
}

TEST_CASE("executor rejects bad inputs and modules") {
  Fixture f;
  std::vector<float> wrong(7, 0.0f);
  CHECK_THROWS_AS(run_inference(f.module, wrong, 1), ShapeMismatchError);

  CompiledModule broken = f.module;
  broken.ops[0].tile.item_count += 1;
  std::vector<float> in(f.input);
  CHECK_THROWS_AS(run_inference(broken, in, 1), VerifyError);
}

TEST_CASE("arena cap turns into AllocError") {
  Fixture f;
  WorkerPool pool(1);
  RunOptions opts;
  opts.arena_cap_bytes = 64;  // far below the ~6 KB the fixture needs
  CHECK_THROWS_AS(run_inference(f.module, f.input, pool, opts), AllocError);
  // Pool stays usable afterwards.
  RunResult ok = run_inference(f.module, f.input, pool, {});
  CHECK(ok.arena_live_at_return == 0);
}

TEST_CASE("graph whose output is its input degenerates to a copy") {
  // No layers at all: output id == input id.
  GraphBuilder b;
  uint32_t t = b.add_tensor({3}, DType::f32);
  b.g.input_id = t;
  b.g.output_id = t;
  REQUIRE(validate_graph(b.g).empty());
  CompiledModule m = compile(b.g, {});
  std::vector<float> in = {1.f, 2.f, 3.f};
  auto out = run_inference(m, in, 1);
  CHECK(out == in);
}

TEST_CASE("two independent dispatches may share one barrier") {
  // Hand-built program: [Alloc dead, Dispatch A, Dispatch B, Wait,
  // Free dead, Return]. A writes the io output, B a dead activation;
  // no read-after-write hazard, so a single Wait is legal.
  CompiledModule m;
  m.metadata = {1, "main", 0, 1, 4};
  TensorDesc in;
  in.id = 0;
  in.shape = {4};
  in.dtype = DType::f32;
  TensorDesc out = in;
  out.id = 1;
  TensorDesc dead = in;
  dead.id = 2;
  m.tensors = {in, out, dead};
  m.buffers = {
      {0, 16, BufferKind::io, 0},
      {1, 16, BufferKind::io, 1},
      {2, 16, BufferKind::activation, 2},
  };
  OpRecord a;
  a.op_id = 0;
  a.kind = LayerKind::relu;
  a.input_buffers = {0};
  a.output_buffer = 1;
  a.tile = {0, 2, 2};
  OpRecord b = a;
  b.op_id = 1;
  b.output_buffer = 2;
  m.ops = {a, b};
  m.program.instructions = {
      {Opcode::alloc, 2},    {Opcode::dispatch, 0}, {Opcode::dispatch, 1},
      {Opcode::wait, 0},     {Opcode::free_buffer, 2}, {Opcode::ret, 0},
  };
  REQUIRE(verify_module(m).empty());

  std::vector<float> input = {-1.0f, 2.0f, -3.0f, 4.0f};
  WorkerPool pool(2);
  RunResult r = run_inference(m, input, pool, {});
  std::vector<float> want = {0.0f, 2.0f, 0.0f, 4.0f};
  CHECK(r.output == want);
  REQUIRE(r.op_timings.size() == 2);
  // Items of both dispatches drained through one FIFO: pop order follows
  // submission order across the two batches.
  uint64_t max_a = 0, min_b = UINT64_MAX;
  for (const auto& s : r.op_timings[0].item_stats)
    max_a = std::max(max_a, s.pop_seq);
  for (const auto& s : r.op_timings[1].item_stats)
    min_b = std::min(min_b, s.pop_seq);
  CHECK(max_a < min_b);
  CHECK(r.arena_live_at_return == 0);
}
