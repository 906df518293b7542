// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "arielml/compiler.hpp"
#include "arielml/executor.hpp"
#include "arielml/oracle.hpp"
#include "test_support.hpp"

using namespace arielml;
using namespace arielml::testing;

TEST_CASE("identity graph compiles to one dispatch, no allocs") {
  CompiledModule m = compile(identity_dense_graph(), TargetInfo{1, 16, 1});
  REQUIRE(m.ops.size() == 1);
  CHECK(m.ops[0].tile.item_count == 1);
  const auto& ins = m.program.instructions;
  REQUIRE(ins.size() == 3);  // io buffers are never Alloc'd
  CHECK(ins[0].op == Opcode::dispatch);
  CHECK(ins[1].op == Opcode::wait);
  CHECK(ins[2].op == Opcode::ret);
  CHECK(m.metadata.worker_count_hint == 1);
  CHECK(verify_module(m).empty());
}

TEST_CASE("lenet5 compiles to 10 dispatches, each followed by a Wait") {
  ModelGraph g = load_graph(fixture_dir() / "lenet5.graph");
  CompiledModule m = compile(g, TargetInfo{2, 16, 1});
  int dispatches = 0;
  const auto& ins = m.program.instructions;
  for (size_t i = 0; i < ins.size(); ++i)
    if (ins[i].op == Opcode::dispatch) {
      ++dispatches;
      REQUIRE(i + 1 < ins.size());
      CHECK(ins[i + 1].op == Opcode::wait);
    }
  CHECK(dispatches == 10);
  CHECK(verify_module(m).empty());
  CHECK(m.metadata.worker_count_hint == 2);
}

TEST_CASE("plan_tiles follows the ceil rule") {
  // dense 4 rows, 2 workers
  TileConfig t = plan_tiles(4, TargetInfo{2, 16, 1});
  CHECK(t.tile_extent == 2);
  CHECK(t.item_count == 2);
  // degenerate single row, many workers
  t = plan_tiles(1, TargetInfo{8, 16, 1});
  CHECK(t.tile_extent == 1);
  CHECK(t.item_count == 1);
  // conv 6 channels x 24 rows flattened, 2 workers, oversubscription 2
  t = plan_tiles(144, TargetInfo{2, 16, 2});
  CHECK(t.tile_extent == 36);
  CHECK(t.item_count == 4);
  // dense 84 -> 10 rows, 2 workers
  t = plan_tiles(10, TargetInfo{2, 16, 1});
  CHECK(t.tile_extent == 5);
  CHECK(t.item_count == 2);
  CHECK_THROWS_AS(plan_tiles(0, TargetInfo{2, 16, 1}), TilingError);
}

TEST_CASE("tile coverage property over random extents and targets") {
  std::mt19937 rng(123);
  for (int i = 0; i < 500; ++i) {
    uint64_t extent = std::uniform_int_distribution<uint64_t>(1, 5000)(rng);
    TargetInfo target{std::uniform_int_distribution<uint32_t>(1, 16)(rng), 16,
                      std::uniform_int_distribution<uint32_t>(1, 4)(rng)};
    TileConfig t = plan_tiles(extent, target);
    // Monotone bounds.
    CHECK(t.item_count <= extent);
    CHECK(uint64_t(t.item_count) <=
          uint64_t(target.worker_count) * target.oversubscription);
    // Disjoint cover of [0, extent).
    uint64_t covered = 0;
    for (uint32_t k = 0; k < t.item_count; ++k) {
      uint64_t b = uint64_t(k) * t.tile_extent;
      uint64_t e = std::min<uint64_t>(extent, b + t.tile_extent);
      CHECK(b < e);
      covered += e - b;
    }
    CHECK(covered == extent);
  }
}

TEST_CASE("emit_bytecode places Alloc at first use and Free after last") {
  ModelGraph g = load_graph(fixture_dir() / "lenet5.graph");
  CompiledModule m = compile(g, TargetInfo{1, 16, 1});
  const auto& ins = m.program.instructions;

  std::map<uint32_t, size_t> alloc_at, free_at;
  std::map<uint32_t, size_t> first_use, last_use;
  for (size_t i = 0; i < ins.size(); ++i) {
    if (ins[i].op == Opcode::alloc) alloc_at[ins[i].operand] = i;
    if (ins[i].op == Opcode::free_buffer) free_at[ins[i].operand] = i;
    if (ins[i].op == Opcode::dispatch) {
      const OpRecord& op = m.ops.at(ins[i].operand);
      for (uint32_t b : op.input_buffers) {
        if (!first_use.count(b)) first_use[b] = i;
        last_use[b] = i;
      }
      if (!first_use.count(op.output_buffer)) first_use[op.output_buffer] = i;
      last_use[op.output_buffer] = i;
    }
  }
  for (const auto& [buf, at] : alloc_at) {
    CHECK(at < first_use.at(buf));
    REQUIRE(free_at.count(buf));
    CHECK(free_at.at(buf) > last_use.at(buf));
    // Immediately after the last consumer's Wait (within the Free group).
    CHECK(free_at.at(buf) <= last_use.at(buf) + 1 + alloc_at.size() + 1);
  }
  // Every activation buffer alloc'd exactly once and freed exactly once.
  for (const auto& b : m.buffers)
    if (b.kind == BufferKind::activation) {
      CHECK(alloc_at.count(b.buffer_id) == 1);
      CHECK(free_at.count(b.buffer_id) == 1);
    }
}

TEST_CASE("compile is deterministic") {
  ModelGraph g = load_graph(fixture_dir() / "lenet5.graph");
  auto a = encode_module(compile(g, TargetInfo{4, 32, 2}));
  auto b = encode_module(compile(g, TargetInfo{4, 32, 2}));
  CHECK(a == b);
  auto c = encode_module(compile(g, TargetInfo{2, 32, 2}));
  CHECK(a != c);  // worker hint and tiling differ
}

TEST_CASE("compile rejects invalid graphs and targets") {
  ModelGraph g = identity_dense_graph();
  g.layers[0].in_features = 3;  // shape mismatch
  CHECK_THROWS_AS(compile(g, {}), ValidationError);

  ModelGraph ok = identity_dense_graph();
  CHECK_THROWS_AS(compile(ok, TargetInfo{0, 16, 1}), ValidationError);
  CHECK_THROWS_AS(compile(ok, TargetInfo{1, 24, 1}), ValidationError);
}

TEST_CASE("semantics preservation: modules equal the oracle on random graphs") {
  std::mt19937 rng(777);
  int checked = 0;
  for (int i = 0; i < 200; ++i) {
    RandomCase rc = make_random_graph(rng);
    uint32_t workers = 1 + (i % 4);
    CompiledModule m = compile(rc.graph, TargetInfo{workers, 16, 1});
    std::vector<float> module_out = run_inference(m, rc.input, workers);

    bool quantized = false;
    for (const auto& t : rc.graph.tensors)
      if (t.dtype == DType::i8) quantized = true;

    OracleResult oracle =
        oracle_int(rc.graph, to_bytes(rc.input.data(), rc.input.size() * 4));
    auto expect = oracle.output_f32();
    REQUIRE(expect.size() == module_out.size());
    if (quantized) {
      // Bit-exact through the integer path (final dequantize included).
      for (size_t k = 0; k < expect.size(); ++k)
        CHECK(module_out[k] == expect[k]);
    } else {
      for (size_t k = 0; k < expect.size(); ++k) {
        double tol = 1e-5 * std::max(1.0, std::fabs(double(expect[k])));
        CHECK(std::fabs(double(module_out[k]) - double(expect[k])) <= tol);
      }
    }
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("fan-out: a tensor with two consumers is freed after the last") {
  // input -> quantize t1; t1 -> relu t2 (dead); t1 -> relu t3 ->
  // dequantize out. t1 must stay live until its second consumer ran.
  GraphBuilder b;
  uint32_t in = b.add_tensor({8}, DType::f32);
  uint32_t t1 = b.add_tensor({8}, DType::i8, 0.05, 3);
  uint32_t t2 = b.add_tensor({8}, DType::i8, 0.05, 3);
  uint32_t t3 = b.add_tensor({8}, DType::i8, 0.05, 3);
  uint32_t out = b.add_tensor({8}, DType::f32);
  auto layer = [&](LayerKind k, uint32_t i, uint32_t o) {
    LayerDesc l;
    l.kind = k;
    l.inputs = {i};
    l.output = o;
    return l;
  };
  b.g.layers = {layer(LayerKind::quantize, in, t1),
                layer(LayerKind::relu, t1, t2),
                layer(LayerKind::relu, t1, t3),
                layer(LayerKind::dequantize, t3, out)};
  b.g.input_id = in;
  b.g.output_id = out;
  REQUIRE(validate_graph(b.g).empty());

  CompiledModule m = compile(b.g, TargetInfo{2, 16, 1});
  REQUIRE(verify_module(m).empty());
  const auto& ins = m.program.instructions;
  auto index_of = [&](Opcode op, uint32_t operand) {
    for (size_t i = 0; i < ins.size(); ++i)
      if (ins[i].op == op && ins[i].operand == operand) return long(i);
    return -1L;
  };
  // Buffer ids follow tensor order: t1 -> 1, t2 -> 2, t3 -> 3.
  long free_t1 = index_of(Opcode::free_buffer, 1);
  long disp_relu2 = index_of(Opcode::dispatch, 2);
  long disp_relu1 = index_of(Opcode::dispatch, 1);
  REQUIRE(free_t1 >= 0);
  CHECK(free_t1 > disp_relu2);
  CHECK(disp_relu2 > disp_relu1);

  std::vector<float> input = {-2, -1, -0.5, 0, 0.5, 1, 2, 3};
  auto got = run_inference(m, input, 2);
  OracleResult oracle =
      oracle_int(b.g, to_bytes(input.data(), input.size() * 4));
  auto expect = oracle.output_f32();
  for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == expect[i]);
}
