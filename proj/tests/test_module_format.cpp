// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "arielml/compiler.hpp"
#include "arielml/module.hpp"
#include "test_support.hpp"

using namespace arielml;
using namespace arielml::testing;

namespace {

CompiledModule lenet_module(uint32_t workers = 2) {
  ModelGraph g = load_graph(fixture_dir() / "lenet5.graph");
  return compile(g, TargetInfo{workers, 16, 1});
}

}  // namespace

TEST_CASE("encode is deterministic byte-for-byte") {
  CompiledModule m = compile(identity_dense_graph(), {});
  CHECK(encode_module(m) == encode_module(m));
  CompiledModule lm = lenet_module();
  CHECK(encode_module(lm) == encode_module(lm));
}

TEST_CASE("encode/decode round-trip equals the original module") {
  CompiledModule m = lenet_module();
  CompiledModule back = decode_module(encode_module(m));
  CHECK(back == m);

  std::mt19937 rng(41);
  for (int i = 0; i < 50; ++i) {
    RandomCase rc = make_random_graph(rng);
    CompiledModule rm =
        compile(rc.graph, TargetInfo{uint32_t(1 + i % 4), 16, 1});
    CHECK(decode_module(encode_module(rm)) == rm);
  }
}

TEST_CASE("encode rejects a module with a dangling buffer id") {
  CompiledModule m = compile(identity_dense_graph(), {});
  m.ops[0].output_buffer = 99;
  CHECK_THROWS_AS(encode_module(m), VerifyError);
}

TEST_CASE("decode rejects bad magic, bad version and truncation") {
  CompiledModule m = lenet_module();
  auto bytes = encode_module(m);

  auto corrupt = bytes;
  corrupt[0] = std::byte{'X'};
  CHECK_THROWS_AS(decode_module(corrupt), BadMagicError);

  corrupt = bytes;
  corrupt[4] = std::byte{0x7F};  // version
  CHECK_THROWS_AS(decode_module(corrupt), VersionUnsupportedError);

  auto truncated = bytes;
  truncated.resize(bytes.size() - 7);
  CHECK_THROWS_AS(decode_module(truncated), SectionOverlapError);

  auto trailing = bytes;
  trailing.push_back(std::byte{0});
  CHECK_THROWS_AS(decode_module(trailing), SectionOverlapError);
}

TEST_CASE("verify flags a missing Wait between producer and consumer") {
  CompiledModule m = lenet_module();
  auto& ins = m.program.instructions;
  // Remove the Wait after the first Dispatch; op 1 then reads a buffer
  // with in-flight writes from op 0.
  for (size_t i = 0; i < ins.size(); ++i) {
    if (ins[i].op == Opcode::dispatch) {
      REQUIRE(ins[i + 1].op == Opcode::wait);
      ins.erase(ins.begin() + static_cast<long>(i) + 1);
      break;
    }
  }
  auto diags = verify_module(m);
  bool found = false;
  for (const auto& d : diags)
    if (d.message.find("without an intervening Wait") != std::string::npos &&
        d.message.find("op 1") != std::string::npos &&
        d.message.find("op 0") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("verify flags a tile config that does not cover the output") {
  CompiledModule m = lenet_module();
  m.ops[6].tile.item_count += 1;
  bool found = false;
  for (const auto& d : verify_module(m))
    if (d.message.find("item_count != ceil") != std::string::npos) found = true;
  CHECK(found);
}

TEST_CASE("verify flags alloc/free misuse") {
  CompiledModule m = lenet_module();
  auto base = m.program.instructions;

  m.program.instructions = base;
  m.program.instructions.insert(m.program.instructions.begin(),
                                base.front());  // double Alloc
  bool dbl = false;
  for (const auto& d : verify_module(m))
    if (d.message.find("double Alloc") != std::string::npos) dbl = true;
  CHECK(dbl);

  m.program.instructions = base;
  // Free before the consumer's Wait.
  for (size_t i = 0; i + 1 < m.program.instructions.size(); ++i) {
    if (m.program.instructions[i].op == Opcode::dispatch) {
      uint32_t buf = 1;  // quantize output buffer, still in flight
      m.program.instructions.insert(m.program.instructions.begin() + long(i) + 1,
                                    Instruction{Opcode::free_buffer, buf});
      break;
    }
  }
  bool inflight = false;
  for (const auto& d : verify_module(m))
    if (d.message.find("in-flight writes") != std::string::npos) inflight = true;
  CHECK(inflight);

  m.program.instructions = base;
  m.program.instructions.pop_back();  // drop Return
  bool ret = false;
  for (const auto& d : verify_module(m))
    if (d.message.find("end with Return") != std::string::npos) ret = true;
  CHECK(ret);
}

TEST_CASE("verify rejects invariant-breaking single-field mutations") {
  CompiledModule base = lenet_module();
  auto broken = [&](auto mutate) {
    CompiledModule m = base;
    mutate(m);
    return !verify_module(m).empty();
  };
  CHECK(broken([](CompiledModule& m) { m.metadata.alignment = 24; }));
  CHECK(broken([](CompiledModule& m) { m.metadata.entry_point.clear(); }));
  CHECK(broken([](CompiledModule& m) { m.metadata.worker_count_hint = 0; }));
  CHECK(broken([](CompiledModule& m) { m.metadata.input_desc = 77; }));
  CHECK(broken([](CompiledModule& m) { m.tensors[1].quant->scale = -1.0; }));
  CHECK(broken([](CompiledModule& m) { m.tensors[1].quant.reset(); }));
  CHECK(broken([](CompiledModule& m) { m.tensors[2].shape[1] = 0; }));
  CHECK(broken([](CompiledModule& m) { m.buffers[2].byte_size += 1; }));
  CHECK(broken([](CompiledModule& m) { m.buffers[3].tensor_id = 200; }));
  CHECK(broken([](CompiledModule& m) { m.ops[1].tile.tile_extent = 0; }));
  CHECK(broken([](CompiledModule& m) {
    m.ops[1].weight_slice->length += 3;
  }));
  CHECK(broken([](CompiledModule& m) {
    m.ops[1].input_buffers[0] = m.ops[1].output_buffer;
  }));
  CHECK(broken([](CompiledModule& m) { m.ops[8].weight_slice.reset(); }));
}

TEST_CASE("analytic peak heap equals a hand scan of Alloc/Free") {
  CompiledModule m = lenet_module();
  uint64_t live = 0, peak = 0;
  for (const auto& ins : m.program.instructions) {
    if (ins.op == Opcode::alloc) {
      live += m.find_buffer(ins.operand)->byte_size;
      peak = std::max(peak, live);
    } else if (ins.op == Opcode::free_buffer) {
      live -= m.find_buffer(ins.operand)->byte_size;
    }
  }
  CHECK(analyze_peak_heap(m) == peak);
  CHECK(live == 0);
}

TEST_CASE("disassembly shows a Wait after every Dispatch") {
  CompiledModule m = lenet_module();
  const auto& ins = m.program.instructions;
  for (size_t i = 0; i < ins.size(); ++i)
    if (ins[i].op == Opcode::dispatch) CHECK(ins[i + 1].op == Opcode::wait);
  std::string text = disassemble(m);
  CHECK(text.find("Dispatch op 0 (quantize") != std::string::npos);
  CHECK(text.find("Return") != std::string::npos);
}

TEST_CASE("module file io round-trips through disk") {
  CompiledModule m = lenet_module();
  auto path = std::filesystem::temp_directory_path() / "arielml_rt.mod";
  write_module(m, path);
  CHECK(read_module(path) == m);
  std::filesystem::remove(path);
}

TEST_CASE("decode never accepts random garbage silently") {
  std::mt19937 rng(0xDEAD);
  CompiledModule valid = lenet_module();
  auto good = encode_module(valid);
  for (int i = 0; i < 200; ++i) {
    size_t n = std::uniform_int_distribution<size_t>(0, 300)(rng);
    std::vector<std::byte> junk(n);
    for (auto& b : junk)
      b = std::byte(std::uniform_int_distribution<int>(0, 255)(rng));
    // Half the cases keep a valid prefix so section parsing goes deeper.
    if (i % 2 == 0 && n > 0) {
      size_t keep = std::min(good.size(),
                             std::uniform_int_distribution<size_t>(1, 96)(rng));
      junk.insert(junk.begin(), good.begin(), good.begin() + long(keep));
    }
    try {
      CompiledModule m = decode_module(junk);
      CHECK(verify_module(m).empty());  // anything accepted must verify
    } catch (const DecodeError&) {
    } catch (const VerifyError&) {
    }
  }
}
