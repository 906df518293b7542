// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>
#include <set>

#include "arielml/graph.hpp"
#include "test_support.hpp"

using namespace arielml;
using namespace arielml::testing;

namespace {

const char* kIdentityGraph = R"(
version=1
# identity network: dense 1 -> 1 in f32
tensors:
id=0 shape=1 dtype=f32
id=1 shape=1 dtype=f32

layers:
kind=dense inputs=0 output=1 in_features=1 out_features=1 weights=0 bias=4

io:
input=0
output=1
)";

std::vector<std::byte> identity_blob() {
  float wb[2] = {1.0f, 0.0f};
  return to_bytes(wb, sizeof(wb));
}

}  // namespace

TEST_CASE("identity dense graph parses to 2 tensors and 1 layer") {
  ModelGraph g = parse_graph(kIdentityGraph, identity_blob());
  CHECK(g.tensors.size() == 2);
  CHECK(g.layers.size() == 1);
  CHECK(g.layers[0].kind == LayerKind::dense);
  CHECK(validate_graph(g).empty());
}

TEST_CASE("lenet5 fixture loads with 10 layers (7 compute + bridges)") {
  ModelGraph g = load_graph(fixture_dir() / "lenet5.graph");
  CHECK(g.layers.size() == 10);
  int compute = 0, bridge = 0;
  for (const auto& l : g.layers) {
    if (l.kind == LayerKind::quantize || l.kind == LayerKind::dequantize ||
        l.kind == LayerKind::flatten)
      ++bridge;
    else
      ++compute;
  }
  CHECK(compute == 7);
  CHECK(bridge == 3);
  CHECK(validate_graph(g).empty());
  // Sanity on the classifier head.
  const LayerDesc& fc1 = g.layers[6];
  CHECK(fc1.in_features == 400);
  CHECK(fc1.out_features == 120);
}

TEST_CASE("conv output shape violating the stride rule is diagnosed") {
  const char* text = R"(
tensors:
id=0 shape=1x1x8x8 dtype=f32
id=1 shape=1x2x5x5 dtype=f32

layers:
kind=conv2d inputs=0 output=1 kernel=3x3 stride=1 out_channels=2 weights=0 bias=72

io:
input=0
output=1
)";
  std::vector<std::byte> blob(2 * 1 * 3 * 3 * 4 + 2 * 4);
  ModelGraph g = parse_graph(text, std::move(blob));
  auto diags = validate_graph(g);
  REQUIRE(!diags.empty());
  bool found = false;
  for (const auto& d : diags)
    if (d.layer == 0 && d.message.find("spatial shape mismatch") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("tensor written twice is diagnosed citing both writers") {
  ModelGraph g = identity_dense_graph();
  LayerDesc dup = g.layers[0];
  g.layers.push_back(dup);
  auto diags = validate_graph(g);
  bool found = false;
  for (const auto& d : diags)
    if (d.message.find("multiple layers") != std::string::npos &&
        d.message.find("0") != std::string::npos &&
        d.message.find("1") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("i8 tensor without quant params is diagnosed") {
  ModelGraph g = identity_dense_graph();
  g.tensors[0].dtype = DType::i8;  // no quant attached
  g.tensors[1].dtype = DType::i8;
  auto diags = validate_graph(g);
  int quant_diags = 0;
  for (const auto& d : diags)
    if (d.message.find("missing quantization") != std::string::npos)
      ++quant_diags;
  CHECK(quant_diags == 2);
}

TEST_CASE("serialize/parse round-trip is field-exact") {
  std::mt19937 rng(7);
  for (int i = 0; i < 25; ++i) {
    RandomCase rc = make_random_graph(rng);
    std::string text = serialize_graph(rc.graph, "");
    ModelGraph back = parse_graph(text, rc.graph.weights);
    CHECK(back == rc.graph);
  }
  ModelGraph lenet = load_graph(fixture_dir() / "lenet5.graph");
  ModelGraph back =
      parse_graph(serialize_graph(lenet, "w.bin"), lenet.weights);
  CHECK(back == lenet);
}

TEST_CASE("topological and shape-closure properties hold on random graphs") {
  std::mt19937 rng(11);
  for (int i = 0; i < 50; ++i) {
    RandomCase rc = make_random_graph(rng);
    const ModelGraph& g = rc.graph;
    CHECK(validate_graph(g).empty());
    // Every layer input is the graph input or produced earlier.
    std::set<uint32_t> written;
    for (const auto& l : g.layers) {
      for (uint32_t in : l.inputs)
        CHECK((in == g.input_id || written.count(in) == 1));
      written.insert(l.output);
    }
    // Output shapes recomputed from attrs equal declared shapes.
    for (const auto& l : g.layers) {
      const TensorDesc* in = g.find_tensor(l.inputs[0]);
      const TensorDesc* out = g.find_tensor(l.output);
      switch (l.kind) {
        case LayerKind::conv2d:
          CHECK(out->shape[2] == (in->shape[2] - l.kernel_h) / l.stride + 1);
          CHECK(out->shape[3] == (in->shape[3] - l.kernel_w) / l.stride + 1);
          CHECK(out->shape[1] == l.out_channels);
          break;
        case LayerKind::maxpool2d:
          CHECK(out->shape[2] == (in->shape[2] - l.pool_h) / l.stride + 1);
          CHECK(out->shape[3] == (in->shape[3] - l.pool_w) / l.stride + 1);
          break;
        case LayerKind::dense:
          CHECK(out->shape[0] == l.out_features);
          break;
        default:
          CHECK(in->element_count() == out->element_count());
      }
    }
  }
}

TEST_CASE("load_graph reports missing files as IoError") {
  CHECK_THROWS_AS(load_graph("does/not/exist.graph"), IoError);
}

TEST_CASE("malformed graph text raises ParseError with a line number") {
  CHECK_THROWS_AS(parse_graph("tensors:\nid=0 shape= dtype=f32\nio:\ninput=0 output=0\n", {}),
                  ParseError);
  CHECK_THROWS_AS(parse_graph("tensors:\nid=0 shape=1 dtype=f32 bogus=1\n", {}),
                  ParseError);
  CHECK_THROWS_AS(parse_graph("layers:\nkind=softmax inputs=0 output=1\n", {}),
                  ParseError);
  try {
    parse_graph("tensors:\nid=zzz shape=1 dtype=f32\n", {});
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("dangling tensor ids and missing weights are diagnosed") {
  ModelGraph g = identity_dense_graph();
  g.layers[0].inputs = {42};
  auto diags = validate_graph(g);
  bool dangling = false;
  for (const auto& d : diags)
    if (d.message.find("does not exist") != std::string::npos) dangling = true;
  CHECK(dangling);

  ModelGraph g2 = identity_dense_graph();
  g2.layers[0].weight_offset.reset();
  bool missing = false;
  for (const auto& d : validate_graph(g2))
    if (d.message.find("missing weights offset") != std::string::npos)
      missing = true;
  CHECK(missing);

  ModelGraph g3 = identity_dense_graph();
  g3.layers[0].bias_offset = 1000;  // past blob end
  bool oob = false;
  for (const auto& d : validate_graph(g3))
    if (d.message.find("past end of blob") != std::string::npos) oob = true;
  CHECK(oob);

  ModelGraph g4 = identity_dense_graph();
  g4.weights.resize(9);
  g4.layers[0].bias_offset = 5;  // misaligned 4-byte field
  bool misaligned = false;
  for (const auto& d : validate_graph(g4))
    if (d.message.find("4-byte aligned") != std::string::npos) misaligned = true;
  CHECK(misaligned);
}

TEST_CASE("quantize-first and dequantize-last rules fire for i8 graphs") {
  // f32 input feeding a dense layer while i8 tensors exist elsewhere.
  GraphBuilder b;
  uint32_t in = b.add_tensor({4}, DType::f32);
  uint32_t mid = b.add_tensor({4}, DType::i8, 0.1, 0);
  uint32_t out = b.add_tensor({4}, DType::f32);
  LayerDesc q;
  q.kind = LayerKind::quantize;
  q.inputs = {in};
  q.output = mid;
  LayerDesc dq;
  dq.kind = LayerKind::dequantize;
  dq.inputs = {mid};
  dq.output = out;
  b.g.layers = {q, dq};
  b.g.input_id = in;
  b.g.output_id = out;
  CHECK(validate_graph(b.g).empty());

  // Swap quantize for relu: first consumer of the f32 input is wrong.
  ModelGraph bad = b.g;
  bad.layers[0].kind = LayerKind::relu;
  bool fired = false;
  for (const auto& d : validate_graph(bad))
    if (d.message.find("must be quantize") != std::string::npos) fired = true;
  CHECK(fired);
}
