// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "arielml/oracle.hpp"
#include "arielml/tensor_io.hpp"
#include "test_support.hpp"

using namespace arielml;
using namespace arielml::testing;

TEST_CASE("oracle passes the identity network through") {
  ModelGraph g = identity_dense_graph();
  float x = 5.0f;
  OracleResult ri = oracle_int(g, to_bytes(&x, 4));
  CHECK(ri.output_f32()[0] == 5.0f);
  OracleResult rf = oracle_f32(g, std::span(&x, 1));
  CHECK(rf.output_f32()[0] == 5.0f);
}

TEST_CASE("oracle 2x2 dense example gives [3, 7]") {
  GraphBuilder b;
  uint32_t in = b.add_tensor({2}, DType::i8, 1.0, 0);
  uint32_t out = b.add_tensor({2}, DType::i8, 1.0, 0);
  LayerDesc l;
  l.kind = LayerKind::dense;
  l.inputs = {in};
  l.output = out;
  l.in_features = l.out_features = 2;
  l.weight_scale = 1.0;
  l.weight_offset = b.put_i8({1, 2, 3, 4});
  l.bias_offset = b.put_i32({0, 0});
  b.g.layers = {l};
  b.g.input_id = in;
  b.g.output_id = out;
  int8_t x[2] = {1, 1};
  OracleResult r = oracle_int(b.g, to_bytes(x, 2));
  const int8_t* y = reinterpret_cast<const int8_t*>(r.output.data());
  CHECK(y[0] == 3);
  CHECK(y[1] == 7);
}

TEST_CASE("f32 oracle propagates only the bias on zero input") {
  GraphBuilder b;
  uint32_t in = b.add_tensor({3}, DType::f32);
  uint32_t out = b.add_tensor({2}, DType::f32);
  LayerDesc l;
  l.kind = LayerKind::dense;
  l.inputs = {in};
  l.output = out;
  l.in_features = 3;
  l.out_features = 2;
  l.weight_offset = b.put_f32({1, 2, 3, 4, 5, 6});
  l.bias_offset = b.put_f32({0.25f, -0.5f});
  b.g.layers = {l};
  b.g.input_id = in;
  b.g.output_id = out;
  std::vector<float> zero(3, 0.0f);
  OracleResult r = oracle_f32(b.g, zero);
  CHECK(r.output_f32()[0] == 0.25f);
  CHECK(r.output_f32()[1] == -0.5f);
}

TEST_CASE("oracle retains every intermediate tensor") {
  ModelGraph g = load_graph(fixture_dir() / "lenet5.graph");
  std::vector<float> input(32 * 32, 0.5f);
  OracleResult r = oracle_int(g, to_bytes(input.data(), input.size() * 4));
  REQUIRE(r.layer_outputs.size() == g.layers.size());
  for (size_t i = 0; i < g.layers.size(); ++i) {
    const TensorDesc* out = g.find_tensor(g.layers[i].output);
    CHECK(r.layer_outputs[i].size() == out->byte_size());
  }
}

TEST_CASE("f32 oracle stays within the quantization bound on the fixture") {
  ModelGraph g = load_graph(fixture_dir() / "lenet5.graph");
  for (int i = 0; i < 3; ++i) {
    auto input = read_tensor(fixture_dir() /
                             ("input_" + std::to_string(i) + ".tensor"));
    OracleResult ri =
        oracle_int(g, to_bytes(input.data.data(), input.data.size() * 4));
    OracleResult rf = oracle_f32(g, input.data);
    auto a = ri.output_f32();
    auto b = rf.output_f32();
    REQUIRE(a.size() == b.size());
    for (size_t k = 0; k < a.size(); ++k)
      CHECK(std::fabs(a[k] - b[k]) <= doctest::Approx(0.1).epsilon(0));
  }
}

TEST_CASE("oracle rejects shape mismatches") {
  ModelGraph g = identity_dense_graph();
  std::vector<std::byte> wrong(8);
  CHECK_THROWS_AS(oracle_int(g, wrong), ShapeMismatchError);
  std::vector<float> wf(3);
  CHECK_THROWS_AS(oracle_f32(g, wf), ShapeMismatchError);
}

TEST_CASE("reference rounding matches the kernel rounding on adversarial values") {
  // The kernels use llround, the oracle derives ties from the fraction;
  // both must implement ties-away-from-zero identically.
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> d(-300.0, 300.0);
  auto kernel_round = [](double v) { return std::llround(v); };
  auto oracle_round = [](double v) {
    double f = std::floor(v);
    double mid = f + 0.5;
    if (v > mid) return static_cast<long long>(f) + 1;
    if (v < mid) return static_cast<long long>(f);
    return v >= 0.0 ? static_cast<long long>(f) + 1 : static_cast<long long>(f);
  };
  for (int i = 0; i < 20000; ++i) {
    double v = d(rng);
    CHECK(kernel_round(v) == oracle_round(v));
  }
  for (double v : {0.5, -0.5, 1.5, -1.5, 2.5, -2.5, 126.5, -126.5, 0.0,
                   0.49999999999999994, -0.49999999999999994}) {
    CHECK(kernel_round(v) == oracle_round(v));
  }
}
