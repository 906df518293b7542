// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic fixture generator. Emits the LeNet-5-shaped graph with
// seeded random weights (activation scales calibrated so internal tensors
// span roughly [-4, 4]), three sample inputs, and the compute-bound
// synthetic benchmark graph (8 dense layers, 256x256). Expected logits are
// produced separately by `arielml run --oracle` and committed next to the
// graphs.

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "arielml/graph.hpp"
#include "arielml/oracle.hpp"
#include "arielml/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace arielml;

namespace {

constexpr uint64_t kSeed = 20250811;

struct BlobBuilder {
  std::vector<std::byte> bytes;

  uint64_t append_i8(const std::vector<int8_t>& v) {
    uint64_t off = round_up(bytes.size(), 4);
    bytes.resize(off + v.size());
    std::memcpy(bytes.data() + off, v.data(), v.size());
    return off;
  }
  uint64_t append_i32(const std::vector<int32_t>& v) {
    uint64_t off = round_up(bytes.size(), 4);
    bytes.resize(off + v.size() * 4);
    std::memcpy(bytes.data() + off, v.data(), v.size() * 4);
    return off;
  }
};

TensorDesc tensor(uint32_t id, std::vector<uint32_t> shape, DType dt,
                  double scale = 0.0, int32_t zp = 0) {
  TensorDesc t;
  t.id = id;
  t.shape = std::move(shape);
  t.dtype = dt;
  if (dt == DType::i8) t.quant = QuantParams{scale, zp};
  return t;
}

std::vector<int8_t> sample_weights(std::mt19937& rng, size_t n) {
  std::uniform_int_distribution<int> d(-64, 63);
  std::vector<int8_t> w(n);
  for (auto& v : w) v = static_cast<int8_t>(d(rng));
  return w;
}

float maxabs(std::span<const float> v) {
  float m = 0.0f;
  for (float x : v) m = std::max(m, std::fabs(x));
  return m;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::trunc);
  f << s;
  if (!f) throw IoError("cannot write " + p.string());
}

void write_blob(const fs::path& p, const std::vector<std::byte>& b) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(b.data()),
          static_cast<std::streamsize>(b.size()));
  if (!f) throw IoError("cannot write " + p.string());
}

constexpr double kInternalScale = 4.0 / 127.0;
constexpr float kActTarget = 3.5f;

void make_lenet5(const fs::path& dir) {
  std::mt19937 rng(kSeed);

  // Classic LeNet-5 geometry: 1x32x32 -> conv 6@5x5 -> pool 2x2 ->
  // conv 16@5x5 -> pool 2x2 -> flatten 400 -> 120 -> 84 -> 10,
  // f32 in/out, i8 internals.
  struct WLayer {
    size_t w_count;
    size_t out_count;
    uint32_t fan_in;
    double w_scale;
    std::vector<int8_t> w;
    std::vector<int32_t> b;
  };
  WLayer conv1{6 * 1 * 5 * 5, 6, 25, 0, {}, {}};
  WLayer conv2{16 * 6 * 5 * 5, 16, 150, 0, {}, {}};
  WLayer fc1{120 * 400, 120, 400, 0, {}, {}};
  WLayer fc2{84 * 120, 84, 120, 0, {}, {}};
  WLayer fc3{10 * 84, 10, 84, 0, {}, {}};
  WLayer* wl[] = {&conv1, &conv2, &fc1, &fc2, &fc3};
  for (WLayer* l : wl) {
    l->w = sample_weights(rng, l->w_count);
    l->b.assign(l->out_count, 0);
    // i8 samples have stddev ~ 64/sqrt(3) ~ 37; aim for unit layer gain.
    l->w_scale = 1.0 / (37.0 * std::sqrt(double(l->fan_in)));
  }

  // Three sample inputs in [0, 1].
  std::vector<std::vector<float>> inputs(3, std::vector<float>(32 * 32));
  std::uniform_real_distribution<float> pix(0.0f, 1.0f);
  for (auto& in : inputs)
    for (auto& v : in) v = pix(rng);

  auto build = [&](bool with_bias) {
    ModelGraph g;
    BlobBuilder blob;
    auto zero = [&](const WLayer& l) {
      return with_bias ? l.b : std::vector<int32_t>(l.out_count, 0);
    };
    uint64_t c1w = blob.append_i8(conv1.w), c1b = blob.append_i32(zero(conv1));
    uint64_t c2w = blob.append_i8(conv2.w), c2b = blob.append_i32(zero(conv2));
    uint64_t f1w = blob.append_i8(fc1.w), f1b = blob.append_i32(zero(fc1));
    uint64_t f2w = blob.append_i8(fc2.w), f2b = blob.append_i32(zero(fc2));
    uint64_t f3w = blob.append_i8(fc3.w), f3b = blob.append_i32(zero(fc3));

    g.tensors = {
        tensor(0, {1, 1, 32, 32}, DType::f32),
        tensor(1, {1, 1, 32, 32}, DType::i8, 1.0 / 255.0, -128),
        tensor(2, {1, 6, 28, 28}, DType::i8, kInternalScale),
        tensor(3, {1, 6, 14, 14}, DType::i8, kInternalScale),
        tensor(4, {1, 16, 10, 10}, DType::i8, kInternalScale),
        tensor(5, {1, 16, 5, 5}, DType::i8, kInternalScale),
        tensor(6, {400}, DType::i8, kInternalScale),
        tensor(7, {120}, DType::i8, kInternalScale),
        tensor(8, {84}, DType::i8, kInternalScale),
        tensor(9, {10}, DType::i8, kInternalScale),
        tensor(10, {10}, DType::f32),
    };
    auto layer = [&](LayerKind k, uint32_t in, uint32_t out) {
      LayerDesc l;
      l.kind = k;
      l.inputs = {in};
      l.output = out;
      return l;
    };
    LayerDesc q = layer(LayerKind::quantize, 0, 1);
    LayerDesc c1 = layer(LayerKind::conv2d, 1, 2);
    c1.kernel_h = c1.kernel_w = 5; c1.stride = 1; c1.out_channels = 6;
    c1.weight_scale = conv1.w_scale; c1.weight_offset = c1w; c1.bias_offset = c1b;
    LayerDesc p1 = layer(LayerKind::maxpool2d, 2, 3);
    p1.pool_h = p1.pool_w = 2; p1.stride = 2;
    LayerDesc c2 = layer(LayerKind::conv2d, 3, 4);
    c2.kernel_h = c2.kernel_w = 5; c2.stride = 1; c2.out_channels = 16;
    c2.weight_scale = conv2.w_scale; c2.weight_offset = c2w; c2.bias_offset = c2b;
    LayerDesc p2 = layer(LayerKind::maxpool2d, 4, 5);
    p2.pool_h = p2.pool_w = 2; p2.stride = 2;
    LayerDesc fl = layer(LayerKind::flatten, 5, 6);
    LayerDesc d1 = layer(LayerKind::dense, 6, 7);
    d1.in_features = 400; d1.out_features = 120;
    d1.weight_scale = fc1.w_scale; d1.weight_offset = f1w; d1.bias_offset = f1b;
    LayerDesc d2 = layer(LayerKind::dense, 7, 8);
    d2.in_features = 120; d2.out_features = 84;
    d2.weight_scale = fc2.w_scale; d2.weight_offset = f2w; d2.bias_offset = f2b;
    LayerDesc d3 = layer(LayerKind::dense, 8, 9);
    d3.in_features = 84; d3.out_features = 10;
    d3.weight_scale = fc3.w_scale; d3.weight_offset = f3w; d3.bias_offset = f3b;
    LayerDesc dq = layer(LayerKind::dequantize, 9, 10);
    g.layers = {q, c1, p1, c2, p2, fl, d1, d2, d3, dq};
    g.input_id = 0;
    g.output_id = 10;
    g.weights = std::move(blob.bytes);
    return g;
  };

  // Calibrate weight scales front to back so every weighted layer's f32
  // output tops out around kActTarget; pooling and flatten only shrink
  // ranges, so the i8 internal scale (spanning +-4) then covers everything.
  const int weighted_layer_index[] = {1, 3, 6, 7, 8};
  double* wscale[] = {&conv1.w_scale, &conv2.w_scale, &fc1.w_scale,
                      &fc2.w_scale, &fc3.w_scale};
  for (int k = 0; k < 5; ++k) {
    ModelGraph g = build(/*with_bias=*/false);
    float peak = 0.0f;
    for (const auto& in : inputs) {
      OracleResult r = oracle_f32(g, in);
      const auto& bytes = r.layer_outputs[weighted_layer_index[k]];
      peak = std::max(peak,
                      maxabs({reinterpret_cast<const float*>(bytes.data()),
                              bytes.size() / 4}));
    }
    if (peak < 1e-3f) peak = 1e-3f;
    *wscale[k] *= kActTarget / peak;
  }

  // Biases land after calibration: |bias effect| <= ~0.05 per element.
  for (WLayer* l : wl) {
    double in_scale = (l == &conv1) ? 1.0 / 255.0 : kInternalScale;
    int32_t mag = static_cast<int32_t>(0.05 / (in_scale * l->w_scale));
    std::uniform_int_distribution<int32_t> d(-mag, mag);
    for (auto& b : l->b) b = d(rng);
  }

  ModelGraph g = build(/*with_bias=*/true);
  auto diags = validate_graph(g);
  if (!diags.empty()) {
    std::fprintf(stderr, "fixture graph invalid:\n%s",
                 format_diagnostics(diags).c_str());
    std::exit(1);
  }

  // Record the int-vs-float agreement the fixture ships with.
  float worst = 0.0f;
  for (const auto& in : inputs) {
    OracleResult ri = oracle_int(g, std::as_bytes(std::span(in)));
    OracleResult rf = oracle_f32(g, in);
    auto qi = ri.output_f32();
    auto qf = rf.output_f32();
    for (size_t i = 0; i < qi.size(); ++i)
      worst = std::max(worst, std::fabs(qi[i] - qf[i]));
  }
  std::printf("lenet5: max |int - f32| over logits = %.4f\n", worst);
  if (worst > 0.09f) {
    std::fprintf(stderr, "quantization drift too large for the 0.1 bound\n");
    std::exit(1);
  }

  write_text(dir / "lenet5.graph", serialize_graph(g, "lenet5.weights.bin"));
  write_blob(dir / "lenet5.weights.bin", g.weights);
  for (int i = 0; i < 3; ++i) {
    uint32_t shape[] = {1, 1, 32, 32};
    write_tensor(dir / ("input_" + std::to_string(i) + ".tensor"), shape,
                 inputs[i]);
  }
  std::printf("lenet5: graph + weights + 3 inputs written\n");
}

void make_synth(const fs::path& dir) {
  std::mt19937 rng(kSeed ^ 0x5e17);
  constexpr uint32_t kDim = 256;
  constexpr int kLayers = 8;

  ModelGraph g;
  BlobBuilder blob;
  g.tensors.push_back(tensor(0, {kDim}, DType::f32));
  g.tensors.push_back(tensor(1, {kDim}, DType::i8, 1.0 / 127.0, 0));
  for (int i = 0; i < kLayers; ++i)
    g.tensors.push_back(
        tensor(2 + i, {kDim}, DType::i8, kInternalScale, 0));
  g.tensors.push_back(tensor(2 + kLayers, {kDim}, DType::f32));

  LayerDesc q;
  q.kind = LayerKind::quantize;
  q.inputs = {0};
  q.output = 1;
  g.layers.push_back(q);
  double w_scale = 1.0 / (37.0 * 16.0);
  for (int i = 0; i < kLayers; ++i) {
    auto w = sample_weights(rng, size_t(kDim) * kDim);
    std::vector<int32_t> b(kDim, 0);
    LayerDesc d;
    d.kind = LayerKind::dense;
    d.inputs = {uint32_t(1 + i)};
    d.output = uint32_t(2 + i);
    d.in_features = d.out_features = kDim;
    d.weight_scale = w_scale;
    d.weight_offset = blob.append_i8(w);
    d.bias_offset = blob.append_i32(b);
    g.layers.push_back(d);
  }
  LayerDesc dq;
  dq.kind = LayerKind::dequantize;
  dq.inputs = {uint32_t(1 + kLayers)};
  dq.output = uint32_t(2 + kLayers);
  g.layers.push_back(dq);
  g.input_id = 0;
  g.output_id = 2 + kLayers;
  g.weights = std::move(blob.bytes);

  auto diags = validate_graph(g);
  if (!diags.empty()) {
    std::fprintf(stderr, "synthetic graph invalid:\n%s",
                 format_diagnostics(diags).c_str());
    std::exit(1);
  }

  write_text(dir / "synth_dense8.graph",
             serialize_graph(g, "synth_dense8.weights.bin"));
  write_blob(dir / "synth_dense8.weights.bin", g.weights);

  std::vector<float> input(kDim);
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  for (auto& v : input) v = d(rng);
  uint32_t shape[] = {kDim};
  write_tensor(dir / "synth_input.tensor", shape, input);
  std::printf("synth_dense8: graph + weights + input written\n");
}

}  // namespace

int main(int argc, char** argv) {
  fs::path dir = argc > 1 ? argv[1] : "fixtures";
  fs::create_directories(dir);
  make_lenet5(dir);
  make_synth(dir);
  return 0;
}
