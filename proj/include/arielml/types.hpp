// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace arielml {

enum class DType : uint8_t { f32 = 0, i8 = 1, i32 = 2 };

inline size_t dtype_size(DType dt) {
  switch (dt) {
    case DType::f32: return 4;
    case DType::i8: return 1;
    case DType::i32: return 4;
  }
  return 0;
}

inline const char* dtype_name(DType dt) {
  switch (dt) {
    case DType::f32: return "f32";
    case DType::i8: return "i8";
    case DType::i32: return "i32";
  }
  return "?";
}

// Affine quantization: real = scale * (q - zero_point).
struct QuantParams {
  double scale = 1.0;
  int32_t zero_point = 0;

  bool operator==(const QuantParams&) const = default;
};

// Tensor shapes are row-major; 4-D shapes are NCHW.
struct TensorDesc {
  uint32_t id = 0;
  std::vector<uint32_t> shape;
  DType dtype = DType::f32;
  std::optional<QuantParams> quant;

  uint64_t element_count() const {
    uint64_t n = 1;
    for (uint32_t d : shape) n *= d;
    return n;
  }
  uint64_t byte_size() const { return element_count() * dtype_size(dtype); }

  bool operator==(const TensorDesc&) const = default;
};

enum class LayerKind : uint8_t {
  conv2d = 0,
  maxpool2d = 1,
  dense = 2,
  relu = 3,
  quantize = 4,
  dequantize = 5,
  flatten = 6,
};

inline const char* layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::quantize: return "quantize";
    case LayerKind::dequantize: return "dequantize";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

inline std::optional<LayerKind> layer_kind_from_name(const std::string& s) {
  if (s == "conv2d") return LayerKind::conv2d;
  if (s == "maxpool2d") return LayerKind::maxpool2d;
  if (s == "dense") return LayerKind::dense;
  if (s == "relu") return LayerKind::relu;
  if (s == "quantize") return LayerKind::quantize;
  if (s == "dequantize") return LayerKind::dequantize;
  if (s == "flatten") return LayerKind::flatten;
  return std::nullopt;
}

inline uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

inline uint64_t round_up(uint64_t v, uint64_t align) {
  return ceil_div(v, align) * align;
}

}  // namespace arielml
