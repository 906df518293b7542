// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/kernels.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>

namespace arielml {

namespace {

inline int8_t clamp_i8(long long v) {
  return static_cast<int8_t>(std::clamp<long long>(v, -128, 127));
}

// Ties away from zero; llround implements exactly that.
inline long long round_half_away(double v) { return std::llround(v); }

inline int8_t requantize(int64_t acc, double combined, int32_t out_zp) {
  assert(acc >= INT32_MIN && acc <= INT32_MAX && "i32 accumulator overflow");
  return clamp_i8(round_half_away(double(acc) * combined) + out_zp);
}

struct QuantDense {
  const int8_t* w;
  const int32_t* bias;
};
struct FloatDense {
  const float* w;
  const float* bias;
};

// weight slice layout: [weights][pad to 4][bias]
template <typename W, typename B>
std::pair<const W*, const B*> split_slice(std::span<const std::byte> slice,
                                          uint64_t weight_count) {
  uint64_t wb = weight_count * sizeof(W);
  return {reinterpret_cast<const W*>(slice.data()),
          reinterpret_cast<const B*>(slice.data() + round_up(wb, 4))};
}

void k_quantize(const OpContext& ctx, uint32_t begin, uint32_t end) {
  const float* in = reinterpret_cast<const float*>(ctx.input.data());
  int8_t* out = reinterpret_cast<int8_t*>(ctx.output.data());
  const QuantParams& q = *ctx.out_desc->quant;
  for (uint32_t i = begin; i < end; ++i) {
    float x = in[i];
    if (std::isnan(x)) {
      out[i] = static_cast<int8_t>(q.zero_point);
      continue;
    }
    out[i] = clamp_i8(round_half_away(double(x) / q.scale) + q.zero_point);
  }
}

void k_dequantize(const OpContext& ctx, uint32_t begin, uint32_t end) {
  const int8_t* in = reinterpret_cast<const int8_t*>(ctx.input.data());
  float* out = reinterpret_cast<float*>(ctx.output.data());
  const QuantParams& q = *ctx.in_desc->quant;
  for (uint32_t i = begin; i < end; ++i)
    out[i] = static_cast<float>(q.scale * (in[i] - q.zero_point));
}

void k_relu(const OpContext& ctx, uint32_t begin, uint32_t end) {
  if (ctx.in_desc->dtype == DType::i8) {
    const int8_t* in = reinterpret_cast<const int8_t*>(ctx.input.data());
    int8_t* out = reinterpret_cast<int8_t*>(ctx.output.data());
    int8_t z = static_cast<int8_t>(ctx.in_desc->quant->zero_point);
    for (uint32_t i = begin; i < end; ++i) out[i] = std::max(in[i], z);
  } else {
    const float* in = reinterpret_cast<const float*>(ctx.input.data());
    float* out = reinterpret_cast<float*>(ctx.output.data());
    for (uint32_t i = begin; i < end; ++i) out[i] = std::max(in[i], 0.0f);
  }
}

void k_flatten(const OpContext& ctx, uint32_t begin, uint32_t end) {
  size_t esize = dtype_size(ctx.out_desc->dtype);
  std::memcpy(ctx.output.data() + size_t(begin) * esize,
              ctx.input.data() + size_t(begin) * esize,
              size_t(end - begin) * esize);
}

void k_dense(const OpContext& ctx, uint32_t begin, uint32_t end,
             ScratchArena& scratch) {
  const auto& a = std::get<DenseAttrs>(ctx.op->attrs);
  if (ctx.in_desc->dtype == DType::i8) {
    auto [w, bias] = split_slice<int8_t, int32_t>(
        ctx.weights, uint64_t(a.out_features) * a.in_features);
    const int8_t* x = reinterpret_cast<const int8_t*>(ctx.input.data());
    int8_t* out = reinterpret_cast<int8_t*>(ctx.output.data());
    const QuantParams& qi = *ctx.in_desc->quant;
    const QuantParams& qo = *ctx.out_desc->quant;
    double combined = (a.weight_scale * qi.scale) / qo.scale;

    // Hoist the zero-point shift out of the row loop.
    auto xs_bytes = scratch.request(size_t(a.in_features) * sizeof(int32_t));
    int32_t* xs = reinterpret_cast<int32_t*>(xs_bytes.data());
    for (uint32_t c = 0; c < a.in_features; ++c)
      xs[c] = int32_t(x[c]) - qi.zero_point;

    for (uint32_t r = begin; r < end; ++r) {
      int64_t acc = bias[r];
      const int8_t* wr = w + size_t(r) * a.in_features;
      for (uint32_t c = 0; c < a.in_features; ++c) acc += int64_t(wr[c]) * xs[c];
      out[r] = requantize(acc, combined, qo.zero_point);
    }
  } else {
    auto [w, bias] = split_slice<float, float>(
        ctx.weights, uint64_t(a.out_features) * a.in_features);
    const float* x = reinterpret_cast<const float*>(ctx.input.data());
    float* out = reinterpret_cast<float*>(ctx.output.data());
    for (uint32_t r = begin; r < end; ++r) {
      float acc = bias[r];
      const float* wr = w + size_t(r) * a.in_features;
      for (uint32_t c = 0; c < a.in_features; ++c) acc += wr[c] * x[c];
      out[r] = acc;
    }
  }
}

void k_conv2d(const OpContext& ctx, uint32_t begin, uint32_t end) {
  const auto& a = std::get<ConvAttrs>(ctx.op->attrs);
  const auto& ish = ctx.in_desc->shape;   // N C H W
  const auto& osh = ctx.out_desc->shape;  // N Co Ho Wo
  uint32_t ci_n = ish[1], h = ish[2], w_in = ish[3];
  uint32_t co_n = osh[1], ho = osh[2], wo = osh[3];
  uint64_t wcount = uint64_t(co_n) * ci_n * a.kernel_h * a.kernel_w;

  if (ctx.in_desc->dtype == DType::i8) {
    auto [wts, bias] = split_slice<int8_t, int32_t>(ctx.weights, wcount);
    const int8_t* x = reinterpret_cast<const int8_t*>(ctx.input.data());
    int8_t* out = reinterpret_cast<int8_t*>(ctx.output.data());
    const QuantParams& qi = *ctx.in_desc->quant;
    const QuantParams& qo = *ctx.out_desc->quant;
    double combined = (a.weight_scale * qi.scale) / qo.scale;
    int32_t zi = qi.zero_point;

    for (uint32_t u = begin; u < end; ++u) {  // u indexes (n, co, oh)
      uint32_t n = u / (co_n * ho);
      uint32_t rem = u % (co_n * ho);
      uint32_t co = rem / ho;
      uint32_t oh = rem % ho;
      int8_t* orow = out + (size_t(u)) * wo;
      for (uint32_t ow = 0; ow < wo; ++ow) {
        int64_t acc = bias[co];
        for (uint32_t ci = 0; ci < ci_n; ++ci) {
          const int8_t* wk =
              wts + ((size_t(co) * ci_n + ci) * a.kernel_h) * a.kernel_w;
          const int8_t* xc = x + (size_t(n) * ci_n + ci) * h * w_in;
          for (uint32_t kh = 0; kh < a.kernel_h; ++kh) {
            const int8_t* xrow = xc + size_t(oh * a.stride + kh) * w_in +
                                 size_t(ow) * a.stride;
            const int8_t* wrow = wk + size_t(kh) * a.kernel_w;
            for (uint32_t kw = 0; kw < a.kernel_w; ++kw)
              acc += int64_t(wrow[kw]) * (int32_t(xrow[kw]) - zi);
          }
        }
        orow[ow] = requantize(acc, combined, qo.zero_point);
      }
    }
  } else {
    auto [wts, bias] = split_slice<float, float>(ctx.weights, wcount);
    const float* x = reinterpret_cast<const float*>(ctx.input.data());
    float* out = reinterpret_cast<float*>(ctx.output.data());
    for (uint32_t u = begin; u < end; ++u) {
      uint32_t n = u / (co_n * ho);
      uint32_t rem = u % (co_n * ho);
      uint32_t co = rem / ho;
      uint32_t oh = rem % ho;
      float* orow = out + size_t(u) * wo;
      for (uint32_t ow = 0; ow < wo; ++ow) {
        float acc = bias[co];
        for (uint32_t ci = 0; ci < ci_n; ++ci) {
          const float* wk =
              wts + ((size_t(co) * ci_n + ci) * a.kernel_h) * a.kernel_w;
          const float* xc = x + (size_t(n) * ci_n + ci) * h * w_in;
          for (uint32_t kh = 0; kh < a.kernel_h; ++kh) {
            const float* xrow = xc + size_t(oh * a.stride + kh) * w_in +
                                size_t(ow) * a.stride;
            const float* wrow = wk + size_t(kh) * a.kernel_w;
            for (uint32_t kw = 0; kw < a.kernel_w; ++kw)
              acc += wrow[kw] * xrow[kw];
          }
        }
        orow[ow] = acc;
      }
    }
  }
}

template <typename T>
void pool_impl(const OpContext& ctx, uint32_t begin, uint32_t end) {
  const auto& a = std::get<PoolAttrs>(ctx.op->attrs);
  const auto& ish = ctx.in_desc->shape;
  const auto& osh = ctx.out_desc->shape;
  uint32_t c_n = ish[1], h = ish[2], w_in = ish[3];
  uint32_t ho = osh[2], wo = osh[3];
  const T* x = reinterpret_cast<const T*>(ctx.input.data());
  T* out = reinterpret_cast<T*>(ctx.output.data());

  for (uint32_t u = begin; u < end; ++u) {  // u indexes (n, c, oh)
    uint32_t n = u / (c_n * ho);
    uint32_t rem = u % (c_n * ho);
    uint32_t c = rem / ho;
    uint32_t oh = rem % ho;
    const T* xc = x + (size_t(n) * c_n + c) * h * w_in;
    T* orow = out + size_t(u) * wo;
    for (uint32_t ow = 0; ow < wo; ++ow) {
      T best = xc[size_t(oh * a.stride) * w_in + ow * a.stride];
      for (uint32_t ph = 0; ph < a.pool_h; ++ph)
        for (uint32_t pw = 0; pw < a.pool_w; ++pw) {
          T v = xc[size_t(oh * a.stride + ph) * w_in + ow * a.stride + pw];
          best = std::max(best, v);
        }
      orow[ow] = best;
    }
  }
}

}  // namespace

void run_kernel(const OpContext& ctx, uint32_t begin, uint32_t end,
                ScratchArena& scratch) {
  switch (ctx.op->kind) {
    case LayerKind::quantize: k_quantize(ctx, begin, end); break;
    case LayerKind::dequantize: k_dequantize(ctx, begin, end); break;
    case LayerKind::relu: k_relu(ctx, begin, end); break;
    case LayerKind::flatten: k_flatten(ctx, begin, end); break;
    case LayerKind::dense: k_dense(ctx, begin, end, scratch); break;
    case LayerKind::conv2d: k_conv2d(ctx, begin, end); break;
    case LayerKind::maxpool2d:
      if (ctx.in_desc->dtype == DType::i8) pool_impl<int8_t>(ctx, begin, end);
      else pool_impl<float>(ctx, begin, end);
      break;
  }
}

}  // namespace arielml
