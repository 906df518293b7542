// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/oracle.hpp"

#include <cmath>
#include <cstring>
#include <map>

#include "arielml/errors.hpp"

namespace arielml {

namespace {

// Round half away from zero, written from the definition rather than via
// llround so the reference stays independent of the kernel path. Comparing
// v against the midpoint floor(v) + 0.5 is exact: the midpoint itself is
// representable for |floor(v)| < 2^52 and v is not modified.
long long ref_round(double v) {
  double f = std::floor(v);
  double mid = f + 0.5;
  if (v > mid) return static_cast<long long>(f) + 1;
  if (v < mid) return static_cast<long long>(f);
  return v >= 0.0 ? static_cast<long long>(f) + 1 : static_cast<long long>(f);
}

int8_t ref_sat(long long v) {
  if (v < -128) return -128;
  if (v > 127) return 127;
  return static_cast<int8_t>(v);
}

int8_t ref_requant(long long acc, double w_scale, double in_scale,
                   double out_scale, int32_t out_zp) {
  double combined = (w_scale * in_scale) / out_scale;
  return ref_sat(ref_round(double(acc) * combined) + out_zp);
}

struct Ctx {
  const ModelGraph& g;
  std::map<uint32_t, std::vector<std::byte>> values;

  const TensorDesc& desc(uint32_t id) const {
    const TensorDesc* t = g.find_tensor(id);
    if (!t) throw ShapeMismatchError("oracle: unknown tensor id");
    return *t;
  }
  template <typename T>
  const T* in(uint32_t id) const {
    return reinterpret_cast<const T*>(values.at(id).data());
  }
  template <typename T>
  T* make(uint32_t id, uint64_t count) {
    auto& v = values[id];
    v.assign(count * sizeof(T), std::byte{0});
    return reinterpret_cast<T*>(v.data());
  }
};

// Weight matrix / bias vector views straight from the graph blob.
template <typename T>
const T* blob_at(const ModelGraph& g, uint64_t offset) {
  return reinterpret_cast<const T*>(g.weights.data() + offset);
}

void int_dense(Ctx& c, const LayerDesc& l) {
  const TensorDesc& di = c.desc(l.inputs[0]);
  const TensorDesc& d_out = c.desc(l.output);
  if (di.dtype == DType::i8) {
    const int8_t* x = c.in<int8_t>(l.inputs[0]);
    const int8_t* w = blob_at<int8_t>(c.g, *l.weight_offset);
    const int32_t* b = blob_at<int32_t>(c.g, *l.bias_offset);
    int8_t* y = c.make<int8_t>(l.output, l.out_features);
    for (uint32_t r = 0; r < l.out_features; ++r) {
      long long acc = b[r];
      for (uint32_t cc = 0; cc < l.in_features; ++cc)
        acc += (long long)(w[size_t(r) * l.in_features + cc]) *
               ((int)x[cc] - di.quant->zero_point);
      y[r] = ref_requant(acc, l.weight_scale, di.quant->scale,
                         d_out.quant->scale, d_out.quant->zero_point);
    }
  } else {
    const float* x = c.in<float>(l.inputs[0]);
    const float* w = blob_at<float>(c.g, *l.weight_offset);
    const float* b = blob_at<float>(c.g, *l.bias_offset);
    float* y = c.make<float>(l.output, l.out_features);
    for (uint32_t r = 0; r < l.out_features; ++r) {
      float acc = b[r];
      for (uint32_t cc = 0; cc < l.in_features; ++cc)
        acc += w[size_t(r) * l.in_features + cc] * x[cc];
      y[r] = acc;
    }
  }
}

void int_conv2d(Ctx& c, const LayerDesc& l) {
  const TensorDesc& di = c.desc(l.inputs[0]);
  const TensorDesc& dout = c.desc(l.output);
  uint32_t n_n = di.shape[0], ci_n = di.shape[1], h = di.shape[2],
           w_in = di.shape[3];
  uint32_t co_n = dout.shape[1], ho = dout.shape[2], wo = dout.shape[3];
  auto widx = [&](uint32_t co, uint32_t ci, uint32_t kh, uint32_t kw) {
    return ((size_t(co) * ci_n + ci) * l.kernel_h + kh) * l.kernel_w + kw;
  };
  auto xidx = [&](uint32_t n, uint32_t ci, uint32_t y, uint32_t x) {
    return ((size_t(n) * ci_n + ci) * h + y) * w_in + x;
  };
  if (di.dtype == DType::i8) {
    const int8_t* x = c.in<int8_t>(l.inputs[0]);
    const int8_t* w = blob_at<int8_t>(c.g, *l.weight_offset);
    const int32_t* b = blob_at<int32_t>(c.g, *l.bias_offset);
    int8_t* y = c.make<int8_t>(l.output, dout.element_count());
    size_t o = 0;
    for (uint32_t n = 0; n < n_n; ++n)
      for (uint32_t co = 0; co < co_n; ++co)
        for (uint32_t oh = 0; oh < ho; ++oh)
          for (uint32_t ow = 0; ow < wo; ++ow) {
            long long acc = b[co];
            for (uint32_t ci = 0; ci < ci_n; ++ci)
              for (uint32_t kh = 0; kh < l.kernel_h; ++kh)
                for (uint32_t kw = 0; kw < l.kernel_w; ++kw)
                  acc += (long long)w[widx(co, ci, kh, kw)] *
                         ((int)x[xidx(n, ci, oh * l.stride + kh,
                                      ow * l.stride + kw)] -
                          di.quant->zero_point);
            y[o++] = ref_requant(acc, l.weight_scale, di.quant->scale,
                                 dout.quant->scale, dout.quant->zero_point);
          }
  } else {
    const float* x = c.in<float>(l.inputs[0]);
    const float* w = blob_at<float>(c.g, *l.weight_offset);
    const float* b = blob_at<float>(c.g, *l.bias_offset);
    float* y = c.make<float>(l.output, dout.element_count());
    size_t o = 0;
    for (uint32_t n = 0; n < n_n; ++n)
      for (uint32_t co = 0; co < co_n; ++co)
        for (uint32_t oh = 0; oh < ho; ++oh)
          for (uint32_t ow = 0; ow < wo; ++ow) {
            float acc = b[co];
            for (uint32_t ci = 0; ci < ci_n; ++ci)
              for (uint32_t kh = 0; kh < l.kernel_h; ++kh)
                for (uint32_t kw = 0; kw < l.kernel_w; ++kw)
                  acc += w[widx(co, ci, kh, kw)] *
                         x[xidx(n, ci, oh * l.stride + kh, ow * l.stride + kw)];
            y[o++] = acc;
          }
  }
}

template <typename T>
void pool_ref(Ctx& c, const LayerDesc& l) {
  const TensorDesc& di = c.desc(l.inputs[0]);
  const TensorDesc& dout = c.desc(l.output);
  uint32_t n_n = di.shape[0], c_n = di.shape[1], h = di.shape[2],
           w_in = di.shape[3];
  uint32_t ho = dout.shape[2], wo = dout.shape[3];
  const T* x = c.in<T>(l.inputs[0]);
  T* y = c.make<T>(l.output, dout.element_count());
  size_t o = 0;
  for (uint32_t n = 0; n < n_n; ++n)
    for (uint32_t ch = 0; ch < c_n; ++ch)
      for (uint32_t oh = 0; oh < ho; ++oh)
        for (uint32_t ow = 0; ow < wo; ++ow) {
          T best = x[((size_t(n) * c_n + ch) * h + oh * l.stride) * w_in +
                     ow * l.stride];
          for (uint32_t ph = 0; ph < l.pool_h; ++ph)
            for (uint32_t pw = 0; pw < l.pool_w; ++pw) {
              T v = x[((size_t(n) * c_n + ch) * h + oh * l.stride + ph) * w_in +
                      ow * l.stride + pw];
              if (v > best) best = v;
            }
          y[o++] = best;
        }
}

}  // namespace

uint64_t fnv1a(std::span<const std::byte> bytes) {
  uint64_t h = 1469598103934665603ull;
  for (std::byte b : bytes) {
    h ^= static_cast<uint8_t>(b);
    h *= 1099511628211ull;
  }
  return h;
}

OracleResult oracle_int(const ModelGraph& g, std::span<const std::byte> input) {
  const TensorDesc* din = g.find_tensor(g.input_id);
  if (!din) throw ShapeMismatchError("oracle: graph input tensor missing");
  if (input.size() != din->byte_size())
    throw ShapeMismatchError("oracle: input byte size mismatch");

  Ctx c{g, {}};
  c.values[g.input_id].assign(input.begin(), input.end());

  OracleResult res;
  for (const LayerDesc& l : g.layers) {
    const TensorDesc& di = c.desc(l.inputs[0]);
    const TensorDesc& dout = c.desc(l.output);
    switch (l.kind) {
      case LayerKind::quantize: {
        const float* x = c.in<float>(l.inputs[0]);
        int8_t* y = c.make<int8_t>(l.output, dout.element_count());
        for (uint64_t i = 0; i < dout.element_count(); ++i) {
          if (std::isnan(x[i])) {
            y[i] = static_cast<int8_t>(dout.quant->zero_point);
          } else {
            y[i] = ref_sat(ref_round(double(x[i]) / dout.quant->scale) +
                           dout.quant->zero_point);
          }
        }
        break;
      }
      case LayerKind::dequantize: {
        const int8_t* x = c.in<int8_t>(l.inputs[0]);
        float* y = c.make<float>(l.output, dout.element_count());
        for (uint64_t i = 0; i < dout.element_count(); ++i)
          y[i] = static_cast<float>(di.quant->scale *
                                    (x[i] - di.quant->zero_point));
        break;
      }
      case LayerKind::relu: {
        if (di.dtype == DType::i8) {
          const int8_t* x = c.in<int8_t>(l.inputs[0]);
          int8_t* y = c.make<int8_t>(l.output, dout.element_count());
          int8_t z = static_cast<int8_t>(di.quant->zero_point);
          for (uint64_t i = 0; i < dout.element_count(); ++i)
            y[i] = x[i] > z ? x[i] : z;
        } else {
          const float* x = c.in<float>(l.inputs[0]);
          float* y = c.make<float>(l.output, dout.element_count());
          for (uint64_t i = 0; i < dout.element_count(); ++i)
            y[i] = x[i] > 0.0f ? x[i] : 0.0f;
        }
        break;
      }
      case LayerKind::flatten: {
        auto src = c.values.at(l.inputs[0]);
        c.values[l.output] = src;
        break;
      }
      case LayerKind::dense:
        int_dense(c, l);
        break;
      case LayerKind::conv2d:
        int_conv2d(c, l);
        break;
      case LayerKind::maxpool2d:
        if (di.dtype == DType::i8) pool_ref<int8_t>(c, l);
        else pool_ref<float>(c, l);
        break;
    }
    res.layer_outputs.push_back(c.values.at(l.output));
  }
  res.output = c.values.at(g.output_id);
  return res;
}

OracleResult oracle_f32(const ModelGraph& g, std::span<const float> input) {
  const TensorDesc* din = g.find_tensor(g.input_id);
  if (!din) throw ShapeMismatchError("oracle: graph input tensor missing");
  if (input.size() != din->element_count())
    throw ShapeMismatchError("oracle: input element count mismatch");

  // All values flow as f32; integer layers use dequantized weights:
  //   w_f = w_scale * w_q,  b_f = (in_scale * w_scale) * b_q.
  std::map<uint32_t, std::vector<float>> vals;
  vals[g.input_id].assign(input.begin(), input.end());

  OracleResult res;
  auto push = [&](uint32_t id) {
    const auto& v = vals.at(id);
    std::vector<std::byte> bytes(v.size() * sizeof(float));
    std::memcpy(bytes.data(), v.data(), bytes.size());
    res.layer_outputs.push_back(std::move(bytes));
  };

  for (const LayerDesc& l : g.layers) {
    const TensorDesc* di = g.find_tensor(l.inputs[0]);
    const TensorDesc* dout = g.find_tensor(l.output);
    const auto& x = vals.at(l.inputs[0]);
    bool quantized = di->dtype == DType::i8;

    auto dq_weights = [&](uint64_t count) {
      std::vector<float> w(count);
      if (quantized) {
        const int8_t* wq = blob_at<int8_t>(g, *l.weight_offset);
        for (uint64_t i = 0; i < count; ++i)
          w[i] = static_cast<float>(l.weight_scale * wq[i]);
      } else {
        std::memcpy(w.data(), g.weights.data() + *l.weight_offset,
                    count * sizeof(float));
      }
      return w;
    };
    auto dq_bias = [&](uint64_t count) {
      std::vector<float> b(count);
      if (quantized) {
        const int32_t* bq = blob_at<int32_t>(g, *l.bias_offset);
        double s = di->quant->scale * l.weight_scale;
        for (uint64_t i = 0; i < count; ++i)
          b[i] = static_cast<float>(s * bq[i]);
      } else {
        std::memcpy(b.data(), g.weights.data() + *l.bias_offset,
                    count * sizeof(float));
      }
      return b;
    };

    switch (l.kind) {
      case LayerKind::quantize:
      case LayerKind::dequantize:
      case LayerKind::flatten:
        vals[l.output] = x;
        break;
      case LayerKind::relu: {
        auto& y = vals[l.output];
        y.resize(x.size());
        for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
        break;
      }
      case LayerKind::dense: {
        auto w = dq_weights(uint64_t(l.out_features) * l.in_features);
        auto b = dq_bias(l.out_features);
        auto& y = vals[l.output];
        y.resize(l.out_features);
        for (uint32_t r = 0; r < l.out_features; ++r) {
          float acc = b[r];
          for (uint32_t cc = 0; cc < l.in_features; ++cc)
            acc += w[size_t(r) * l.in_features + cc] * x[cc];
          y[r] = acc;
        }
        break;
      }
      case LayerKind::conv2d: {
        uint32_t ci_n = di->shape[1], h = di->shape[2], w_in = di->shape[3];
        uint32_t co_n = dout->shape[1], ho = dout->shape[2], wo = dout->shape[3];
        auto w = dq_weights(uint64_t(co_n) * ci_n * l.kernel_h * l.kernel_w);
        auto b = dq_bias(co_n);
        auto& y = vals[l.output];
        y.resize(dout->element_count());
        size_t o = 0;
        for (uint32_t n = 0; n < di->shape[0]; ++n)
          for (uint32_t co = 0; co < co_n; ++co)
            for (uint32_t oh = 0; oh < ho; ++oh)
              for (uint32_t ow = 0; ow < wo; ++ow) {
                float acc = b[co];
                for (uint32_t ci = 0; ci < ci_n; ++ci)
                  for (uint32_t kh = 0; kh < l.kernel_h; ++kh)
                    for (uint32_t kw = 0; kw < l.kernel_w; ++kw)
                      acc += w[((size_t(co) * ci_n + ci) * l.kernel_h + kh) *
                                   l.kernel_w +
                               kw] *
                             x[((size_t(n) * ci_n + ci) * h + oh * l.stride +
                                kh) *
                                   w_in +
                               ow * l.stride + kw];
                y[o++] = acc;
              }
        break;
      }
      case LayerKind::maxpool2d: {
        uint32_t c_n = di->shape[1], h = di->shape[2], w_in = di->shape[3];
        uint32_t ho = dout->shape[2], wo = dout->shape[3];
        auto& y = vals[l.output];
        y.resize(dout->element_count());
        size_t o = 0;
        for (uint32_t n = 0; n < di->shape[0]; ++n)
          for (uint32_t ch = 0; ch < c_n; ++ch)
            for (uint32_t oh = 0; oh < ho; ++oh)
              for (uint32_t ow = 0; ow < wo; ++ow) {
                float best =
                    x[((size_t(n) * c_n + ch) * h + oh * l.stride) * w_in +
                      ow * l.stride];
                for (uint32_t ph = 0; ph < l.pool_h; ++ph)
                  for (uint32_t pw = 0; pw < l.pool_w; ++pw)
                    best = std::max(
                        best, x[((size_t(n) * c_n + ch) * h + oh * l.stride +
                                 ph) *
                                    w_in +
                                ow * l.stride + pw]);
                y[o++] = best;
              }
        break;
      }
    }
    push(l.output);
  }

  const auto& out = vals.at(g.output_id);
  res.output.resize(out.size() * sizeof(float));
  std::memcpy(res.output.data(), out.data(), res.output.size());
  return res;
}

}  // namespace arielml
