// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/graph.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace arielml {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

struct Record {
  int line_no;
  std::map<std::string, std::string> kv;

  bool has(const std::string& k) const { return kv.count(k) != 0; }

  const std::string& get(const std::string& k) const {
    auto it = kv.find(k);
    if (it == kv.end())
      throw ParseError("line " + std::to_string(line_no) + ": missing key '" +
                       k + "'");
    return it->second;
  }
};

uint64_t parse_u64(const Record& r, const std::string& k) {
  const std::string& s = r.get(k);
  try {
    size_t pos = 0;
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("negative");
    uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(r.line_no) + ": key '" + k +
                     "' is not an unsigned integer: '" + s + "'");
  }
}

uint32_t parse_u32(const Record& r, const std::string& k) {
  uint64_t v = parse_u64(r, k);
  if (v > 0xFFFFFFFFull)
    throw ParseError("line " + std::to_string(r.line_no) + ": key '" + k +
                     "' out of range");
  return static_cast<uint32_t>(v);
}

int64_t parse_i64(const Record& r, const std::string& k) {
  const std::string& s = r.get(k);
  try {
    size_t pos = 0;
    int64_t v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(r.line_no) + ": key '" + k +
                     "' is not an integer: '" + s + "'");
  }
}

double parse_f64(const Record& r, const std::string& k) {
  const std::string& s = r.get(k);
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(r.line_no) + ": key '" + k +
                     "' is not a number: '" + s + "'");
  }
}

// "5x5" or "1x1x28x28" -> dims
std::vector<uint32_t> parse_dims(const Record& r, const std::string& k) {
  const std::string& s = r.get(k);
  std::vector<uint32_t> dims;
  size_t start = 0;
  while (start <= s.size()) {
    size_t x = s.find('x', start);
    std::string part = s.substr(start, x == std::string::npos ? x : x - start);
    try {
      size_t pos = 0;
      unsigned long v = std::stoul(part, &pos);
      if (pos != part.size()) throw std::invalid_argument("trailing");
      dims.push_back(static_cast<uint32_t>(v));
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(r.line_no) + ": key '" + k +
                       "' has malformed dimension '" + part + "'");
    }
    if (x == std::string::npos) break;
    start = x + 1;
  }
  return dims;
}

Record make_record(const std::string& line, int line_no,
                   const std::set<std::string>& allowed) {
  Record r;
  r.line_no = line_no;
  for (const std::string& tok : split_ws(line)) {
    size_t eq = tok.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ParseError("line " + std::to_string(line_no) +
                       ": expected key=value, got '" + tok + "'");
    std::string key = tok.substr(0, eq);
    if (!allowed.empty() && !allowed.count(key))
      throw ParseError("line " + std::to_string(line_no) + ": unknown key '" +
                       key + "'");
    if (!r.kv.emplace(key, tok.substr(eq + 1)).second)
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" +
                       key + "'");
  }
  return r;
}

bool is_quantized_pair(const TensorDesc& in, const TensorDesc& out) {
  return in.dtype == DType::i8 && out.dtype == DType::i8;
}

}  // namespace

std::string format_diagnostics(const std::vector<Diagnostic>& diags) {
  std::ostringstream os;
  for (const auto& d : diags) {
    if (d.layer >= 0) os << "layer " << d.layer << ": ";
    if (d.tensor >= 0) os << "tensor " << d.tensor << ": ";
    os << d.message << "\n";
  }
  return os.str();
}

uint64_t weight_bytes(const LayerDesc& layer, const ModelGraph& g) {
  const TensorDesc* in = g.find_tensor(layer.inputs.empty() ? ~0u : layer.inputs[0]);
  size_t esize = (in && in->dtype == DType::i8) ? 1 : 4;
  if (layer.kind == LayerKind::dense)
    return uint64_t(layer.out_features) * layer.in_features * esize;
  if (layer.kind == LayerKind::conv2d) {
    uint64_t in_c = (in && in->shape.size() == 4) ? in->shape[1] : 0;
    return uint64_t(layer.out_channels) * in_c * layer.kernel_h *
           layer.kernel_w * esize;
  }
  return 0;
}

uint64_t bias_bytes(const LayerDesc& layer, const ModelGraph& g) {
  (void)g;  // i32 and f32 biases are both 4 bytes per element
  if (layer.kind == LayerKind::dense) return uint64_t(layer.out_features) * 4;
  if (layer.kind == LayerKind::conv2d) return uint64_t(layer.out_channels) * 4;
  return 0;
}

std::string graph_weight_path(const std::string& text) {
  std::istringstream iss(text);
  std::string line;
  while (std::getline(iss, line)) {
    if (line.rfind("weights=", 0) == 0) return line.substr(8);
    if (!line.empty() && line.back() == ':') break;
  }
  return "";
}

ModelGraph parse_graph(const std::string& text, std::vector<std::byte> blob) {
  ModelGraph g;
  g.weights = std::move(blob);

  static const std::set<std::string> tensor_keys = {"id", "shape", "dtype",
                                                    "scale", "zero_point"};
  static const std::set<std::string> layer_keys = {
      "kind",         "inputs",      "output", "kernel",       "pool",
      "stride",       "out_channels", "in_features", "out_features",
      "weight_scale", "weights",     "bias"};
  static const std::set<std::string> io_keys = {"input", "output"};
  static const std::set<std::string> header_keys = {"version", "weights"};

  enum Section { header, tensors, layers, io } section = header;
  bool saw_input = false, saw_output = false;

  std::istringstream iss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(iss, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (split_ws(line).empty()) continue;

    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    trimmed.erase(trimmed.find_last_not_of(" \t\r") + 1);
    if (trimmed == "tensors:") { section = tensors; continue; }
    if (trimmed == "layers:") { section = layers; continue; }
    if (trimmed == "io:") { section = io; continue; }

    switch (section) {
      case header: {
        Record r = make_record(trimmed, line_no, header_keys);
        if (r.has("version") && parse_u32(r, "version") != 1)
          throw ParseError("line " + std::to_string(line_no) +
                           ": unsupported graph format version");
        // "weights" names the sidecar blob; resolved by load_graph.
        break;
      }
      case tensors: {
        Record r = make_record(trimmed, line_no, tensor_keys);
        TensorDesc t;
        t.id = parse_u32(r, "id");
        t.shape = parse_dims(r, "shape");
        const std::string& dt = r.get("dtype");
        if (dt == "f32") t.dtype = DType::f32;
        else if (dt == "i8") t.dtype = DType::i8;
        else if (dt == "i32") t.dtype = DType::i32;
        else
          throw ParseError("line " + std::to_string(line_no) +
                           ": unknown dtype '" + dt + "'");
        if (r.has("scale") || r.has("zero_point")) {
          QuantParams q;
          q.scale = parse_f64(r, "scale");
          q.zero_point = static_cast<int32_t>(parse_i64(r, "zero_point"));
          t.quant = q;
        }
        g.tensors.push_back(std::move(t));
        break;
      }
      case layers: {
        Record r = make_record(trimmed, line_no, layer_keys);
        LayerDesc l;
        auto kind = layer_kind_from_name(r.get("kind"));
        if (!kind)
          throw ParseError("line " + std::to_string(line_no) +
                           ": unknown layer kind '" + r.get("kind") + "'");
        l.kind = *kind;
        {
          const std::string& ins = r.get("inputs");
          size_t start = 0;
          while (start <= ins.size()) {
            size_t comma = ins.find(',', start);
            std::string part = ins.substr(
                start, comma == std::string::npos ? comma : comma - start);
            try {
              size_t pos = 0;
              l.inputs.push_back(
                  static_cast<uint32_t>(std::stoul(part, &pos)));
              if (pos != part.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
              throw ParseError("line " + std::to_string(line_no) +
                               ": malformed inputs list");
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
          }
        }
        l.output = parse_u32(r, "output");
        if (r.has("kernel")) {
          auto k = parse_dims(r, "kernel");
          if (k.size() != 2)
            throw ParseError("line " + std::to_string(line_no) +
                             ": kernel must be HxW");
          l.kernel_h = k[0];
          l.kernel_w = k[1];
        }
        if (r.has("pool")) {
          auto p = parse_dims(r, "pool");
          if (p.size() != 2)
            throw ParseError("line " + std::to_string(line_no) +
                             ": pool must be HxW");
          l.pool_h = p[0];
          l.pool_w = p[1];
        }
        if (r.has("stride")) l.stride = parse_u32(r, "stride");
        if (r.has("out_channels")) l.out_channels = parse_u32(r, "out_channels");
        if (r.has("in_features")) l.in_features = parse_u32(r, "in_features");
        if (r.has("out_features")) l.out_features = parse_u32(r, "out_features");
        if (r.has("weight_scale")) l.weight_scale = parse_f64(r, "weight_scale");
        if (r.has("weights")) l.weight_offset = parse_u64(r, "weights");
        if (r.has("bias")) l.bias_offset = parse_u64(r, "bias");
        g.layers.push_back(std::move(l));
        break;
      }
      case io: {
        Record r = make_record(trimmed, line_no, io_keys);
        if (r.has("input")) { g.input_id = parse_u32(r, "input"); saw_input = true; }
        if (r.has("output")) { g.output_id = parse_u32(r, "output"); saw_output = true; }
        break;
      }
    }
  }
  if (!saw_input || !saw_output)
    throw ParseError("io section must define both input= and output=");
  return g;
}

std::vector<Diagnostic> validate_graph(const ModelGraph& g) {
  std::vector<Diagnostic> diags;
  auto diag = [&](int layer, int64_t tensor, std::string msg) {
    diags.push_back({layer, tensor, std::move(msg)});
  };

  // Tensor-level invariants.
  std::set<uint32_t> ids;
  bool any_i8 = false;
  for (const auto& t : g.tensors) {
    if (!ids.insert(t.id).second) diag(-1, t.id, "duplicate tensor id");
    if (t.shape.empty()) diag(-1, t.id, "empty shape");
    for (uint32_t d : t.shape)
      if (d == 0) diag(-1, t.id, "zero-sized dimension");
    if (t.dtype == DType::i8) {
      any_i8 = true;
      if (!t.quant) diag(-1, t.id, "i8 tensor missing quantization params");
    }
    if (t.dtype == DType::f32 && t.quant)
      diag(-1, t.id, "f32 tensor must not carry quantization params");
    if (t.quant) {
      if (!(t.quant->scale > 0.0)) diag(-1, t.id, "scale must be positive");
      if (t.quant->zero_point < -128 || t.quant->zero_point > 127)
        diag(-1, t.id, "zero_point outside i8 range");
    }
  }

  const TensorDesc* gin = g.find_tensor(g.input_id);
  const TensorDesc* gout = g.find_tensor(g.output_id);
  if (!gin) diag(-1, g.input_id, "graph input tensor does not exist");
  if (!gout) diag(-1, g.output_id, "graph output tensor does not exist");

  // Writer bookkeeping: every non-input tensor is written exactly once.
  std::map<uint32_t, std::vector<int>> writers;
  for (size_t i = 0; i < g.layers.size(); ++i)
    writers[g.layers[i].output].push_back(static_cast<int>(i));
  for (const auto& [tid, ws] : writers) {
    if (ws.size() > 1) {
      std::string msg = "tensor written by multiple layers:";
      for (int w : ws) msg += " " + std::to_string(w);
      diag(ws[0], tid, msg);
    }
    if (tid == g.input_id)
      diag(ws[0], tid, "graph input tensor must not be written");
  }
  for (const auto& t : g.tensors)
    if (t.id != g.input_id && !writers.count(t.id))
      diag(-1, t.id, "tensor is never written");

  // Topological order: inputs must be the graph input or already written.
  std::set<uint32_t> written;
  for (size_t i = 0; i < g.layers.size(); ++i) {
    for (uint32_t in : g.layers[i].inputs) {
      if (!g.find_tensor(in)) {
        diag(static_cast<int>(i), in, "input tensor id does not exist");
        continue;
      }
      if (in != g.input_id && !written.count(in))
        diag(static_cast<int>(i), in,
             "input tensor not produced by an earlier layer");
    }
    written.insert(g.layers[i].output);
  }

  // Per-layer shape and dtype rules.
  for (size_t li = 0; li < g.layers.size(); ++li) {
    const LayerDesc& l = g.layers[li];
    int i = static_cast<int>(li);
    if (l.inputs.size() != 1) {
      diag(i, -1, "layer must have exactly one input");
      continue;
    }
    const TensorDesc* in = g.find_tensor(l.inputs[0]);
    const TensorDesc* out = g.find_tensor(l.output);
    if (!out) diag(i, l.output, "output tensor id does not exist");
    if (!in || !out) continue;

    bool wants_weights =
        l.kind == LayerKind::conv2d || l.kind == LayerKind::dense;
    if (wants_weights) {
      if (!l.weight_offset) diag(i, -1, "missing weights offset");
      if (!l.bias_offset) diag(i, -1, "missing bias offset");
      bool quantized = is_quantized_pair(*in, *out);
      if (quantized && !(l.weight_scale > 0.0))
        diag(i, -1, "quantized layer requires weight_scale > 0");
      if (!quantized && l.weight_scale != 0.0)
        diag(i, -1, "float layer must not carry weight_scale");
      if (in->dtype != out->dtype)
        diag(i, -1, "input and output dtypes must match");
      else if (in->dtype == DType::i32)
        diag(i, -1, "i32 activations are not supported");
    } else {
      if (l.weight_offset || l.bias_offset)
        diag(i, -1, std::string(layer_kind_name(l.kind)) +
                        " must not carry weights");
    }

    auto same_quant = [&]() {
      if (in->dtype != out->dtype) {
        diag(i, -1, "input and output dtypes must match");
        return;
      }
      if (in->quant != out->quant)
        diag(i, -1, "input and output quantization params must match");
    };

    switch (l.kind) {
      case LayerKind::conv2d: {
        if (in->shape.size() != 4 || out->shape.size() != 4) {
          diag(i, -1, "conv2d requires 4-D NCHW tensors");
          break;
        }
        if (l.kernel_h == 0 || l.kernel_w == 0 || l.stride == 0 ||
            l.out_channels == 0) {
          diag(i, -1, "conv2d attrs must be positive");
          break;
        }
        uint32_t n = in->shape[0], h = in->shape[2], w = in->shape[3];
        if (out->shape[0] != n) diag(i, -1, "conv2d must preserve batch dim");
        if (out->shape[1] != l.out_channels)
          diag(i, -1, "conv2d output channels mismatch");
        if (h < l.kernel_h || w < l.kernel_w) {
          diag(i, -1, "conv2d kernel larger than input");
          break;
        }
        if ((h - l.kernel_h) % l.stride != 0 ||
            (w - l.kernel_w) % l.stride != 0) {
          diag(i, -1, "conv2d extent minus kernel not divisible by stride");
          break;
        }
        uint32_t oh = (h - l.kernel_h) / l.stride + 1;
        uint32_t ow = (w - l.kernel_w) / l.stride + 1;
        if (out->shape[2] != oh || out->shape[3] != ow)
          diag(i, -1, "conv2d output spatial shape mismatch (expected " +
                          std::to_string(oh) + "x" + std::to_string(ow) + ")");
        break;
      }
      case LayerKind::maxpool2d: {
        if (in->shape.size() != 4 || out->shape.size() != 4) {
          diag(i, -1, "maxpool2d requires 4-D NCHW tensors");
          break;
        }
        if (l.pool_h == 0 || l.pool_w == 0 || l.stride == 0) {
          diag(i, -1, "maxpool2d attrs must be positive");
          break;
        }
        same_quant();
        uint32_t h = in->shape[2], w = in->shape[3];
        if (out->shape[0] != in->shape[0] || out->shape[1] != in->shape[1])
          diag(i, -1, "maxpool2d must preserve batch and channel dims");
        if (h < l.pool_h || w < l.pool_w) {
          diag(i, -1, "maxpool2d window larger than input");
          break;
        }
        if ((h - l.pool_h) % l.stride != 0 || (w - l.pool_w) % l.stride != 0) {
          diag(i, -1, "maxpool2d extent minus window not divisible by stride");
          break;
        }
        uint32_t oh = (h - l.pool_h) / l.stride + 1;
        uint32_t ow = (w - l.pool_w) / l.stride + 1;
        if (out->shape[2] != oh || out->shape[3] != ow)
          diag(i, -1, "maxpool2d output spatial shape mismatch");
        break;
      }
      case LayerKind::dense: {
        if (l.in_features == 0 || l.out_features == 0) {
          diag(i, -1, "dense features must be positive");
          break;
        }
        if (in->shape.size() != 1 || in->shape[0] != l.in_features)
          diag(i, -1, "dense input shape must equal [in_features]");
        if (out->shape.size() != 1 || out->shape[0] != l.out_features)
          diag(i, -1, "dense output shape must equal [out_features]");
        break;
      }
      case LayerKind::relu: {
        if (in->shape != out->shape) diag(i, -1, "relu must preserve shape");
        same_quant();
        break;
      }
      case LayerKind::flatten: {
        if (out->shape.size() != 1)
          diag(i, -1, "flatten output must be rank 1");
        if (in->element_count() != out->element_count())
          diag(i, -1, "flatten must preserve element count");
        same_quant();
        break;
      }
      case LayerKind::quantize: {
        if (in->dtype != DType::f32 || out->dtype != DType::i8)
          diag(i, -1, "quantize maps f32 to i8");
        if (in->shape != out->shape)
          diag(i, -1, "quantize must preserve shape");
        break;
      }
      case LayerKind::dequantize: {
        if (in->dtype != DType::i8 || out->dtype != DType::f32)
          diag(i, -1, "dequantize maps i8 to f32");
        if (in->shape != out->shape)
          diag(i, -1, "dequantize must preserve shape");
        break;
      }
      default:
        diag(i, -1, "unsupported layer kind");
    }

    // Weight blob bounds; 4-byte fields must sit at 4-byte offsets.
    if (wants_weights && l.weight_offset && l.bias_offset) {
      uint64_t wb = weight_bytes(l, g);
      uint64_t bb = bias_bytes(l, g);
      if (*l.weight_offset + wb > g.weights.size())
        diag(i, -1, "weights extend past end of blob");
      if (*l.bias_offset + bb > g.weights.size())
        diag(i, -1, "bias extends past end of blob");
      if (*l.bias_offset % 4 != 0)
        diag(i, -1, "bias offset must be 4-byte aligned");
      if (in && in->dtype == DType::f32 && *l.weight_offset % 4 != 0)
        diag(i, -1, "f32 weights offset must be 4-byte aligned");
    }
  }

  // Quantized graphs bridge f32 I/O through quantize/dequantize.
  if (any_i8 && gin && gin->dtype == DType::f32) {
    for (size_t i = 0; i < g.layers.size(); ++i) {
      if (std::find(g.layers[i].inputs.begin(), g.layers[i].inputs.end(),
                    g.input_id) == g.layers[i].inputs.end())
        continue;
      if (g.layers[i].kind != LayerKind::quantize)
        diag(static_cast<int>(i), g.input_id,
             "first consumer of the f32 input must be quantize");
      break;
    }
  }
  if (any_i8 && gout && gout->dtype == DType::f32) {
    auto it = writers.find(g.output_id);
    if (it != writers.end() && !it->second.empty()) {
      int w = it->second.front();
      if (g.layers[w].kind != LayerKind::dequantize)
        diag(w, g.output_id,
             "producer of the f32 output must be dequantize");
    }
  }

  return diags;
}

ModelGraph load_graph(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open graph file: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();

  std::vector<std::byte> blob;
  std::string wpath = graph_weight_path(text);
  if (!wpath.empty()) {
    std::filesystem::path full = path.parent_path() / wpath;
    std::ifstream wf(full, std::ios::binary);
    if (!wf) throw IoError("cannot open weight blob: " + full.string());
    wf.seekg(0, std::ios::end);
    blob.resize(static_cast<size_t>(wf.tellg()));
    wf.seekg(0);
    wf.read(reinterpret_cast<char*>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
    if (!wf) throw IoError("short read on weight blob: " + full.string());
  }

  ModelGraph g = parse_graph(text, std::move(blob));
  auto diags = validate_graph(g);
  if (!diags.empty())
    throw ValidationError("invalid graph " + path.string() + ":\n" +
                          format_diagnostics(diags));
  return g;
}

std::string serialize_graph(const ModelGraph& g,
                            const std::string& weight_path) {
  std::ostringstream os;
  os << "version=1\n";
  if (!weight_path.empty()) os << "weights=" << weight_path << "\n";
  os << "\ntensors:\n";
  auto dims = [](const std::vector<uint32_t>& d) {
    std::string s;
    for (size_t i = 0; i < d.size(); ++i)
      s += (i ? "x" : "") + std::to_string(d[i]);
    return s;
  };
  for (const auto& t : g.tensors) {
    os << "id=" << t.id << " shape=" << dims(t.shape)
       << " dtype=" << dtype_name(t.dtype);
    if (t.quant)
      os << " scale=" << fmt_double(t.quant->scale)
         << " zero_point=" << t.quant->zero_point;
    os << "\n";
  }
  os << "\nlayers:\n";
  for (const auto& l : g.layers) {
    os << "kind=" << layer_kind_name(l.kind) << " inputs=";
    for (size_t i = 0; i < l.inputs.size(); ++i)
      os << (i ? "," : "") << l.inputs[i];
    os << " output=" << l.output;
    switch (l.kind) {
      case LayerKind::conv2d:
        os << " kernel=" << l.kernel_h << "x" << l.kernel_w
           << " stride=" << l.stride << " out_channels=" << l.out_channels;
        break;
      case LayerKind::maxpool2d:
        os << " pool=" << l.pool_h << "x" << l.pool_w
           << " stride=" << l.stride;
        break;
      case LayerKind::dense:
        os << " in_features=" << l.in_features
           << " out_features=" << l.out_features;
        break;
      default:
        break;
    }
    if (l.weight_scale > 0.0) os << " weight_scale=" << fmt_double(l.weight_scale);
    if (l.weight_offset) os << " weights=" << *l.weight_offset;
    if (l.bias_offset) os << " bias=" << *l.bias_offset;
    os << "\n";
  }
  os << "\nio:\n";
  os << "input=" << g.input_id << "\n";
  os << "output=" << g.output_id << "\n";
  return os.str();
}

}  // namespace arielml
