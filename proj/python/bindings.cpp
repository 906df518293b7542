// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the main pipeline operations: load/validate graphs,
// compile modules, run inference (runtime or oracle), profile and bench.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "arielml/compiler.hpp"
#include "arielml/executor.hpp"
#include "arielml/graph.hpp"
#include "arielml/module.hpp"
#include "arielml/oracle.hpp"
#include "arielml/profiler.hpp"

namespace py = pybind11;
using namespace arielml;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<float> as_input(const FloatArray& arr, uint64_t expected,
                            const char* what) {
  if (static_cast<uint64_t>(arr.size()) != expected)
    throw ShapeMismatchError(std::string(what) + ": expected " +
                             std::to_string(expected) + " elements, got " +
                             std::to_string(arr.size()));
  std::vector<float> v(arr.size());
  std::memcpy(v.data(), arr.data(), v.size() * sizeof(float));
  return v;
}

py::array shaped_output(const std::vector<float>& data,
                        const std::vector<uint32_t>& shape) {
  std::vector<py::ssize_t> dims(shape.begin(), shape.end());
  py::array_t<float> out(dims);
  std::memcpy(out.mutable_data(), data.data(), data.size() * sizeof(float));
  return out;
}

std::vector<std::string> diag_strings(const std::vector<Diagnostic>& diags) {
  std::vector<std::string> out;
  for (const auto& d : diags) {
    std::string s;
    if (d.layer >= 0) s += "layer " + std::to_string(d.layer) + ": ";
    if (d.tensor >= 0) s += "tensor " + std::to_string(d.tensor) + ": ";
    out.push_back(s + d.message);
  }
  return out;
}

py::dict report_dict(const ProfileReport& r) {
  py::dict d;
  d["total_ns"] = r.total_ns;
  d["workers"] = r.workers_used;
  d["repeats"] = r.repeats;
  d["peak_heap_bytes"] = r.peak_heap_bytes;
  d["per_worker_scratch_peak_bytes"] = r.per_worker_scratch_peak_bytes;
  py::list ops;
  for (const auto& op : r.per_op) {
    py::dict o;
    o["op_id"] = op.op_id;
    o["kind"] = layer_kind_name(op.kind);
    o["items"] = op.items;
    o["wall_ns"] = op.wall_ns;
    o["worker_ns"] = op.worker_ns;
    ops.append(o);
  }
  d["ops"] = ops;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "build pipeline and multicore runtime for tiny quantized networks";

  py::register_exception<ParseError>(m, "GraphParseError", PyExc_ValueError);
  py::register_exception<ValidationError>(m, "GraphValidationError",
                                          PyExc_ValueError);
  py::register_exception<VerifyError>(m, "ModuleVerifyError", PyExc_ValueError);
  py::register_exception<DecodeError>(m, "ModuleDecodeError", PyExc_ValueError);
  py::register_exception<ShapeMismatchError>(m, "ShapeMismatch",
                                             PyExc_ValueError);
  py::register_exception<IoError>(m, "FileError", PyExc_OSError);
  py::register_exception<ExecutionError>(m, "WorkerError", PyExc_RuntimeError);

  py::class_<ModelGraph>(m, "Graph")
      .def_property_readonly(
          "num_tensors", [](const ModelGraph& g) { return g.tensors.size(); })
      .def_property_readonly(
          "num_layers", [](const ModelGraph& g) { return g.layers.size(); })
      .def_property_readonly("input_shape",
                             [](const ModelGraph& g) {
                               return g.find_tensor(g.input_id)->shape;
                             })
      .def_property_readonly("output_shape",
                             [](const ModelGraph& g) {
                               return g.find_tensor(g.output_id)->shape;
                             })
      .def("validate",
           [](const ModelGraph& g) { return diag_strings(validate_graph(g)); })
      .def("layer_kinds",
           [](const ModelGraph& g) {
             std::vector<std::string> out;
             for (const auto& l : g.layers) out.push_back(layer_kind_name(l.kind));
             return out;
           })
      .def("__repr__", [](const ModelGraph& g) {
        return "<arielml.Graph " + std::to_string(g.layers.size()) +
               " layers, " + std::to_string(g.tensors.size()) + " tensors>";
      });

  py::class_<CompiledModule>(m, "Module")
      .def_property_readonly(
          "num_ops", [](const CompiledModule& m_) { return m_.ops.size(); })
      .def_property_readonly("worker_count_hint",
                             [](const CompiledModule& m_) {
                               return m_.metadata.worker_count_hint;
                             })
      .def_property_readonly("alignment",
                             [](const CompiledModule& m_) {
                               return m_.metadata.alignment;
                             })
      .def_property_readonly("input_shape",
                             [](const CompiledModule& m_) {
                               return m_.find_tensor(m_.metadata.input_desc)
                                   ->shape;
                             })
      .def_property_readonly("output_shape",
                             [](const CompiledModule& m_) {
                               return m_.find_tensor(m_.metadata.output_desc)
                                   ->shape;
                             })
      .def_property_readonly(
          "peak_heap_bytes",
          [](const CompiledModule& m_) { return analyze_peak_heap(m_); })
      .def("verify",
           [](const CompiledModule& m_) {
             return diag_strings(verify_module(m_));
           })
      .def("disassemble",
           [](const CompiledModule& m_) { return disassemble(m_); })
      .def("save",
           [](const CompiledModule& m_, const std::string& path) {
             write_module(m_, path);
           },
           py::arg("path"))
      .def("tile_configs",
           [](const CompiledModule& m_) {
             py::list out;
             for (const auto& op : m_.ops) {
               py::dict d;
               d["op_id"] = op.op_id;
               d["kind"] = layer_kind_name(op.kind);
               d["tile_extent"] = op.tile.tile_extent;
               d["item_count"] = op.tile.item_count;
               out.append(d);
             }
             return out;
           })
      .def("__repr__", [](const CompiledModule& m_) {
        return "<arielml.Module " + std::to_string(m_.ops.size()) + " ops, " +
               std::to_string(m_.weights.size()) + " weight bytes>";
      });

  m.def("load_graph",
        [](const std::string& path) { return load_graph(path); },
        py::arg("path"), "Load and validate a graph file.");

  m.def("parse_graph",
        [](const std::string& text, py::bytes blob) {
          std::string s = blob;
          std::vector<std::byte> bytes(s.size());
          std::memcpy(bytes.data(), s.data(), s.size());
          return parse_graph(text, std::move(bytes));
        },
        py::arg("text"), py::arg("weights") = py::bytes(),
        "Parse graph text with an in-memory weight blob (not validated).");

  m.def("compile_graph",
        [](const ModelGraph& g, uint32_t workers, uint32_t alignment,
           uint32_t oversubscription) {
          return compile(g, TargetInfo{workers, alignment, oversubscription});
        },
        py::arg("graph"), py::arg("workers") = 1, py::arg("alignment") = 16,
        py::arg("oversubscription") = 1,
        "Lower a validated graph into a self-contained module.");

  m.def("load_module",
        [](const std::string& path) { return read_module(path); },
        py::arg("path"));

  m.def("run",
        [](const CompiledModule& mod, const FloatArray& input,
           uint32_t workers, bool simulate) {
          const TensorDesc* din = mod.find_tensor(mod.metadata.input_desc);
          const TensorDesc* dout = mod.find_tensor(mod.metadata.output_desc);
          auto in = as_input(input, din->element_count(), "input");
          std::vector<float> out;
          {
            py::gil_scoped_release release;
            if (simulate) {
              RunOptions opts;
              opts.simulate = true;
              opts.sim_workers = workers;
              Executor ex(mod, in, nullptr, opts);
              while (ex.step()) {
              }
              out = ex.take_result().output;
            } else {
              out = run_inference(mod, in, workers);
            }
          }
          return shaped_output(out, dout->shape);
        },
        py::arg("module"), py::arg("input"), py::arg("workers") = 1,
        py::arg("simulate") = false,
        "Execute a module; bit-identical output for any worker count.");

  m.def("oracle_run",
        [](const ModelGraph& g, const FloatArray& input, bool float32) {
          const TensorDesc* din = g.find_tensor(g.input_id);
          const TensorDesc* dout = g.find_tensor(g.output_id);
          if (!din || din->dtype != DType::f32)
            throw ShapeMismatchError("oracle_run requires an f32 graph input");
          auto in = as_input(input, din->element_count(), "input");
          OracleResult res;
          {
            py::gil_scoped_release release;
            res = float32
                      ? oracle_f32(g, in)
                      : oracle_int(g, std::as_bytes(std::span<const float>(in)));
          }
          std::vector<float> out(res.output_f32().begin(),
                                 res.output_f32().end());
          return shaped_output(out, dout->shape);
        },
        py::arg("graph"), py::arg("input"), py::arg("float32") = false,
        "Reference interpreter; float32=True ignores quantization.");

  m.def("profile",
        [](const CompiledModule& mod, const FloatArray& input,
           uint32_t workers, uint32_t repeats) {
          const TensorDesc* din = mod.find_tensor(mod.metadata.input_desc);
          auto in = as_input(input, din->element_count(), "input");
          ProfileReport rep;
          {
            py::gil_scoped_release release;
            WorkerPool pool(workers);
            rep = profile_inference(mod, in, pool, repeats);
          }
          return report_dict(rep);
        },
        py::arg("module"), py::arg("input"), py::arg("workers") = 1,
        py::arg("repeats") = 10,
        "Median-of-repeats latency/memory report as a dict.");

  m.def("bench",
        [](const CompiledModule& mod, const FloatArray& input,
           const std::vector<uint32_t>& workers_list, uint32_t repeats) {
          const TensorDesc* din = mod.find_tensor(mod.metadata.input_desc);
          auto in = as_input(input, din->element_count(), "input");
          std::vector<BenchRow> rows;
          {
            py::gil_scoped_release release;
            rows = bench_module(mod, in, workers_list, repeats);
          }
          py::list out;
          for (const auto& r : rows) {
            py::dict d;
            d["workers"] = r.workers;
            d["total_ns"] = r.median_total_ns;
            d["speedup"] = r.speedup;
            out.append(d);
          }
          return out;
        },
        py::arg("module"), py::arg("input"),
        py::arg("workers_list") = std::vector<uint32_t>{1, 2, 4},
        py::arg("repeats") = 10,
        "Median total latency and speedup per worker count.");
}
