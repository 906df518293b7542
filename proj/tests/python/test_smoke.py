# Copyright 2026 The Ariel-ML Authors
# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the python module: compile, run, oracle, profile."""

import os
import pathlib

import numpy as np
import pytest

import arielml

FIXTURES = pathlib.Path(os.environ.get("ARIELML_FIXTURES", "fixtures"))


@pytest.fixture(scope="module")
def lenet():
    return arielml.load_graph(str(FIXTURES / "lenet5.graph"))


@pytest.fixture(scope="module")
def lenet_input():
    raw = (FIXTURES / "input_0.tensor").read_bytes()
    header, _, payload = raw.partition(b"\n")
    assert header.startswith(b"shape=")
    return np.frombuffer(payload, dtype="<f4").reshape(1, 1, 32, 32)


def test_graph_loads(lenet):
    assert lenet.num_layers == 10
    assert lenet.input_shape == [1, 1, 32, 32]
    assert lenet.validate() == []
    kinds = lenet.layer_kinds()
    assert kinds[0] == "quantize" and kinds[-1] == "dequantize"


def test_compile_run_matches_oracle(lenet, lenet_input):
    module = arielml.compile_graph(lenet, workers=2)
    assert module.num_ops == 10
    assert module.verify() == []
    out1 = arielml.run(module, lenet_input, workers=1)
    out4 = arielml.run(module, lenet_input, workers=4)
    ref = arielml.oracle_run(lenet, lenet_input)
    assert out1.shape == (10,)
    np.testing.assert_array_equal(out1, out4)
    np.testing.assert_array_equal(out1, ref)


def test_float_oracle_close(lenet, lenet_input):
    qint = arielml.oracle_run(lenet, lenet_input)
    f32 = arielml.oracle_run(lenet, lenet_input, float32=True)
    assert np.max(np.abs(qint - f32)) <= 0.1


def test_module_file_roundtrip(tmp_path, lenet, lenet_input):
    module = arielml.compile_graph(lenet, workers=2)
    path = tmp_path / "lenet.mod"
    module.save(str(path))
    back = arielml.load_module(str(path))
    assert back.num_ops == module.num_ops
    np.testing.assert_array_equal(
        arielml.run(back, lenet_input), arielml.run(module, lenet_input)
    )


def test_profile_reports_schema(lenet, lenet_input):
    module = arielml.compile_graph(lenet, workers=2)
    rep = arielml.profile(module, lenet_input, workers=2, repeats=3)
    assert rep["workers"] == 2
    assert rep["peak_heap_bytes"] == module.peak_heap_bytes
    assert len(rep["ops"]) == 10
    assert {"op_id", "kind", "items", "wall_ns", "worker_ns"} <= set(
        rep["ops"][0]
    )


def test_simulate_matches_real(lenet, lenet_input):
    module = arielml.compile_graph(lenet, workers=2)
    real = arielml.run(module, lenet_input, workers=2)
    sim = arielml.run(module, lenet_input, workers=2, simulate=True)
    np.testing.assert_array_equal(real, sim)


def test_tile_configs_follow_ceil_rule(lenet):
    module = arielml.compile_graph(lenet, workers=2)
    fc3 = [t for t in module.tile_configs() if t["op_id"] == 8][0]
    assert fc3["kind"] == "dense"
    assert fc3["tile_extent"] == 5
    assert fc3["item_count"] == 2


def test_errors_are_python_exceptions(tmp_path, lenet, lenet_input):
    with pytest.raises(OSError):
        arielml.load_graph(str(tmp_path / "missing.graph"))
    with pytest.raises(ValueError):
        arielml.parse_graph("tensors:\nid=0 shape=1 dtype=banana\n")
    module = arielml.compile_graph(lenet)
    with pytest.raises(ValueError):
        arielml.run(module, np.zeros(3, dtype=np.float32))


def test_disassembly_mentions_dispatch_and_wait(lenet):
    module = arielml.compile_graph(lenet, workers=2)
    text = module.disassemble()
    assert "Dispatch" in text and "Wait" in text and "Return" in text
