# Copyright 2026 The Ariel-ML Authors
# SPDX-License-Identifier: Apache-2.0
"""Build pipeline and multicore runtime for tiny quantized networks."""

from ._core import (
    FileError,
    Graph,
    GraphParseError,
    GraphValidationError,
    Module,
    ModuleDecodeError,
    ModuleVerifyError,
    ShapeMismatch,
    WorkerError,
    bench,
    compile_graph,
    load_graph,
    load_module,
    oracle_run,
    parse_graph,
    profile,
    run,
)

__all__ = [
    "FileError",
    "Graph",
    "GraphParseError",
    "GraphValidationError",
    "Module",
    "ModuleDecodeError",
    "ModuleVerifyError",
    "ShapeMismatch",
    "WorkerError",
    "bench",
    "compile_graph",
    "load_graph",
    "load_module",
    "oracle_run",
    "parse_graph",
    "profile",
    "run",
]

__version__ = "0.1.0"
