// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace arielml {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed graph text / tensor file text.
struct ParseError : Error {
  using Error::Error;
};

// Structurally well-formed input that violates a graph invariant.
struct ValidationError : Error {
  using Error::Error;
};

// Filesystem-level failure (missing file, short read, unwritable path).
struct IoError : Error {
  using Error::Error;
};

// Module bytes fail structural decoding.
struct DecodeError : Error {
  using Error::Error;
};
struct BadMagicError : DecodeError {
  using DecodeError::DecodeError;
};
struct VersionUnsupportedError : DecodeError {
  using DecodeError::DecodeError;
};
struct SectionOverlapError : DecodeError {
  using DecodeError::DecodeError;
};

// Module decodes but violates a CompiledModule invariant.
struct VerifyError : Error {
  using Error::Error;
};

struct UnsupportedLayerError : Error {
  using Error::Error;
};

struct TilingError : Error {
  using Error::Error;
};

struct ShapeMismatchError : Error {
  using Error::Error;
};

// Arena cap exceeded or inconsistent Alloc/Free at runtime.
struct AllocError : Error {
  using Error::Error;
};

// Worker pool reconfiguration attempted while an inference is in flight.
struct BusyError : Error {
  using Error::Error;
};

// A work item failed inside a worker; identifies the offending item.
struct ExecutionError : Error {
  ExecutionError(uint32_t op, uint32_t item, const std::string& what)
      : Error("op " + std::to_string(op) + " item " + std::to_string(item) +
              ": " + what),
        op_id(op),
        item_index(item) {}
  uint32_t op_id;
  uint32_t item_index;
};

}  // namespace arielml
