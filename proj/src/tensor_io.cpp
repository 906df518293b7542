// Copyright 2026 The Ariel-ML Authors
// SPDX-License-Identifier: Apache-2.0

#include "arielml/tensor_io.hpp"

#include <fstream>
#include <sstream>

#include "arielml/errors.hpp"

namespace arielml {

TensorFile read_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open tensor file: " + path.string());
  std::string header;
  if (!std::getline(f, header))
    throw ParseError("tensor file missing header line: " + path.string());

  TensorFile t;
  std::istringstream hs(header);
  std::string tok;
  bool saw_shape = false, saw_dtype = false;
  while (hs >> tok) {
    if (tok.rfind("shape=", 0) == 0) {
      std::string dims = tok.substr(6);
      size_t start = 0;
      while (start <= dims.size()) {
        size_t x = dims.find('x', start);
        std::string part =
            dims.substr(start, x == std::string::npos ? x : x - start);
        try {
          size_t pos = 0;
          t.shape.push_back(static_cast<uint32_t>(std::stoul(part, &pos)));
          if (pos != part.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
          throw ParseError("tensor file has malformed shape: " + path.string());
        }
        if (x == std::string::npos) break;
        start = x + 1;
      }
      saw_shape = true;
    } else if (tok == "dtype=f32") {
      saw_dtype = true;
    } else {
      throw ParseError("tensor file has unknown header field '" + tok +
                       "': " + path.string());
    }
  }
  if (!saw_shape || !saw_dtype)
    throw ParseError("tensor header needs shape= and dtype=f32: " +
                     path.string());

  uint64_t n = 1;
  for (uint32_t d : t.shape) n *= d;
  t.data.resize(n);
  f.read(reinterpret_cast<char*>(t.data.data()),
         static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<uint64_t>(f.gcount()) != n * sizeof(float))
    throw ParseError("tensor payload shorter than shape implies: " +
                     path.string());
  return t;
}

void write_tensor(const std::filesystem::path& path,
                  std::span<const uint32_t> shape,
                  std::span<const float> data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open tensor file for writing: " + path.string());
  f << "shape=";
  for (size_t i = 0; i < shape.size(); ++i) f << (i ? "x" : "") << shape[i];
  f << " dtype=f32\n";
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!f) throw IoError("short write on tensor file: " + path.string());
}

}  // namespace arielml
