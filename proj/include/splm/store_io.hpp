// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared on-disk layout for named float32 arrays: a directory containing
// `arrays.bin` (raw little-endian float32, concatenated) and `manifest.json`
// (per-array name, byte offset, shape, and partition tag). Used by both
// checkpoints and frontend weight import.

#pragma once

#include <map>
#include <string>

#include "splm/tensor.hpp"

namespace splm {

struct StoredArray {
    TensorF tensor;
    std::string partition;  // optional tag, empty when not applicable
};

using ArrayStore = std::map<std::string, StoredArray>;

// Writes arrays.bin + manifest.json under dir (created if missing).
void save_arrays(const std::string& dir, const ArrayStore& arrays);

// Loads and validates a directory written by save_arrays. Throws IoError for
// missing files and IntegrityError for truncation or offset/shape mismatch.
ArrayStore load_arrays(const std::string& dir);

// Raw little-endian float32 helpers for other fixed-layout blobs.
void write_f32(std::ostream& os, const float* data, std::size_t n);
void read_f32(std::istream& is, float* data, std::size_t n, const std::string& what);

}  // namespace splm
