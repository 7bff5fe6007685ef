// Copyright 2026 splm authors
// SPDX-License-Identifier: Apache-2.0

#include "splm/store_io.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace splm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// The format is defined as little-endian float32. All supported targets are
// little-endian, so the raw byte image is the file image.
static_assert(sizeof(float) == 4, "float must be 32-bit");

}  // namespace

void write_f32(std::ostream& os, const float* data, std::size_t n) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

void read_f32(std::istream& is, float* data, std::size_t n, const std::string& what) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    if (static_cast<std::size_t>(is.gcount()) != n * 4) {
        throw IntegrityError("truncated read of " + what);
    }
}

void save_arrays(const std::string& dir, const ArrayStore& arrays) {
    fs::create_directories(dir);
    std::ofstream bin(fs::path(dir) / "arrays.bin", std::ios::binary);
    if (!bin) throw IoError("cannot write " + dir + "/arrays.bin");
    json manifest;
    manifest["arrays"] = json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, rec] : arrays) {
        json entry;
        entry["name"] = name;
        entry["offset"] = offset;
        entry["shape"] = rec.tensor.shape;
        if (!rec.partition.empty()) entry["partition"] = rec.partition;
        manifest["arrays"].push_back(entry);
        write_f32(bin, rec.tensor.data.data(), rec.tensor.numel());
        offset += rec.tensor.numel() * 4;
    }
    manifest["total_bytes"] = offset;
    bin.close();
    if (!bin) throw IoError("failed writing " + dir + "/arrays.bin");
    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw IoError("cannot write " + dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";
}

ArrayStore load_arrays(const std::string& dir) {
    fs::path mpath = fs::path(dir) / "manifest.json";
    std::ifstream mf(mpath);
    if (!mf) throw IoError("cannot read " + mpath.string());
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw IntegrityError("malformed " + mpath.string() + ": " + e.what());
    }
    fs::path bpath = fs::path(dir) / "arrays.bin";
    std::ifstream bin(bpath, std::ios::binary);
    if (!bin) throw IoError("cannot read " + bpath.string());
    std::uint64_t file_size = fs::file_size(bpath);
    if (manifest.contains("total_bytes") &&
        manifest["total_bytes"].get<std::uint64_t>() != file_size) {
        throw IntegrityError("arrays.bin is " + std::to_string(file_size) +
                             " bytes, manifest expects " +
                             std::to_string(manifest["total_bytes"].get<std::uint64_t>()));
    }
    ArrayStore out;
    for (const auto& entry : manifest.at("arrays")) {
        std::string name = entry.at("name").get<std::string>();
        Shape shape = entry.at("shape").get<Shape>();
        std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
        std::size_t n = shape_numel(shape);
        if (offset + n * 4 > file_size) {
            throw IntegrityError("array " + name + " extends past end of arrays.bin");
        }
        StoredArray rec;
        rec.tensor = TensorF::zeros(shape);
        if (entry.contains("partition")) rec.partition = entry["partition"].get<std::string>();
        bin.seekg(static_cast<std::streamoff>(offset));
        read_f32(bin, rec.tensor.data.data(), n, name);
        if (!out.emplace(name, std::move(rec)).second) {
            throw IntegrityError("duplicate array name " + name + " in manifest");
        }
    }
    return out;
}

}  // namespace splm
