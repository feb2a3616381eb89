#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nsforge/common.hpp"

namespace nsforge {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

// NSFG1 checkpoint container: the magic bytes "NSFG1" followed by records of
//   u32 LE name length, UTF-8 name, u32 LE rank, u32 LE dims[rank],
//   f32 LE payload (product of dims values).
// Flat and schema-free so any language can parse it.

struct NamedTensorF32 {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;
};

inline void save_checkpoint(const std::string& path,
                            const std::vector<NamedTensorF32>& entries) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("save_checkpoint: cannot open " + path);
    f.write("NSFG1", 5);
    for (const auto& e : entries) {
        uint32_t name_len = static_cast<uint32_t>(e.name.size());
        f.write(reinterpret_cast<const char*>(&name_len), 4);
        f.write(e.name.data(), name_len);
        uint32_t rank = static_cast<uint32_t>(e.dims.size());
        f.write(reinterpret_cast<const char*>(&rank), 4);
        f.write(reinterpret_cast<const char*>(e.dims.data()), 4 * rank);
        uint64_t count = 1;
        for (uint32_t d : e.dims) count *= d;
        if (count != e.data.size())
            throw std::invalid_argument("save_checkpoint: dims do not match data for " +
                                        e.name);
        f.write(reinterpret_cast<const char*>(e.data.data()),
                static_cast<std::streamsize>(4 * count));
    }
    if (!f) throw DataError("save_checkpoint: write failed for " + path);
}

inline std::vector<NamedTensorF32> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_checkpoint: cannot open " + path);
    char magic[5];
    if (!f.read(magic, 5) || std::memcmp(magic, "NSFG1", 5) != 0)
        throw DataError("load_checkpoint: bad magic (not an NSFG1 file): " + path);
    std::vector<NamedTensorF32> out;
    for (;;) {
        uint32_t name_len = 0;
        if (!f.read(reinterpret_cast<char*>(&name_len), 4)) {
            if (f.eof()) break;
            throw DataError("load_checkpoint: read error: " + path);
        }
        NamedTensorF32 e;
        e.name.resize(name_len);
        uint32_t rank = 0;
        if (!f.read(e.name.data(), name_len) ||
            !f.read(reinterpret_cast<char*>(&rank), 4))
            throw DataError("load_checkpoint: truncated record header: " + path);
        e.dims.resize(rank);
        if (rank && !f.read(reinterpret_cast<char*>(e.dims.data()), 4 * rank))
            throw DataError("load_checkpoint: truncated dims: " + path);
        uint64_t count = 1;
        for (uint32_t d : e.dims) count *= d;
        e.data.resize(count);
        if (count && !f.read(reinterpret_cast<char*>(e.data.data()),
                             static_cast<std::streamsize>(4 * count)))
            throw DataError("load_checkpoint: truncated payload for " + e.name);
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace nsforge
