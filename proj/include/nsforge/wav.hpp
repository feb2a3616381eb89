#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "nsforge/audio.hpp"
#include "nsforge/common.hpp"

namespace nsforge {

// RIFF/WAVE, PCM format tag 1, mono, 16-bit little-endian.

namespace detail {

inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
    b.push_back((v >> 16) & 0xff);
    b.push_back((v >> 24) & 0xff);
}

inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
}

inline uint32_t get_u32(const uint8_t* p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (uint32_t(p[3]) << 24);
}

inline uint16_t get_u16(const uint8_t* p) { return p[0] | (p[1] << 8); }

}  // namespace detail

inline void wav_write(const AudioBuffer& x, const std::string& path) {
    const uint32_t n = static_cast<uint32_t>(x.samples.size());
    const uint32_t data_bytes = n * 2;
    std::vector<uint8_t> b;
    b.reserve(44 + data_bytes);
    b.insert(b.end(), {'R', 'I', 'F', 'F'});
    detail::put_u32(b, 36 + data_bytes);
    b.insert(b.end(), {'W', 'A', 'V', 'E'});
    b.insert(b.end(), {'f', 'm', 't', ' '});
    detail::put_u32(b, 16);
    detail::put_u16(b, 1);  // PCM
    detail::put_u16(b, 1);  // mono
    detail::put_u32(b, static_cast<uint32_t>(x.sample_rate));
    detail::put_u32(b, static_cast<uint32_t>(x.sample_rate) * 2);
    detail::put_u16(b, 2);   // block align
    detail::put_u16(b, 16);  // bits per sample
    b.insert(b.end(), {'d', 'a', 't', 'a'});
    detail::put_u32(b, data_bytes);
    for (double s : x.samples) {
        if (s > 1.0) s = 1.0;
        if (s < -1.0) s = -1.0;
        int v = static_cast<int>(std::lround(s * 32767.0));
        detail::put_u16(b, static_cast<uint16_t>(static_cast<int16_t>(v)));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("wav_write: cannot open " + path);
    f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!f) throw DataError("wav_write: write failed for " + path);
}

inline AudioBuffer wav_read(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("wav_read: cannot open " + path);
    std::vector<uint8_t> b((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
    if (b.empty()) throw DataError("wav_read: empty file: " + path);
    if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
        std::memcmp(b.data() + 8, "WAVE", 4) != 0)
        throw DataError("wav_read: malformed RIFF header: " + path);

    bool have_fmt = false;
    uint16_t format_tag = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    size_t pos = 12;
    AudioBuffer out;
    bool have_data = false;
    while (pos + 8 <= b.size()) {
        const char* id = reinterpret_cast<const char*>(b.data() + pos);
        uint32_t chunk_size = detail::get_u32(b.data() + pos + 4);
        size_t body = pos + 8;
        if (body + chunk_size > b.size())
            throw DataError("wav_read: truncated chunk: " + path);
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_size < 16) throw DataError("wav_read: short fmt chunk: " + path);
            format_tag = detail::get_u16(b.data() + body);
            channels = detail::get_u16(b.data() + body + 2);
            sample_rate = detail::get_u32(b.data() + body + 4);
            bits = detail::get_u16(b.data() + body + 14);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            if (!have_fmt) throw DataError("wav_read: data chunk before fmt: " + path);
            if (format_tag != 1 || channels != 1 || bits != 16)
                throw DataError("wav_read: unsupported encoding (want PCM16 mono): " + path);
            out.sample_rate = static_cast<int>(sample_rate);
            out.samples.reserve(chunk_size / 2);
            for (uint32_t i = 0; i + 1 < chunk_size; i += 2) {
                int16_t v = static_cast<int16_t>(detail::get_u16(b.data() + body + i));
                out.samples.push_back(v / 32767.0);
            }
            have_data = true;
        }
        pos = body + chunk_size + (chunk_size & 1);  // chunks are word-aligned
    }
    if (!have_data) throw DataError("wav_read: no data chunk: " + path);
    return out;
}

}  // namespace nsforge
