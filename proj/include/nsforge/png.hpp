#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "nsforge/common.hpp"

namespace nsforge {
namespace detail {

// PNG's CRC-32 (reflected 0xEDB88320) — not the CRC-32C used by the record
// framing.
inline uint32_t png_crc32(const uint8_t* data, size_t n, uint32_t crc = 0xffffffffu) {
    static const std::array<uint32_t, 256> table = [] {
        std::array<uint32_t, 256> t{};
        for (uint32_t i = 0; i < 256; ++i) {
            uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
        return t;
    }();
    for (size_t i = 0; i < n; ++i)
        crc = table[(crc ^ data[i]) & 0xff] ^ (crc >> 8);
    return crc;
}

inline uint32_t adler32(const uint8_t* data, size_t n) {
    uint32_t a = 1, b = 0;
    for (size_t i = 0; i < n; ++i) {
        a = (a + data[i]) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

inline void be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back((v >> 24) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back(v & 0xff);
}

inline void png_chunk(std::vector<uint8_t>& out, const char type[4],
                      const std::vector<uint8_t>& body) {
    be32(out, static_cast<uint32_t>(body.size()));
    size_t crc_start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), body.begin(), body.end());
    uint32_t crc = png_crc32(out.data() + crc_start, out.size() - crc_start) ^ 0xffffffffu;
    be32(out, crc);
}

}  // namespace detail

// Minimal deterministic PNG encoder: 8-bit RGB, filter 0 scanlines, zlib
// stream built from stored (uncompressed) deflate blocks. Identical input
// always yields identical bytes.
inline void write_png_rgb8(const std::string& path, int width, int height,
                           const std::vector<uint8_t>& rgb) {
    if (width < 1 || height < 1 ||
        rgb.size() != static_cast<size_t>(width) * height * 3)
        throw std::invalid_argument("write_png_rgb8: bad dimensions");

    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        const uint8_t* row = rgb.data() + static_cast<size_t>(y) * width * 3;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
    }

    std::vector<uint8_t> idat;
    idat.push_back(0x78);
    idat.push_back(0x01);
    size_t pos = 0;
    while (pos < raw.size()) {
        size_t len = std::min<size_t>(65535, raw.size() - pos);
        bool final = pos + len == raw.size();
        idat.push_back(final ? 1 : 0);
        idat.push_back(len & 0xff);
        idat.push_back((len >> 8) & 0xff);
        idat.push_back(~len & 0xff);
        idat.push_back((~len >> 8) & 0xff);
        idat.insert(idat.end(), raw.begin() + pos, raw.begin() + pos + len);
        pos += len;
    }
    detail::be32(idat, detail::adler32(raw.data(), raw.size()));

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<uint8_t> ihdr;
    detail::be32(ihdr, static_cast<uint32_t>(width));
    detail::be32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    detail::png_chunk(out, "IHDR", ihdr);
    detail::png_chunk(out, "IDAT", idat);
    detail::png_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("write_png_rgb8: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write_png_rgb8: write failed for " + path);
}

}  // namespace nsforge
