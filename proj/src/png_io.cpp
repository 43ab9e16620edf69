#include "emrdm/png_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <vector>

#include "emrdm/errors.hpp"

namespace emrdm {

namespace {

void put_u32_be(std::string& out, uint32_t v) {
    out.push_back(static_cast<char>((v >> 24) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>(v & 0xff));
}

void put_chunk(std::string& out, const char type[4], const std::string& payload) {
    put_u32_be(out, static_cast<uint32_t>(payload.size()));
    std::string body(type, 4);
    body += payload;
    out += body;
    const auto crc =
        crc32(0, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()));
    put_u32_be(out, static_cast<uint32_t>(crc));
}

uint8_t quantize(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void write_png_preview(const std::string& path, const Tensor& image, int time_slice) {
    const Shape s = image.shape();
    if (time_slice < 0 || time_slice >= s.l)
        throw ShapeError("png preview: time slice out of range");
    const bool rgb = s.c >= 3;
    const int channels = rgb ? 3 : 1;

    // Raw scanlines, filter byte 0 per row.
    std::vector<uint8_t> raw;
    raw.reserve(static_cast<size_t>(s.h) * (1 + static_cast<size_t>(s.w) * channels));
    for (int y = 0; y < s.h; ++y) {
        raw.push_back(0);
        for (int x = 0; x < s.w; ++x)
            for (int c = 0; c < channels; ++c)
                raw.push_back(quantize(image.at(time_slice, c, y, x)));
    }

    uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_size);
    if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw IoError("png preview: zlib compression failed");

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(s.w));
    put_u32_be(ihdr, static_cast<uint32_t>(s.h));
    ihdr.push_back(8);                       // bit depth
    ihdr.push_back(rgb ? 2 : 0);             // color type
    ihdr.push_back(0);                       // compression
    ihdr.push_back(0);                       // filter
    ihdr.push_back(0);                       // interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT",
              std::string(reinterpret_cast<const char*>(comp.data()), comp_size));
    put_chunk(out, "IEND", "");

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write png: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("png write failed: " + path);
}

}  // namespace emrdm
