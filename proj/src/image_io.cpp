#include "asid/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "asid/errors.hpp"

namespace asid {

namespace {

std::string lower_ext(const std::string& path) {
    const auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return "";
    std::string ext = path.substr(dot);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext;
}

Image from_rgb8(const std::vector<unsigned char>& buf, int h, int w) {
    Image out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(c, y, x) = buf[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0;
    return out;
}

std::vector<unsigned char> to_rgb8(const Image& img) {
    std::vector<unsigned char> buf(3LL * img.height * img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double level =
                    std::clamp(std::round(img.at(c, y, x) * 255.0), 0.0, 255.0);
                buf[(static_cast<std::size_t>(y) * img.width + x) * 3 + c] =
                    static_cast<unsigned char>(level);
            }
    return buf;
}

Image read_png(const std::string& path) {
    png_image im;
    std::memset(&im, 0, sizeof im);
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&im, path.c_str()))
        throw DataError("cannot read PNG '" + path + "': " + im.message);
    im.format = PNG_FORMAT_RGB;
    std::vector<unsigned char> buf(PNG_IMAGE_SIZE(im));
    if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = im.message;
        png_image_free(&im);
        throw DataError("cannot decode PNG '" + path + "': " + msg);
    }
    return from_rgb8(buf, static_cast<int>(im.height), static_cast<int>(im.width));
}

void write_png(const std::string& path, const Image& img) {
    png_image im;
    std::memset(&im, 0, sizeof im);
    im.version = PNG_IMAGE_VERSION;
    im.width = static_cast<png_uint_32>(img.width);
    im.height = static_cast<png_uint_32>(img.height);
    im.format = PNG_FORMAT_RGB;
    const std::vector<unsigned char> buf = to_rgb8(img);
    if (!png_image_write_to_file(&im, path.c_str(), 0, buf.data(), 0, nullptr))
        throw DataError("cannot write PNG '" + path + "': " + im.message);
}

std::uint32_t rd_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t rd_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

// 24-bit uncompressed BMP only; rows are 4-byte aligned, stored as BGR,
// bottom-up unless the height field is negative.
Image read_bmp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open BMP '" + path + "'");
    std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (raw.size() < 54 || raw[0] != 'B' || raw[1] != 'M')
        throw DataError("'" + path + "' is not a BMP file");
    const std::uint32_t offset = rd_u32(&raw[10]);
    const std::int32_t w = static_cast<std::int32_t>(rd_u32(&raw[18]));
    const std::int32_t h_raw = static_cast<std::int32_t>(rd_u32(&raw[22]));
    const std::uint16_t bpp = rd_u16(&raw[28]);
    const std::uint32_t compression = rd_u32(&raw[30]);
    if (bpp != 24 || compression != 0)
        throw DataError("unsupported BMP '" + path + "': only uncompressed 24-bit");
    const bool bottom_up = h_raw > 0;
    const int h = bottom_up ? h_raw : -h_raw;
    if (w < 1 || h < 1) throw DataError("BMP '" + path + "' has empty dimensions");
    const std::size_t stride = (3LL * w + 3) / 4 * 4;
    if (raw.size() < offset + stride * h)
        throw DataError("BMP '" + path + "' is truncated");

    Image out(h, w);
    for (int y = 0; y < h; ++y) {
        const unsigned char* row = &raw[offset + stride * (bottom_up ? h - 1 - y : y)];
        for (int x = 0; x < w; ++x) {
            out.at(2, y, x) = row[3 * x + 0] / 255.0;
            out.at(1, y, x) = row[3 * x + 1] / 255.0;
            out.at(0, y, x) = row[3 * x + 2] / 255.0;
        }
    }
    return out;
}

void wr_u32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
    v.push_back((x >> 16) & 0xff);
    v.push_back((x >> 24) & 0xff);
}

void wr_u16(std::vector<unsigned char>& v, std::uint16_t x) {
    v.push_back(x & 0xff);
    v.push_back((x >> 8) & 0xff);
}

void write_bmp(const std::string& path, const Image& img) {
    const int h = img.height, w = img.width;
    const std::size_t stride = (3LL * w + 3) / 4 * 4;
    const std::uint32_t pixel_bytes = static_cast<std::uint32_t>(stride * h);

    std::vector<unsigned char> out;
    out.reserve(54 + pixel_bytes);
    out.push_back('B');
    out.push_back('M');
    wr_u32(out, 54 + pixel_bytes);
    wr_u16(out, 0);
    wr_u16(out, 0);
    wr_u32(out, 54);
    wr_u32(out, 40); // BITMAPINFOHEADER
    wr_u32(out, static_cast<std::uint32_t>(w));
    wr_u32(out, static_cast<std::uint32_t>(h));
    wr_u16(out, 1);
    wr_u16(out, 24);
    wr_u32(out, 0);
    wr_u32(out, pixel_bytes);
    wr_u32(out, 2835); // 72 dpi
    wr_u32(out, 2835);
    wr_u32(out, 0);
    wr_u32(out, 0);

    for (int y = h - 1; y >= 0; --y) {
        const std::size_t row_start = out.size();
        for (int x = 0; x < w; ++x)
            for (int c : {2, 1, 0}) {
                const double level =
                    std::clamp(std::round(img.at(c, y, x) * 255.0), 0.0, 255.0);
                out.push_back(static_cast<unsigned char>(level));
            }
        out.resize(row_start + stride, 0);
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write BMP '" + path + "'");
    f.write(reinterpret_cast<const char*>(out.data()),
            static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("write failed for BMP '" + path + "'");
}

} // namespace

Image read_image(const std::string& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".bmp") return read_bmp(path);
    throw DataError("unsupported image extension on '" + path + "' (need .png or .bmp)");
}

void write_image(const std::string& path, const Image& img) {
    if (img.height < 1 || img.width < 1)
        throw DataError("refusing to write empty image '" + path + "'");
    const std::string ext = lower_ext(path);
    if (ext == ".png") return write_png(path, img);
    if (ext == ".bmp") return write_bmp(path, img);
    throw DataError("unsupported image extension on '" + path + "' (need .png or .bmp)");
}

} // namespace asid
