#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <memory>
#include <vector>

#include "plcnn/data/atomic_file.hpp"
#include "plcnn/error.hpp"
#include "plcnn/tensor/tensor.hpp"

namespace plcnn {

namespace detail {

inline void png_quiet_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }
inline void png_quiet_warning(png_structp, png_const_charp) {}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};

// Decodes into `pixels` (row-major, interleaved). Returns false on any libpng error.
// Kept free of objects with destructors between setjmp and the last libpng call.
inline bool png_decode(std::FILE* fp, std::vector<unsigned char>& pixels, png_uint_32& width, png_uint_32& height,
                       int& channels, int& depth) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    channels = png_get_channels(png, info);
    depth = png_get_bit_depth(png, info);
    const std::size_t stride = png_get_rowbytes(png, info);
    pixels.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

inline bool png_encode(std::FILE* fp, const std::vector<unsigned char>& pixels, png_uint_32 width, png_uint_32 height,
                       int channels, int depth) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_quiet_error, png_quiet_warning);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    std::vector<png_bytep> rows(height);
    const std::size_t stride = std::size_t(width) * channels * (depth / 8);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(pixels.data() + y * stride);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, width, height, depth, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

} // namespace detail

/**
 * Reads a PNG as a (1, C, H, W) tensor with values in [0, 1]; C is 1 for
 * grayscale and 3 for colour. Palette images are expanded, alpha is dropped,
 * 16-bit samples are scaled by 1/65535 and 8-bit samples by 1/255.
 */
inline Tensor read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw IoError("not a PNG file: " + path.string());
    std::rewind(fp.get());

    std::vector<unsigned char> pixels;
    png_uint_32 width = 0, height = 0;
    int channels = 0, depth = 0;
    if (!detail::png_decode(fp.get(), pixels, width, height, channels, depth) || width == 0 || height == 0)
        throw IoError("cannot decode " + path.string());
    if ((channels != 1 && channels != 3) || (depth != 8 && depth != 16))
        throw IoError("unsupported PNG layout in " + path.string());

    Tensor out({1, std::size_t(channels), height, width});
    const double scale = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    const std::size_t bytes = depth / 8;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x)
            for (std::size_t c = 0; c < std::size_t(channels); ++c) {
                const unsigned char* p = pixels.data() + ((y * width + x) * channels + c) * bytes;
                const unsigned v = bytes == 2 ? (unsigned(p[0]) << 8) | p[1] : p[0];
                out(0, c, y, x) = static_cast<float>(v * scale);
            }
    return out;
}

/// Writes a (1, C, H, W) image, C = 1 or 3, values clamped to [0, 1]. Atomic.
inline void write_png(const std::filesystem::path& path, const Tensor& image, int bit_depth = 8) {
    if (image.n() != 1 || (image.c() != 1 && image.c() != 3))
        throw ConfigError("write_png expects a (1, 1|3, H, W) image, got " + to_string(image.dims()));
    if (bit_depth != 8 && bit_depth != 16) throw ConfigError("PNG bit depth must be 8 or 16");
    const std::size_t c_count = image.c(), h = image.h(), w = image.w(), bytes = bit_depth / 8;
    const double top = bit_depth == 16 ? 65535.0 : 255.0;
    std::vector<unsigned char> pixels(h * w * c_count * bytes);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < c_count; ++c) {
                const double v = std::clamp<double>(image(0, c, y, x), 0.0, 1.0);
                const unsigned q = static_cast<unsigned>(std::lround(v * top));
                unsigned char* p = pixels.data() + ((y * w + x) * c_count + c) * bytes;
                if (bytes == 2) {
                    p[0] = static_cast<unsigned char>(q >> 8);
                    p[1] = static_cast<unsigned char>(q & 0xff);
                } else {
                    p[0] = static_cast<unsigned char>(q);
                }
            }
    write_atomically(path, [&](const std::filesystem::path& tmp) {
        std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw IoError("cannot write " + path.string());
        if (!detail::png_encode(fp.get(), pixels, png_uint_32(w), png_uint_32(h), int(c_count), bit_depth))
            throw IoError("cannot encode " + path.string());
        if (std::fclose(fp.release()) != 0) throw IoError("cannot write " + path.string());
    });
}

} // namespace plcnn
