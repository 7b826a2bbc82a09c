// SPDX-License-Identifier: Apache-2.0
#include "monkey/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include "monkey/error.hpp"

namespace monkey {

namespace {

std::uint8_t to_byte(float v) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(clamped * 255.0f));
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::string& path, const std::vector<std::uint8_t>& pixels, int height,
               int width, int channels) {
    const std::string tmp = path + ".tmp";
    {
        FilePtr file(std::fopen(tmp.c_str(), "wb"));
        if (!file) throw Error("io", "cannot open '" + tmp + "' for writing");

        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        if (!png) throw Error("io", "png_create_write_struct failed");
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw Error("io", "png_create_info_struct failed");
        }
        if (setjmp(png_jmpbuf(png))) {
            png_destroy_write_struct(&png, &info);
            throw Error("io", "libpng failed writing '" + path + "'");
        }
        png_init_io(png, file.get());
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                     8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        std::vector<png_bytep> rows(static_cast<size_t>(height));
        const size_t stride = static_cast<size_t>(width) * channels;
        for (int y = 0; y < height; ++y) {
            rows[static_cast<size_t>(y)] =
                const_cast<png_bytep>(pixels.data() + static_cast<size_t>(y) * stride);
        }
        png_write_image(png, rows.data());
        png_write_end(png, info);
        png_destroy_write_struct(&png, &info);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error("io", "rename '" + tmp + "' -> '" + path + "': " + ec.message());
}

}  // namespace

void write_png_rgb(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw ShapeError("io", "write_png_rgb expects [3,H,W], got " + image.shape_str());
    }
    const int h = image.dim(1), w = image.dim(2);
    std::vector<std::uint8_t> pixels(static_cast<size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                pixels[(static_cast<size_t>(y) * w + x) * 3 + c] = to_byte(image.at(c, y, x));
            }
        }
    }
    write_png(path, pixels, h, w, 3);
}

void write_png_gray(const std::string& path, const Tensor& image) {
    if (image.rank() != 2) {
        throw ShapeError("io", "write_png_gray expects [H,W], got " + image.shape_str());
    }
    const int h = image.dim(0), w = image.dim(1);
    std::vector<std::uint8_t> pixels(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            pixels[static_cast<size_t>(y) * w + x] = to_byte(image.at(y, x));
        }
    }
    write_png(path, pixels, h, w, 1);
}

Tensor read_png_rgb(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw Error("io", "cannot open '" + path + "'");

    png_byte header[8] = {};
    if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw Error("io", "'" + path + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error("io", "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("io", "png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("io", "libpng failed reading '" + path + "'");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // Normalize everything to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const size_t stride = png_get_rowbytes(png, info);
    if (stride != static_cast<size_t>(w) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("io", "unexpected row stride in '" + path + "'");
    }
    std::vector<std::uint8_t> pixels(static_cast<size_t>(h) * stride);
    std::vector<png_bytep> rows(static_cast<size_t>(h));
    for (int y = 0; y < h; ++y) rows[static_cast<size_t>(y)] = pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor image({3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                image.at(c, y, x) =
                    static_cast<float>(pixels[(static_cast<size_t>(y) * w + x) * 3 + c]) / 255.0f;
            }
        }
    }
    return image;
}

}  // namespace monkey
