#include "art/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include <png.h>

#include "art/errors.hpp"

namespace art {

namespace {

struct FileCloser {
    std::FILE* f = nullptr;
    ~FileCloser() {
        if (f) std::fclose(f);
    }
};

double byte_to_unit(unsigned char b) { return b / 255.0 * 2.0 - 1.0; }

unsigned char unit_to_byte(double v) {
    const double clamped = std::clamp(v, -1.0, 1.0);
    return static_cast<unsigned char>(std::lround((clamped + 1.0) / 2.0 * 255.0));
}

}  // namespace

Raster read_png(const std::string& path) {
    FileCloser file{std::fopen(path.c_str(), "rb")};
    if (!file.f) throw IoError("cannot open: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("PNG decode failed: " + path);
    }
    png_init_io(png, file.f);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);

    const int h = static_cast<int>(png_get_image_height(png, info));
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int ch = png_get_channels(png, info);
    if (ch != 3 && ch != 4) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("unsupported channel count in " + path);
    }

    std::vector<unsigned char> bytes(static_cast<std::size_t>(h) * w * ch);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) {
        rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * ch;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Raster out(h, w, ch);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        out.data()[i] = byte_to_unit(bytes[i]);
    }
    return out;
}

void write_png(const std::string& path, const Raster& image) {
    if (image.channels() != 3 && image.channels() != 4) {
        throw ValidationError("write_png: raster must have 3 or 4 channels");
    }
    FileCloser file{std::fopen(path.c_str(), "wb")};
    if (!file.f) throw IoError("cannot open for writing: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                              nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("PNG encode failed: " + path);
    }
    png_init_io(png, file.f);
    // Pinned encoder configuration so identical pixels give identical bytes.
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_NONE);
    png_set_IHDR(png, info, image.width(), image.height(), 8,
                 image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const int stride = image.width() * image.channels();
    std::vector<unsigned char> row(stride);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < image.channels(); ++c) {
                row[x * image.channels() + c] = unit_to_byte(image.at(y, x, c));
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
}

}  // namespace art
