#include "sgenet/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

namespace sgenet {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

uint8_t to_byte(float v) {
    const float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
    return static_cast<uint8_t>(c * 255.f + 0.5f);
}

}  // namespace

Tensor<float> read_png(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw std::runtime_error("read_png: cannot open " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng init failed");
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<uint8_t> raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: failed to decode " + path);
    }
    png_init_io(png, f.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);

    // normalize every variant to 8-bit RGB
    png_set_expand(png);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_set_strip_alpha(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
        png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    raw.resize(static_cast<size_t>(w) * h * 3);
    row_ptrs.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = raw.data() + size_t(y) * w * 3;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor<float> img({3, static_cast<int>(h), static_cast<int>(w)});
    for (png_uint_32 y = 0; y < h; ++y)
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(c, static_cast<int>(y), static_cast<int>(x)) =
                    raw[(size_t(y) * w + x) * 3 + c] / 255.f;
    return img;
}

void write_png(const std::string& path, const Tensor<float>& img) {
    if (img.rank() != 3 || img.dim(0) != 3)
        throw std::invalid_argument("write_png: expects a (3,H,W) image, got " +
                                    img.shape_str());
    const int h = img.dim(1), w = img.dim(2);

    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw std::runtime_error("write_png: cannot open " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng init failed");
    }
    std::vector<uint8_t> raw(static_cast<size_t>(w) * h * 3);
    std::vector<png_bytep> row_ptrs(static_cast<size_t>(h));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: failed to encode " + path);
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                raw[(size_t(y) * w + x) * 3 + c] = to_byte(img.at(c, y, x));
        row_ptrs[static_cast<size_t>(y)] = raw.data() + size_t(y) * w * 3;
    }
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace sgenet
