#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "xray2vol/image.hpp"

namespace xray2vol {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
               const std::vector<unsigned char>& bytes, std::size_t row_bytes) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("PNG write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<std::size_t>(y) * row_bytes));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// PNG rows run top to bottom; image row 0 is the bottom (v axis points up).
template <typename Fn>
std::vector<unsigned char> pack_rows(int width, int height, int bytes_per_pixel, Fn&& pixel_bytes) {
    std::vector<unsigned char> out(static_cast<std::size_t>(width) * height * bytes_per_pixel);
    for (int row = 0; row < height; ++row) {
        int y = height - 1 - row;
        for (int x = 0; x < width; ++x)
            pixel_bytes(x, y, out.data() + (static_cast<std::size_t>(row) * width + x) * bytes_per_pixel);
    }
    return out;
}

}  // namespace

void write_png_gray16(const Image& img, const std::filesystem::path& path) {
    auto bytes = pack_rows(img.width(), img.height(), 2, [&](int x, int y, unsigned char* p) {
        auto v = static_cast<unsigned>(std::lround(std::clamp(img.at(x, y), 0.0f, 1.0f) * 65535.0));
        p[0] = static_cast<unsigned char>(v >> 8);  // PNG is big-endian
        p[1] = static_cast<unsigned char>(v & 0xff);
    });
    write_png(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 16, bytes, static_cast<std::size_t>(img.width()) * 2);
}

void write_png_gray8(const Image& img, const std::filesystem::path& path) {
    auto bytes = pack_rows(img.width(), img.height(), 1, [&](int x, int y, unsigned char* p) {
        p[0] = static_cast<unsigned char>(std::lround(std::clamp(img.at(x, y), 0.0f, 1.0f) * 255.0));
    });
    write_png(path, img.width(), img.height(), PNG_COLOR_TYPE_GRAY, 8, bytes, static_cast<std::size_t>(img.width()));
}

void write_png_rgb8(const RgbImage& img, const std::filesystem::path& path) {
    auto bytes = pack_rows(img.width, img.height, 3, [&](int x, int y, unsigned char* p) {
        for (int c = 0; c < 3; ++c)
            p[c] = static_cast<unsigned char>(std::lround(std::clamp(img.at(x, y, c), 0.0f, 1.0f) * 255.0));
    });
    write_png(path, img.width, img.height, PNG_COLOR_TYPE_RGB, 8, bytes, static_cast<std::size_t>(img.width) * 3);
}

Image read_png_gray(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("PNG read failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    png_set_expand(png);
    png_set_strip_alpha(png);
    png_set_swap(png);  // 16-bit samples in host (little-endian) order
    png_read_update_info(png, info);
    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int channels = png_get_channels(png, info);
    const int depth = png_get_bit_depth(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<unsigned char> buf(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (int r = 0; r < height; ++r) rows[r] = buf.data() + r * row_bytes;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);

    Image out(width, height);
    const double scale = depth == 16 ? 65535.0 : 255.0;
    for (int row = 0; row < height; ++row) {
        int y = height - 1 - row;
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            int gray_channels = channels >= 3 ? 3 : 1;
            for (int c = 0; c < gray_channels; ++c) {
                std::size_t off = static_cast<std::size_t>(x) * channels + c;
                double s = depth == 16 ? reinterpret_cast<const std::uint16_t*>(rows[row])[off] : rows[row][off];
                acc += s / scale;
            }
            out.at(x, y) = static_cast<float>(acc / gray_channels);
        }
    }
    return out;
}

}  // namespace xray2vol
