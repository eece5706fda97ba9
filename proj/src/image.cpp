#include "xray2vol/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "xray2vol/binary_io.hpp"
#include "xray2vol/error.hpp"
#include "xray2vol/volume.hpp"

namespace xray2vol {

Image::Image(int width, int height, float fill) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw InvalidInput("image dims must be positive");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Image::Image(int width, int height, std::vector<float> data) : width_(width), height_(height), data_(std::move(data)) {
    if (width <= 0 || height <= 0) throw InvalidInput("image dims must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * height)
        throw InvalidInput("image data length does not match dims");
}

float Image::bilinear(double x, double y) const {
    x = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
    y = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
    int x0 = std::min(static_cast<int>(x), width_ - 1), y0 = std::min(static_cast<int>(y), height_ - 1);
    int x1 = std::min(x0 + 1, width_ - 1), y1 = std::min(y0 + 1, height_ - 1);
    double fx = x - x0, fy = y - y0;
    double top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
    double bot = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
    return static_cast<float>(top * (1 - fy) + bot * fy);
}

void Image::validate_opacity() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        float v = data_[i];
        if (!std::isfinite(v) || v < 0.0f || v >= 1.0f)
            throw InvalidInput("pixel " + std::to_string(i) + " is not a valid opacity in [0,1)");
    }
}

Image resize_image(const Image& img, int width, int height) {
    if (img.width() == width && img.height() == height) return img;
    Volume slab({img.width(), img.height(), 1}, std::vector<float>(img.data().begin(), img.data().end()));
    Volume out = resample_gaussian(slab, {width, height, 1});
    return Image(width, height, std::vector<float>(out.data().begin(), out.data().end()));
}

namespace {
constexpr char kImageMagic[] = "XIMG";
constexpr std::uint32_t kImageVersion = 1;
}  // namespace

void write_image(const Image& img, std::ostream& os) {
    io::Writer w(os);
    w.magic(kImageMagic);
    w.put<std::uint32_t>(kImageVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(img.width()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(img.height()));
    w.floats(img.data());
}

Image read_image(std::istream& is) {
    io::Reader r(is);
    r.expect_magic(kImageMagic);
    auto version = r.get<std::uint32_t>("version");
    if (version != kImageVersion) throw FormatError("unsupported XIMG version " + std::to_string(version), r.offset() - 4);
    auto w = r.get<std::uint32_t>("width");
    auto h = r.get<std::uint32_t>("height");
    const std::uint64_t dims_offset = r.offset() - 8;
    if (w == 0 || h == 0) throw FormatError("zero image dimension", dims_offset);
    if (w > (1u << 20) || h > (1u << 20)) throw FormatError("image dimension overflow", dims_offset);
    std::uint64_t count = std::uint64_t{w} * h;
    auto left = r.remaining();
    if (left >= 0 && static_cast<std::uint64_t>(left) < count * 4)
        throw FormatError("truncated pixel payload (" + std::to_string(left / 4) + " of " + std::to_string(count) +
                              " values present)",
                          r.offset() + static_cast<std::uint64_t>(left));
    std::vector<float> data(count);
    r.floats(data, "pixel payload");
    if (!r.at_end()) throw FormatError("trailing bytes after pixel payload", r.offset());
    return Image(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

void save_image(const Image& img, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_image(img, os);
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

Image load_image(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    try {
        return read_image(is);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

}  // namespace xray2vol
