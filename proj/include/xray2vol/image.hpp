#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace xray2vol {

/// Single-channel float image, row-major (x fastest). X-ray images store linear
/// opacity 1 - alpha; renders store shaded intensity.
class Image {
public:
    Image() = default;
    Image(int width, int height, float fill = 0.0f);
    Image(int width, int height, std::vector<float> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return data_.empty(); }
    std::size_t size() const noexcept { return data_.size(); }

    float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    /// Bilinear lookup at continuous pixel coordinates (pixel centers at integers),
    /// clamped to the border.
    float bilinear(double x, double y) const;

    /// X-ray invariant: finite, >= 0, < 1.
    void validate_opacity() const;

    friend bool operator==(const Image&, const Image&) = default;

private:
    int width_ = 0, height_ = 0;
    std::vector<float> data_;
};

/// Three-channel image, interleaved RGB.
struct RgbImage {
    int width = 0, height = 0;
    std::vector<float> rgb;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0f) {}
    float& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
};

/// Gaussian resampling of an image to a new size (same filter as the volume resampler).
Image resize_image(const Image& img, int width, int height);

/// XIMG binary format, bit exact.
void save_image(const Image& img, const std::filesystem::path& path);
Image load_image(const std::filesystem::path& path);
void write_image(const Image& img, std::ostream& os);
Image read_image(std::istream& is);

/// Lossy viewing exports. 16-bit gray stores round(v * 65535); values are clamped to [0,1].
void write_png_gray16(const Image& img, const std::filesystem::path& path);
void write_png_gray8(const Image& img, const std::filesystem::path& path);
void write_png_rgb8(const RgbImage& img, const std::filesystem::path& path);
/// Reads an 8- or 16-bit gray (or RGB, averaged) PNG into [0,1] without any gamma handling.
Image read_png_gray(const std::filesystem::path& path);

}  // namespace xray2vol
