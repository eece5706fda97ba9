#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "xray2vol/geometry.hpp"

namespace xray2vol {

struct Dims3 {
    int nx = 0, ny = 0, nz = 0;

    std::size_t count() const {
        return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
    }
    bool positive() const { return nx > 0 && ny > 0 && nz > 0; }
    friend bool operator==(const Dims3&, const Dims3&) = default;
};

/// Scalar density grid occupying the unit cube. Voxel (x, y, z) has its center at
/// ((x + 0.5) / nx, (y + 0.5) / ny, (z + 0.5) / nz); storage is x-fastest, then y, then z.
class Volume {
public:
    Volume() = default;
    explicit Volume(Dims3 dims, float fill = 0.0f);
    Volume(Dims3 dims, std::vector<float> data);

    const Dims3& dims() const noexcept { return dims_; }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t index(int x, int y, int z) const {
        return (static_cast<std::size_t>(z) * dims_.ny + y) * dims_.nx + x;
    }
    float& at(int x, int y, int z) { return data_[index(x, y, z)]; }
    float at(int x, int y, int z) const { return data_[index(x, y, z)]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    /// Trilinear density at a point in unit-cube coordinates. Points outside the cube
    /// read 0; inside it the grid is clamped to its edge voxels.
    float sample(const Vec3& p) const;

    /// Throws InvalidInput unless every voxel is finite and in [0, 1].
    void validate_density() const;

    friend bool operator==(const Volume&, const Volume&) = default;

private:
    Dims3 dims_;
    std::vector<float> data_;
};

/// Copy with every voxel clamped to [0, 1].
Volume clamp01(const Volume& v);

/// Separable Gaussian reconstruction onto a new grid over the same unit cube.
/// Per axis, sigma is half of the coarser of the two spacings, truncated at 3 sigma,
/// with weights renormalized over the voxels that exist. Axes whose size does not
/// change are copied through unfiltered. Output is clamped to [0, 1].
Volume resample_gaussian(const Volume& src, Dims3 target);

/// Resample `src` into the frame of `pose`: output z runs along the view direction and
/// output x/y follow the image axes. Trilinear sampling, vacuum outside the cube.
Volume rotate_to_view(const Volume& src, const ViewPose& pose, Dims3 out_dims);
/// Same, for an explicit frame (inverse rotations, mirrored frames).
Volume rotate_frame(const Volume& src, const ViewFrame& frame, Dims3 out_dims);

/// Gaussian down-sampling along z to `reduced_nz` slices followed by linear
/// up-sampling back to the original depth.
Volume depth_resample_roundtrip(const Volume& v, int reduced_nz);

/// XVOL binary format, bit exact.
void save_volume(const Volume& v, const std::filesystem::path& path);
Volume load_volume(const std::filesystem::path& path);
void write_volume(const Volume& v, std::ostream& os);
Volume read_volume(std::istream& is);

namespace serial {
// Straight single-threaded loops, kept as references for the parallel kernels.
Volume resample_gaussian(const Volume& src, Dims3 target);
Volume rotate_frame(const Volume& src, const ViewFrame& frame, Dims3 out_dims);
}  // namespace serial

}  // namespace xray2vol
