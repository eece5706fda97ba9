#include "xray2vol/volume.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "xray2vol/binary_io.hpp"
#include "xray2vol/error.hpp"

namespace xray2vol {

Volume::Volume(Dims3 dims, float fill) : dims_(dims) {
    if (!dims.positive()) throw InvalidInput("volume dims must be positive");
    data_.assign(dims.count(), fill);
}

Volume::Volume(Dims3 dims, std::vector<float> data) : dims_(dims), data_(std::move(data)) {
    if (!dims.positive()) throw InvalidInput("volume dims must be positive");
    if (data_.size() != dims.count()) throw InvalidInput("volume data length does not match dims");
}

float Volume::sample(const Vec3& p) const {
    if (!(p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0 && p.z >= 0.0 && p.z <= 1.0)) return 0.0f;
    auto axis = [](double coord, int n, int& i0, double& f) {
        double c = std::clamp(coord * n - 0.5, 0.0, static_cast<double>(n - 1));
        i0 = std::min(static_cast<int>(c), n - 1);
        f = c - i0;
    };
    int x0, y0, z0;
    double fx, fy, fz;
    axis(p.x, dims_.nx, x0, fx);
    axis(p.y, dims_.ny, y0, fy);
    axis(p.z, dims_.nz, z0, fz);
    int x1 = std::min(x0 + 1, dims_.nx - 1);
    int y1 = std::min(y0 + 1, dims_.ny - 1);
    int z1 = std::min(z0 + 1, dims_.nz - 1);
    double c00 = at(x0, y0, z0) * (1 - fx) + at(x1, y0, z0) * fx;
    double c10 = at(x0, y1, z0) * (1 - fx) + at(x1, y1, z0) * fx;
    double c01 = at(x0, y0, z1) * (1 - fx) + at(x1, y0, z1) * fx;
    double c11 = at(x0, y1, z1) * (1 - fx) + at(x1, y1, z1) * fx;
    double c0 = c00 * (1 - fy) + c10 * fy;
    double c1 = c01 * (1 - fy) + c11 * fy;
    return static_cast<float>(c0 * (1 - fz) + c1 * fz);
}

void Volume::validate_density() const {
    for (std::size_t i = 0; i < data_.size(); ++i) {
        float v = data_[i];
        if (!std::isfinite(v) || v < 0.0f || v > 1.0f)
            throw InvalidInput("voxel " + std::to_string(i) + " outside [0,1] or not finite");
    }
}

Volume clamp01(const Volume& v) {
    Volume out = v;
    for (float& x : out.data()) x = std::clamp(x, 0.0f, 1.0f);
    return out;
}

namespace {

struct Tap {
    int src;
    double weight;
};

/// For every target index, the source taps and normalized Gaussian weights.
std::vector<std::vector<Tap>> gaussian_taps(int n_src, int n_tgt) {
    std::vector<std::vector<Tap>> taps(n_tgt);
    if (n_src == n_tgt) {
        for (int j = 0; j < n_tgt; ++j) taps[j] = {{j, 1.0}};
        return taps;
    }
    double ratio = static_cast<double>(n_src) / n_tgt;
    double sigma = 0.5 * std::max(1.0, ratio);  // source voxels
    double reach = 3.0 * sigma;
    for (int j = 0; j < n_tgt; ++j) {
        double c = (j + 0.5) * ratio - 0.5;
        int lo = std::max(0, static_cast<int>(std::ceil(c - reach)));
        int hi = std::min(n_src - 1, static_cast<int>(std::floor(c + reach)));
        double total = 0.0;
        for (int i = lo; i <= hi; ++i) {
            double d = (i - c) / sigma;
            double w = std::exp(-0.5 * d * d);
            taps[j].push_back({i, w});
            total += w;
        }
        if (taps[j].empty()) {
            int nearest = std::clamp(static_cast<int>(std::lround(c)), 0, n_src - 1);
            taps[j] = {{nearest, 1.0}};
            total = 1.0;
        }
        for (Tap& t : taps[j]) t.weight /= total;
    }
    return taps;
}

// Passes keep intermediate values in double so the separable filter matches a direct
// 3D weighted sum to rounding.
template <bool Parallel>
Volume resample_gaussian_impl(const Volume& src, Dims3 target) {
    if (src.empty() || !src.dims().positive()) throw InvalidInput("resample_gaussian: empty source volume");
    if (!target.positive()) throw InvalidInput("resample_gaussian: target dims must be >= 1");
    const Dims3 s = src.dims();
    auto tx = gaussian_taps(s.nx, target.nx);
    auto ty = gaussian_taps(s.ny, target.ny);
    auto tz = gaussian_taps(s.nz, target.nz);

    // x pass: (tnx, sny, snz)
    std::vector<double> a(static_cast<std::size_t>(target.nx) * s.ny * s.nz);
#pragma omp parallel for if (Parallel)
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < s.ny; ++y)
            for (int x = 0; x < target.nx; ++x) {
                double acc = 0.0;
                for (const Tap& t : tx[x]) acc += t.weight * src.at(t.src, y, z);
                a[(static_cast<std::size_t>(z) * s.ny + y) * target.nx + x] = acc;
            }
    // y pass: (tnx, tny, snz)
    std::vector<double> b(static_cast<std::size_t>(target.nx) * target.ny * s.nz);
#pragma omp parallel for if (Parallel)
    for (int z = 0; z < s.nz; ++z)
        for (int y = 0; y < target.ny; ++y)
            for (int x = 0; x < target.nx; ++x) {
                double acc = 0.0;
                for (const Tap& t : ty[y]) acc += t.weight * a[(static_cast<std::size_t>(z) * s.ny + t.src) * target.nx + x];
                b[(static_cast<std::size_t>(z) * target.ny + y) * target.nx + x] = acc;
            }
    // z pass
    Volume out(target);
#pragma omp parallel for if (Parallel)
    for (int z = 0; z < target.nz; ++z)
        for (int y = 0; y < target.ny; ++y)
            for (int x = 0; x < target.nx; ++x) {
                double acc = 0.0;
                for (const Tap& t : tz[z]) acc += t.weight * b[(static_cast<std::size_t>(t.src) * target.ny + y) * target.nx + x];
                out.at(x, y, z) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
            }
    return out;
}

template <bool Parallel>
Volume rotate_frame_impl(const Volume& src, const ViewFrame& frame, Dims3 out_dims) {
    if (!out_dims.positive()) throw InvalidInput("rotate: output dims must be positive");
    Volume out(out_dims);
#pragma omp parallel for if (Parallel)
    for (int z = 0; z < out_dims.nz; ++z) {
        double c = (z + 0.5) / out_dims.nz - 0.5;
        for (int y = 0; y < out_dims.ny; ++y) {
            double b = (y + 0.5) / out_dims.ny - 0.5;
            for (int x = 0; x < out_dims.nx; ++x) {
                double a = (x + 0.5) / out_dims.nx - 0.5;
                out.at(x, y, z) = src.sample(frame.to_world(a, b, c));
            }
        }
    }
    return out;
}

}  // namespace

Volume resample_gaussian(const Volume& src, Dims3 target) { return resample_gaussian_impl<true>(src, target); }
Volume serial::resample_gaussian(const Volume& src, Dims3 target) { return resample_gaussian_impl<false>(src, target); }

Volume rotate_frame(const Volume& src, const ViewFrame& frame, Dims3 out_dims) {
    return rotate_frame_impl<true>(src, frame, out_dims);
}
Volume serial::rotate_frame(const Volume& src, const ViewFrame& frame, Dims3 out_dims) {
    return rotate_frame_impl<false>(src, frame, out_dims);
}

Volume rotate_to_view(const Volume& src, const ViewPose& pose, Dims3 out_dims) {
    pose.validate();
    return rotate_frame(src, frame_from(pose), out_dims);
}

Volume depth_resample_roundtrip(const Volume& v, int reduced_nz) {
    const Dims3 d = v.dims();
    if (reduced_nz < 1) throw InvalidInput("depth_resample_roundtrip: reduced depth must be >= 1");
    if (reduced_nz > d.nz)
        throw InvalidInput("depth_resample_roundtrip: reduced depth " + std::to_string(reduced_nz) +
                           " exceeds volume depth " + std::to_string(d.nz));
    if (reduced_nz == d.nz) return v;
    Volume low = resample_gaussian(v, {d.nx, d.ny, reduced_nz});
    Volume out(d);
    const double ratio = static_cast<double>(reduced_nz) / d.nz;
#pragma omp parallel for
    for (int z = 0; z < d.nz; ++z) {
        double c = std::clamp((z + 0.5) * ratio - 0.5, 0.0, static_cast<double>(reduced_nz - 1));
        int z0 = std::min(static_cast<int>(c), reduced_nz - 1);
        int z1 = std::min(z0 + 1, reduced_nz - 1);
        double f = c - z0;
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x)
                out.at(x, y, z) = static_cast<float>(low.at(x, y, z0) * (1 - f) + low.at(x, y, z1) * f);
    }
    return out;
}

namespace {
constexpr char kVolumeMagic[] = "XVOL";
constexpr std::uint32_t kVolumeVersion = 1;
constexpr std::uint64_t kMaxVoxels = std::uint64_t{1} << 34;
}  // namespace

void write_volume(const Volume& v, std::ostream& os) {
    io::Writer w(os);
    w.magic(kVolumeMagic);
    w.put<std::uint32_t>(kVolumeVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.dims().nx));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.dims().ny));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(v.dims().nz));
    w.floats(v.data());
}

Volume read_volume(std::istream& is) {
    io::Reader r(is);
    r.expect_magic(kVolumeMagic);
    auto version = r.get<std::uint32_t>("version");
    if (version != kVolumeVersion)
        throw FormatError("unsupported XVOL version " + std::to_string(version), r.offset() - 4);
    auto nx = r.get<std::uint32_t>("nx");
    auto ny = r.get<std::uint32_t>("ny");
    auto nz = r.get<std::uint32_t>("nz");
    const std::uint64_t dims_offset = r.offset() - 12;
    if (nx == 0 || ny == 0 || nz == 0) throw FormatError("zero volume dimension", dims_offset);
    if (nx > static_cast<std::uint32_t>(std::numeric_limits<int>::max()) ||
        ny > static_cast<std::uint32_t>(std::numeric_limits<int>::max()) ||
        nz > static_cast<std::uint32_t>(std::numeric_limits<int>::max()))
        throw FormatError("volume dimension overflow", dims_offset);
    std::uint64_t count = std::uint64_t{nx} * ny;
    if (count > kMaxVoxels || count * nz > kMaxVoxels) throw FormatError("volume dimension overflow", dims_offset);
    count *= nz;
    auto left = r.remaining();
    if (left >= 0 && static_cast<std::uint64_t>(left) < count * 4)
        throw FormatError("truncated voxel payload (" + std::to_string(left / 4) + " of " + std::to_string(count) +
                              " values present)",
                          r.offset() + static_cast<std::uint64_t>(left));
    std::vector<float> data(count);
    r.floats(data, "voxel payload");
    if (!r.at_end()) throw FormatError("trailing bytes after voxel payload", r.offset());
    return Volume({static_cast<int>(nx), static_cast<int>(ny), static_cast<int>(nz)}, std::move(data));
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_volume(v, os);
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

Volume load_volume(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    try {
        return read_volume(is);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

}  // namespace xray2vol
