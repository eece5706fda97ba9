#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "xray2vol/dataset.hpp"
#include "xray2vol/error.hpp"

namespace xray2vol {

namespace {

// Gaussian prefilter (in voxels) applied after supersampling so resampled copies stay
// close to the source.
constexpr double kBandLimitSigma = 1.0;

struct Ellipsoid {
    Vec3 center;
    ViewFrame axes;
    Vec3 radii;

    /// Normalized radius: < 1 inside, 1 on the surface.
    double q(const Vec3& p) const {
        Vec3 d = p - center;
        double a = dot(d, axes.u) / radii.x, b = dot(d, axes.v) / radii.y, c = dot(d, axes.w) / radii.z;
        return std::sqrt(a * a + b * b + c * c);
    }
};

struct Slab {
    Vec3 point;
    Vec3 normal;
    double half_thickness;
};

struct Rod {
    Vec3 point;
    Vec3 dir;
    double radius;
};

struct PhantomShape {
    Vec3 center;
    double max_radius = 0;
    Ellipsoid shell;
    double shell_q_inner = 0;  // interior ends where q drops below this
    float shell_density = 0;
    float fill_density = 0;
    float lattice_density = 0;
    float protrusion_density = 0;
    std::vector<Ellipsoid> cavities;
    std::vector<Ellipsoid> protrusions;
    std::vector<Slab> plates;
    std::vector<Rod> rods;

    float density(const Vec3& p) const {
        if (norm(p - center) > max_radius) return 0.0f;
        float value = 0.0f;
        double q = shell.q(p);
        if (q <= 1.0) {
            if (q >= shell_q_inner) {
                value = shell_density;
            } else if (std::none_of(cavities.begin(), cavities.end(), [&](const Ellipsoid& c) { return c.q(p) <= 1.0; })) {
                value = fill_density;
                for (const Slab& s : plates)
                    if (std::abs(dot(p - s.point, s.normal)) <= s.half_thickness) value = lattice_density;
                for (const Rod& r : rods) {
                    Vec3 d = p - r.point;
                    if (norm(d - r.dir * dot(d, r.dir)) <= r.radius) value = lattice_density;
                }
            }
        }
        for (const Ellipsoid& e : protrusions)
            if (e.q(p) <= 1.0) value = std::max(value, protrusion_density);
        return value;
    }
};

ViewFrame random_rotation(std::mt19937_64& rng) {
    // Uniform unit quaternion.
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double u1 = u01(rng), u2 = u01(rng), u3 = u01(rng);
    double a = std::sqrt(1 - u1), b = std::sqrt(u1);
    double qx = a * std::sin(2 * std::numbers::pi * u2), qy = a * std::cos(2 * std::numbers::pi * u2);
    double qz = b * std::sin(2 * std::numbers::pi * u3), qw = b * std::cos(2 * std::numbers::pi * u3);
    Vec3 c0{1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy + qz * qw), 2 * (qx * qz - qy * qw)};
    Vec3 c1{2 * (qx * qy - qz * qw), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz + qx * qw)};
    Vec3 c2{2 * (qx * qz + qy * qw), 2 * (qy * qz - qx * qw), 1 - 2 * (qx * qx + qy * qy)};
    return {c0, c1, c2};
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double z = 2 * u01(rng) - 1, phi = 2 * std::numbers::pi * u01(rng);
    double r = std::sqrt(std::max(0.0, 1 - z * z));
    return {r * std::cos(phi), r * std::sin(phi), z};
}

PhantomShape make_shape(std::uint64_t seed, Dims3 dims) {
    std::mt19937_64 rng(seed);
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    auto count = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    const int n_min = std::min({dims.nx, dims.ny, dims.nz});
    PhantomShape s;
    s.max_radius = std::clamp(0.5 - (2.5 + 3.0 * kBandLimitSigma) / n_min, 0.2, 0.45);
    const double R = s.max_radius;
    s.center = kCubeCenter + Vec3{uni(-0.02, 0.02), uni(-0.02, 0.02), uni(-0.02, 0.02)};

    s.shell.center = s.center;
    s.shell.axes = random_rotation(rng);
    s.shell.radii = {uni(0.55, 0.78) * R, uni(0.5, 0.72) * R, uni(0.45, 0.68) * R};
    const double min_radius = std::min({s.shell.radii.x, s.shell.radii.y, s.shell.radii.z});
    const double thickness = std::max(uni(0.04, 0.07), 1.2 / n_min);
    s.shell_q_inner = std::max(0.3, 1.0 - thickness / min_radius);
    s.shell_density = static_cast<float>(uni(0.6, 0.9));
    s.fill_density = static_cast<float>(uni(0.08, 0.22));
    s.lattice_density = static_cast<float>(uni(0.5, 0.8));
    s.protrusion_density = static_cast<float>(uni(0.6, 0.9));

    const int n_cavities = count(1, 4);
    for (int i = 0; i < n_cavities; ++i) {
        Ellipsoid c;
        Vec3 dir = random_unit(rng);
        double reach = uni(0.0, 0.45);
        c.center = s.center + Vec3{dir.x * s.shell.radii.x, dir.y * s.shell.radii.y, dir.z * s.shell.radii.z} * reach;
        c.axes = random_rotation(rng);
        c.radii = Vec3{uni(0.18, 0.38), uni(0.15, 0.32), uni(0.12, 0.3)} * min_radius;
        s.cavities.push_back(c);
    }

    const int n_plates = count(1, 3);
    for (int i = 0; i < n_plates; ++i)
        s.plates.push_back({s.center + random_unit(rng) * uni(0.0, 0.4) * min_radius, random_unit(rng),
                            0.5 * std::max(0.025, 0.9 / n_min)});
    const int n_rods = count(1, 3);
    for (int i = 0; i < n_rods; ++i)
        s.rods.push_back({s.center + random_unit(rng) * uni(0.0, 0.4) * min_radius, random_unit(rng),
                          std::max(0.02, 0.7 / n_min)});

    const int n_protrusions = count(2, 6);
    for (int i = 0; i < n_protrusions; ++i) {
        Vec3 dir = random_unit(rng);
        double qd = std::sqrt(std::pow(dot(dir, s.shell.axes.u) / s.shell.radii.x, 2) +
                              std::pow(dot(dir, s.shell.axes.v) / s.shell.radii.y, 2) +
                              std::pow(dot(dir, s.shell.axes.w) / s.shell.radii.z, 2));
        Ellipsoid e;
        e.center = s.center + dir * (1.0 / qd);
        Vec3 side = std::abs(dir.z) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
        e.axes = frame_from(dir, side, false);
        // frame_from puts the direction on w; make w the long axis.
        double width = uni(0.08, 0.16) * R;
        e.radii = {width, width * uni(0.7, 1.0), uni(0.18, 0.32) * R};
        s.protrusions.push_back(e);
    }
    return s;
}

}  // namespace

namespace {

void band_limit(Volume& v, double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
    double total = 0.0;
    for (int i = -r; i <= r; ++i) total += k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& w : k) w /= total;
    const Dims3 d = v.dims();
    const int n[3] = {d.nx, d.ny, d.nz};
    const std::size_t stride[3] = {1, static_cast<std::size_t>(d.nx), static_cast<std::size_t>(d.nx) * d.ny};
    std::vector<float> tmp(v.data().begin(), v.data().end());
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<float> src = tmp;
#pragma omp parallel for
        for (int z = 0; z < d.nz; ++z)
            for (int y = 0; y < d.ny; ++y)
                for (int x = 0; x < d.nx; ++x) {
                    const int pos[3] = {x, y, z};
                    const std::size_t at = x + stride[1] * y + stride[2] * z;
                    double acc = 0.0;
                    for (int i = -r; i <= r; ++i) {
                        const int p = pos[axis] + i;
                        if (p < 0 || p >= n[axis]) continue;
                        acc += k[static_cast<std::size_t>(i + r)] * src[at + static_cast<std::ptrdiff_t>(i) * static_cast<std::ptrdiff_t>(stride[axis])];
                    }
                    tmp[at] = static_cast<float>(acc);
                }
    }
    auto out = v.data();
    for (int z = 0; z < d.nz; ++z)
        for (int y = 0; y < d.ny; ++y)
            for (int x = 0; x < d.nx; ++x) {
                const bool border = x < 2 || y < 2 || z < 2 || x >= d.nx - 2 || y >= d.ny - 2 || z >= d.nz - 2;
                const std::size_t at = x + stride[1] * y + stride[2] * z;
                out[at] = border ? 0.0f : std::clamp(tmp[at], 0.0f, 1.0f);
            }
}

}  // namespace

Volume generate_phantom(std::uint64_t seed, Dims3 dims) {
    if (dims.nx < 8 || dims.ny < 8 || dims.nz < 8) throw InvalidInput("generate_phantom: dims must be >= 8 on every axis");
    const PhantomShape shape = make_shape(seed, dims);
    Volume v(dims);
    constexpr double offsets[2] = {-0.25, 0.25};
#pragma omp parallel for
    for (int z = 2; z < dims.nz - 2; ++z)
        for (int y = 2; y < dims.ny - 2; ++y)
            for (int x = 2; x < dims.nx - 2; ++x) {
                double acc = 0.0;
                for (double oz : offsets)
                    for (double oy : offsets)
                        for (double ox : offsets)
                            acc += shape.density({(x + 0.5 + ox) / dims.nx, (y + 0.5 + oy) / dims.ny, (z + 0.5 + oz) / dims.nz});
                v.at(x, y, z) = static_cast<float>(acc / 8.0);
            }
    band_limit(v, kBandLimitSigma);
    return v;
}

ViewPose ViewSampler::next() {
    if (have_pending_) {
        have_pending_ = false;
        return make_pose(pending_, true);
    }
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    // Uniform in solid angle on the hemisphere: z ~ U[0,1], azimuth ~ U[0, 2pi).
    double z = u01(rng_);
    double phi = 2.0 * std::numbers::pi * u01(rng_);
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    pending_ = {r * std::cos(phi), r * std::sin(phi), z};
    have_pending_ = true;
    return make_pose(pending_, false);
}

}  // namespace xray2vol
