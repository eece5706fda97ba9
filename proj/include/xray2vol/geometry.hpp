#pragma once

#include <cmath>

namespace xray2vol {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator-() const { return {-x, -y, -z}; }
    constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }
constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalize(const Vec3& v) { return v * (1.0 / norm(v)); }

/// Orthographic view: direction on the positive-z hemisphere, an up hint fixing the
/// in-plane rotation, and a mirror flag.
struct ViewPose {
    Vec3 direction{0, 0, 1};
    Vec3 up_hint{0, 1, 0};
    bool mirrored = false;

    /// Throws InvalidInput unless direction is unit length, z >= 0, and up_hint is usable.
    void validate() const;
};

/// Up hint used whenever a pose is reconstructed from a direction alone (manifests,
/// the view sampler): +y, or +x when the direction is nearly parallel to y.
Vec3 canonical_up_hint(const Vec3& direction);

ViewPose make_pose(const Vec3& direction, bool mirrored = false);

/// Orthonormal frame mapping view coordinates to world coordinates: u is the image
/// x axis, v the image y axis, w the depth axis. Columns of a rotation (or, when
/// mirrored, a reflection).
struct ViewFrame {
    Vec3 u{1, 0, 0};
    Vec3 v{0, 1, 0};
    Vec3 w{0, 0, 1};

    /// world = center + a*u + b*v + c*w
    Vec3 to_world(double a, double b, double c) const;
    /// Frame whose axes are the rows of this one (the inverse map).
    ViewFrame transposed() const;
    /// Rotate the whole frame about its own v axis by `radians`.
    ViewFrame rotated_about_vertical(double radians) const;
};

/// w = direction; u = normalize(up_hint x w); v = w x u; mirror negates u.
/// Unlike ViewPose::validate this accepts any direction (e.g. -d for symmetry checks),
/// but still rejects an up hint parallel to the direction.
ViewFrame frame_from(const Vec3& direction, const Vec3& up_hint, bool mirrored);
ViewFrame frame_from(const ViewPose& pose);

inline constexpr Vec3 kCubeCenter{0.5, 0.5, 0.5};

/// Parametric interval where the line p + t*d lies inside [0,1]^3. Returns false if
/// the line misses the cube.
bool intersect_unit_cube(const Vec3& p, const Vec3& d, double& t0, double& t1);

}  // namespace xray2vol
