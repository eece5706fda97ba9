#include "xray2vol/geometry.hpp"

#include <algorithm>
#include <limits>

#include "xray2vol/error.hpp"

namespace xray2vol {

void ViewPose::validate() const {
    double n = norm(direction);
    if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) throw InvalidInput("view direction must be unit length");
    if (direction.z < 0) throw InvalidInput("view direction must lie on the positive z hemisphere");
    (void)frame_from(*this);
}

Vec3 canonical_up_hint(const Vec3& direction) {
    return std::abs(direction.y) > 0.99 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
}

ViewPose make_pose(const Vec3& direction, bool mirrored) {
    return ViewPose{direction, canonical_up_hint(direction), mirrored};
}

Vec3 ViewFrame::to_world(double a, double b, double c) const {
    return kCubeCenter + u * a + v * b + w * c;
}

ViewFrame ViewFrame::transposed() const {
    return {{u.x, v.x, w.x}, {u.y, v.y, w.y}, {u.z, v.z, w.z}};
}

ViewFrame ViewFrame::rotated_about_vertical(double radians) const {
    double c = std::cos(radians), s = std::sin(radians);
    // Rodrigues about the unit axis v; u and w are perpendicular to it.
    auto rot = [&](const Vec3& x) { return x * c + cross(v, x) * s; };
    return {rot(u), v, rot(w)};
}

ViewFrame frame_from(const Vec3& direction, const Vec3& up_hint, bool mirrored) {
    double dn = norm(direction);
    if (!(dn > 0) || !std::isfinite(dn)) throw InvalidInput("view direction must be nonzero and finite");
    Vec3 w = direction * (1.0 / dn);
    Vec3 side = cross(up_hint, w);
    double sn = norm(side);
    if (!(sn > 1e-9 * std::max(1.0, norm(up_hint)))) throw InvalidInput("up hint is parallel to the view direction");
    Vec3 u = side * (1.0 / sn);
    Vec3 v = cross(w, u);
    if (mirrored) u = -u;
    return {u, v, w};
}

ViewFrame frame_from(const ViewPose& pose) { return frame_from(pose.direction, pose.up_hint, pose.mirrored); }

bool intersect_unit_cube(const Vec3& p, const Vec3& d, double& t0, double& t1) {
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
        double o = p[a], dir = d[a];
        if (std::abs(dir) < 1e-15) {
            if (o < 0.0 || o > 1.0) return false;
            continue;
        }
        double ta = (0.0 - o) / dir, tb = (1.0 - o) / dir;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t1 > t0;
}

}  // namespace xray2vol
