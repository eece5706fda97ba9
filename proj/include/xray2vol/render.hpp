#pragma once

#include <optional>

#include "xray2vol/geometry.hpp"
#include "xray2vol/image.hpp"
#include "xray2vol/volume.hpp"

namespace xray2vol {

struct Box {
    Vec3 lo, hi;
    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
    }
};

/// Sky / horizon / ground ambient levels, interpolated by the normal's elevation
/// against the image up axis.
struct HemisphereLight {
    double sky = 0.55;
    double horizon = 0.35;
    double ground = 0.15;
};

struct RenderConfig {
    double iso_value = 0.1;
    ViewPose pose;
    int width = 256;
    int height = 256;
    int ao_samples = 16;
    double ao_radius = 0.1;  ///< fraction of the cube edge
    double specular_exponent = 32.0;
    double diffuse_weight = 0.5;
    double specular_weight = 0.12;
    HemisphereLight env;
    std::optional<Box> clip_box;  ///< region treated as empty
    double eye_separation_deg = 4.0;

    void validate() const;
};

/// Orthographic iso-surface ray caster. The camera sits on the +w side of the frame and
/// looks along -w; pixel (i, j) maps to the same (u, v) as the projector. The first
/// crossing of the iso value is found by a fixed-step march (step 1 / (2 nz)) and
/// refined with 8 bisections; pixels that never cross are 0.
Image render_iso(const Volume& v, const RenderConfig& cfg);
Image render_iso(const Volume& v, const ViewFrame& frame, const RenderConfig& cfg);

/// Same as render_iso; the clip box must be set and lie within the unit cube.
Image render_cutaway(const Volume& v, const RenderConfig& cfg);

/// Red-cyan anaglyph: the left eye (frame rotated by -separation/2 about the image
/// vertical) goes to red, the right eye (+separation/2) to green and blue.
RgbImage render_stereo(const Volume& v, const RenderConfig& cfg);
/// The two eye frames used by render_stereo.
ViewFrame stereo_eye_frame(const ViewFrame& center, double separation_deg, bool left);

/// World-space position of the refined first iso crossing for pixel (i, j), if any.
std::optional<Vec3> first_hit(const Volume& v, const ViewFrame& frame, const RenderConfig& cfg, int i, int j);

namespace serial {
Image render_iso(const Volume& v, const ViewFrame& frame, const RenderConfig& cfg);
}

}  // namespace xray2vol
