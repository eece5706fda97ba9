#include "xray2vol/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xray2vol/error.hpp"

namespace xray2vol {

void RenderConfig::validate() const {
    if (!(iso_value > 0.0 && iso_value < 1.0)) throw InvalidInput("render: iso value must lie in (0,1)");
    if (ao_samples < 0) throw InvalidInput("render: ao_samples must be >= 0");
    if (width < 1 || height < 1) throw InvalidInput("render: resolution must be positive");
    if (!(ao_radius >= 0.0)) throw InvalidInput("render: ao_radius must be >= 0");
}

namespace {

class Scene {
public:
    Scene(const Volume& v, const RenderConfig& cfg) : v_(v), cfg_(cfg) {
        const Dims3 d = v.dims();
        voxel_ = 1.0 / std::max({d.nx, d.ny, d.nz});
        step_ = 1.0 / (2.0 * d.nz);
    }

    float density(const Vec3& p) const {
        if (cfg_.clip_box && cfg_.clip_box->contains(p)) return 0.0f;
        return v_.sample(p);
    }

    std::optional<Vec3> hit(const Vec3& origin, const Vec3& dir) const {
        double t0, t1;
        if (!intersect_unit_cube(origin, dir, t0, t1)) return std::nullopt;
        const double iso = cfg_.iso_value;
        double prev = t0;
        if (density(origin + dir * t0) >= iso) return origin + dir * t0;
        for (double t = t0 + step_;; t += step_) {
            const double tc = std::min(t, t1);
            if (density(origin + dir * tc) >= iso) {
                double lo = prev, hi = tc;
                for (int k = 0; k < 8; ++k) {
                    double mid = 0.5 * (lo + hi);
                    if (density(origin + dir * mid) >= iso) hi = mid;
                    else lo = mid;
                }
                return origin + dir * hi;
            }
            if (tc >= t1) return std::nullopt;
            prev = tc;
        }
    }

    Vec3 normal(const Vec3& p, const Vec3& fallback) const {
        const double h = voxel_;
        Vec3 g{density(p + Vec3{h, 0, 0}) - density(p - Vec3{h, 0, 0}),
               density(p + Vec3{0, h, 0}) - density(p - Vec3{0, h, 0}),
               density(p + Vec3{0, 0, h}) - density(p - Vec3{0, 0, h})};
        double n = norm(g);
        return n > 1e-12 ? g * (-1.0 / n) : fallback;
    }

    double ambient_occlusion(const Vec3& p, const Vec3& n) const {
        const int samples = cfg_.ao_samples;
        if (samples == 0 || cfg_.ao_radius <= 0.0) return 1.0;
        Vec3 t = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        Vec3 b1 = normalize(cross(n, t));
        Vec3 b2 = cross(n, b1);
        const Vec3 start = p + n * voxel_;
        constexpr int kSteps = 8;
        int occluded = 0;
        for (int s = 0; s < samples; ++s) {
            // Hammersley point, cosine-weighted onto the hemisphere around n.
            double u1 = (s + 0.5) / samples;
            double u2 = radical_inverse(static_cast<unsigned>(s));
            double r = std::sqrt(u1), phi = 2.0 * std::numbers::pi * u2;
            Vec3 d = b1 * (r * std::cos(phi)) + b2 * (r * std::sin(phi)) + n * std::sqrt(std::max(0.0, 1.0 - u1));
            for (int k = 1; k <= kSteps; ++k) {
                if (density(start + d * (cfg_.ao_radius * k / kSteps)) >= cfg_.iso_value) {
                    ++occluded;
                    break;
                }
            }
        }
        return 1.0 - static_cast<double>(occluded) / samples;
    }

    float shade(const ViewFrame& frame, int i, int j) const {
        const Vec3 origin = frame.to_world((i + 0.5) / cfg_.width - 0.5, (j + 0.5) / cfg_.height - 0.5, 0.0);
        const Vec3 view = frame.w;  // towards the camera
        auto p = hit(origin, -view);
        if (!p) return 0.0f;
        const Vec3 n = normal(*p, view);
        const double up = std::clamp(dot(n, frame.v), -1.0, 1.0);
        const HemisphereLight& env = cfg_.env;
        const double ambient = up >= 0 ? env.horizon + (env.sky - env.horizon) * up : env.horizon + (env.ground - env.horizon) * (-up);
        const Vec3 light = normalize(view + frame.v * 0.5 + frame.u * 0.3);
        const double diffuse = std::max(0.0, dot(n, light));
        const Vec3 half = normalize(light + view);
        const double spec = std::pow(std::max(0.0, dot(n, half)), cfg_.specular_exponent);
        const double value = ambient * ambient_occlusion(*p, n) + cfg_.diffuse_weight * diffuse + cfg_.specular_weight * spec;
        return static_cast<float>(std::clamp(value, 0.0, 1.0));
    }

private:
    static double radical_inverse(unsigned bits) {
        bits = (bits << 16u) | (bits >> 16u);
        bits = ((bits & 0x55555555u) << 1u) | ((bits & 0xAAAAAAAAu) >> 1u);
        bits = ((bits & 0x33333333u) << 2u) | ((bits & 0xCCCCCCCCu) >> 2u);
        bits = ((bits & 0x0F0F0F0Fu) << 4u) | ((bits & 0xF0F0F0F0u) >> 4u);
        bits = ((bits & 0x00FF00FFu) << 8u) | ((bits & 0xFF00FF00u) >> 8u);
        return bits * 2.3283064365386963e-10;
    }

    const Volume& v_;
    const RenderConfig& cfg_;
    double voxel_ = 0;
    double step_ = 0;
};

template <bool Parallel>
Image render_impl(const Volume& v, const ViewFrame& frame, const RenderConfig& cfg) {
    cfg.validate();
    Scene scene(v, cfg);
    Image out(cfg.width, cfg.height);
#pragma omp parallel for if (Parallel) schedule(dynamic, 2)
    for (int j = 0; j < cfg.height; ++j)
        for (int i = 0; i < cfg.width; ++i) out.at(i, j) = scene.shade(frame, i, j);
    return out;
}

}  // namespace

Image render_iso(const Volume& v, const ViewFrame& frame, const RenderConfig& cfg) { return render_impl<true>(v, frame, cfg); }
Image serial::render_iso(const Volume& v, const ViewFrame& frame, const RenderConfig& cfg) {
    return render_impl<false>(v, frame, cfg);
}

Image render_iso(const Volume& v, const RenderConfig& cfg) { return render_iso(v, frame_from(cfg.pose), cfg); }

Image render_cutaway(const Volume& v, const RenderConfig& cfg) {
    if (!cfg.clip_box) throw InvalidInput("render_cutaway: clip box required");
    const Box& b = *cfg.clip_box;
    for (int a = 0; a < 3; ++a)
        if (b.lo[a] < 0.0 || b.hi[a] > 1.0 || b.lo[a] > b.hi[a]) throw InvalidInput("render_cutaway: clip box must lie within the unit cube");
    return render_iso(v, cfg);
}

ViewFrame stereo_eye_frame(const ViewFrame& center, double separation_deg, bool left) {
    const double half = 0.5 * separation_deg * std::numbers::pi / 180.0;
    return center.rotated_about_vertical(left ? -half : half);
}

RgbImage render_stereo(const Volume& v, const RenderConfig& cfg) {
    const ViewFrame center = frame_from(cfg.pose);
    Image left = render_iso(v, stereo_eye_frame(center, cfg.eye_separation_deg, true), cfg);
    Image right = render_iso(v, stereo_eye_frame(center, cfg.eye_separation_deg, false), cfg);
    RgbImage out(cfg.width, cfg.height);
    for (int j = 0; j < cfg.height; ++j)
        for (int i = 0; i < cfg.width; ++i) {
            out.at(i, j, 0) = left.at(i, j);
            out.at(i, j, 1) = right.at(i, j);
            out.at(i, j, 2) = right.at(i, j);
        }
    return out;
}

std::optional<Vec3> first_hit(const Volume& v, const ViewFrame& frame, const RenderConfig& cfg, int i, int j) {
    Scene scene(v, cfg);
    const Vec3 origin = frame.to_world((i + 0.5) / cfg.width - 0.5, (j + 0.5) / cfg.height - 0.5, 0.0);
    return scene.hit(origin, -frame.w);
}

}  // namespace xray2vol
