#include "xray2vol/projector.hpp"

#include <algorithm>
#include <cmath>

#include "xray2vol/error.hpp"

namespace xray2vol {

void ProjectorConfig::validate() const {
    if (!(chi > 0) || !std::isfinite(chi)) throw InvalidInput("projector: chi must be positive");
    if (n_steps < 1) throw InvalidInput("projector: n_steps must be >= 1");
    if (width < 1 || height < 1) throw InvalidInput("projector: resolution must be positive");
}

double ray_transparency(std::span<const float> densities, double chi, double step_length) {
    if (!(step_length > 0)) throw InvalidInput("ray_transparency: step length must be positive");
    double sum = 0.0;
    for (float mu : densities) {
        if (!(mu >= 0.0f)) throw InvalidInput("ray_transparency: negative or NaN density");
        sum += mu;
    }
    return std::exp(-chi * step_length * sum);
}

namespace {

float pixel_opacity(const Volume& v, const ViewFrame& frame, const ProjectorConfig& cfg, int i, int j) {
    const Vec3 origin = frame.to_world((i + 0.5) / cfg.width - 0.5, (j + 0.5) / cfg.height - 0.5, 0.0);
    double t0, t1;
    if (!intersect_unit_cube(origin, frame.w, t0, t1)) return 0.0f;
    const double step = (t1 - t0) / cfg.n_steps;
    double optical_depth = 0.0;
    for (int k = 0; k < cfg.n_steps; ++k) optical_depth += v.sample(origin + frame.w * (t0 + (k + 0.5) * step));
    const double alpha = std::exp(-cfg.chi * step * optical_depth);
    return std::min(static_cast<float>(1.0 - alpha), kMaxOpacity);
}

}  // namespace

Image project(const Volume& v, const ViewFrame& frame, const ProjectorConfig& cfg) {
    cfg.validate();
    Image out(cfg.width, cfg.height);
#pragma omp parallel for schedule(dynamic, 4)
    for (int j = 0; j < cfg.height; ++j)
        for (int i = 0; i < cfg.width; ++i) out.at(i, j) = pixel_opacity(v, frame, cfg, i, j);
    return out;
}

Image serial::project(const Volume& v, const ViewFrame& frame, const ProjectorConfig& cfg) {
    cfg.validate();
    Image out(cfg.width, cfg.height);
    for (int j = 0; j < cfg.height; ++j)
        for (int i = 0; i < cfg.width; ++i) out.at(i, j) = pixel_opacity(v, frame, cfg, i, j);
    return out;
}

Image project(const Volume& v, const ViewPose& pose, const ProjectorConfig& cfg) {
    pose.validate();
    return project(v, frame_from(pose), cfg);
}

Image gamma_decode(const Image& img, double gamma) {
    if (!(gamma > 0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
    Image out = img;
    for (float& x : out.data()) {
        if (!(x >= 0.0f && x <= 1.0f)) throw InvalidInput("gamma_decode: values must lie in [0,1]");
        x = static_cast<float>(std::pow(static_cast<double>(x), gamma));
    }
    return out;
}

Image gamma_encode(const Image& img, double gamma) {
    if (!(gamma > 0) || !std::isfinite(gamma)) throw InvalidInput("gamma must be positive");
    return gamma_decode(img, 1.0 / gamma);
}

}  // namespace xray2vol
