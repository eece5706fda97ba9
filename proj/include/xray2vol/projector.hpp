#pragma once

#include <span>

#include "xray2vol/geometry.hpp"
#include "xray2vol/image.hpp"
#include "xray2vol/volume.hpp"

namespace xray2vol {

struct ProjectorConfig {
    double chi = 10.0;  ///< extinction coefficient (absorption + out-scattering)
    int n_steps = 128;  ///< samples per ray
    int width = 256;
    int height = 256;

    void validate() const;
};

/// Largest float strictly below 1; opacities are capped here so alpha never rounds to 0.
inline constexpr float kMaxOpacity = 0x1.fffffep-1f;

/// Beer-Lambert transparency exp(-chi * step_length * sum(densities)).
double ray_transparency(std::span<const float> densities, double chi, double step_length);

/// Orthographic x-ray: one ray per pixel along the frame's w axis, clipped to the unit
/// cube, sampled trilinearly at n_steps cell midpoints. Pixel (i, j) sits at
/// u = (i + 0.5) / width - 0.5, v = (j + 0.5) / height - 0.5 around the cube center.
/// Pixel value is the opacity 1 - alpha.
Image project(const Volume& v, const ViewPose& pose, const ProjectorConfig& cfg);
Image project(const Volume& v, const ViewFrame& frame, const ProjectorConfig& cfg);

/// v -> v^gamma: display-encoded scan values to linear opacity.
Image gamma_decode(const Image& img, double gamma);
/// v -> v^(1/gamma).
Image gamma_encode(const Image& img, double gamma);

inline constexpr double kDefaultIngestGamma = 2.2;

namespace serial {
Image project(const Volume& v, const ViewFrame& frame, const ProjectorConfig& cfg);
}

}  // namespace xray2vol
