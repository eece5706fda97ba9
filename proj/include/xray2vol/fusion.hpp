#pragma once

#include <span>
#include <vector>

#include "xray2vol/image.hpp"
#include "xray2vol/volume.hpp"

namespace xray2vol {

enum class FusionPolicy { proportional, uniform, first_slice };

enum class FusionErrorMode {
    /// Density error is the line-integral difference, so the fused ray recomposes to
    /// the target opacity.
    exact,
    /// Density error log(1 - (alpha_bar - alpha)) exactly as published; does not
    /// recompose exactly.
    paper_literal,
};

struct FusionConfig {
    double beta = 2.0;  ///< sharpness: weight of slice i is mu_i^beta
    FusionPolicy policy = FusionPolicy::proportional;
    FusionErrorMode error_mode = FusionErrorMode::exact;
    double chi = 10.0;
    double step_length = 1.0 / 128.0;  ///< fuse_volume overrides this with 1 / depth

    void validate() const;
};

struct FusedRay {
    std::vector<double> densities;
    bool fell_back_to_uniform = false;  ///< proportional weights were all zero
};

/// Redistributes one ray's density error over its slices so that the ray composes to
/// `target_opacity`. Negative results are clamped at 0 and the clamped mass is spread
/// over the slices that are still positive, repeating until none is negative.
FusedRay fuse_ray(std::span<const double> coarse, double target_opacity, const FusionConfig& cfg);
FusedRay fuse_ray(std::span<const float> coarse, double target_opacity, const FusionConfig& cfg);

struct FusionResult {
    Volume volume;
    std::size_t fallback_pixels = 0;
};

/// Per high-resolution pixel: bilinearly sample the view-aligned coarse volume's ray,
/// fuse it against that pixel's opacity. Output dims are (image w, image h, coarse nz).
/// Fused densities may exceed 1 where the image demands it.
FusionResult fuse_volume(const Volume& coarse, const Image& highres, const FusionConfig& cfg);

namespace serial {
FusionResult fuse_volume(const Volume& coarse, const Image& highres, const FusionConfig& cfg);
}

FusionPolicy parse_fusion_policy(const std::string& s);
FusionErrorMode parse_fusion_error_mode(const std::string& s);

}  // namespace xray2vol
