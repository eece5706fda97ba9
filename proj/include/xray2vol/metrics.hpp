#pragma once

#include <string>
#include <vector>

#include "xray2vol/geometry.hpp"
#include "xray2vol/image.hpp"
#include "xray2vol/volume.hpp"

namespace xray2vol {

/// Root mean squared per-voxel difference.
double volume_l2(const Volume& a, const Volume& b);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Effective window for an image: the configured size, shrunk to the largest odd size
/// that fits when the image is smaller.
int effective_ssim_window(int width, int height, const SsimParams& p = {});
/// Normalized 1D Gaussian taps for the window (the 2D window is their outer product).
std::vector<double> ssim_window_taps(int size, double sigma);

/// Mean SSIM over all window positions that fit entirely inside the image.
double mean_ssim(const Image& a, const Image& b, const SsimParams& p = {});
/// (1 - mean SSIM) / 2.
double dssim(const Image& a, const Image& b, const SsimParams& p = {});

enum class ViewBucket { top, front, side, other };

inline constexpr double kViewBucketDegrees = 25.0;

/// top / front / side when the direction lies within 25 degrees of the z / y / x axis.
ViewBucket classify_view(const ViewPose& pose);
std::string to_string(ViewBucket b);

struct MeanCi {
    double mean = 0;
    double half_width = 0;  ///< 95% normal-approximation interval half width
    std::size_t n = 0;
};
MeanCi mean_ci95(const std::vector<double>& xs);

namespace serial {
double mean_ssim(const Image& a, const Image& b, const SsimParams& p = {});
}

}  // namespace xray2vol
