#include "xray2vol/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xray2vol/error.hpp"

namespace xray2vol {

double volume_l2(const Volume& a, const Volume& b) {
    if (a.dims() != b.dims()) throw InvalidInput("volume_l2: dimension mismatch");
    auto da = a.data(), db = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        double d = static_cast<double>(da[i]) - db[i];
        acc += d * d;
    }
    return da.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(da.size()));
}

int effective_ssim_window(int width, int height, const SsimParams& p) {
    int w = std::min({p.window, width, height});
    if (w % 2 == 0) --w;
    return std::max(w, 1);
}

std::vector<double> ssim_window_taps(int size, double sigma) {
    std::vector<double> taps(size);
    const double c = (size - 1) / 2.0;
    double total = 0.0;
    for (int i = 0; i < size; ++i) total += (taps[i] = std::exp(-0.5 * ((i - c) / sigma) * ((i - c) / sigma)));
    for (double& t : taps) t /= total;
    return taps;
}

namespace {

template <bool Parallel>
double mean_ssim_impl(const Image& a, const Image& b, const SsimParams& p) {
    if (a.width() != b.width() || a.height() != b.height()) throw InvalidInput("ssim: dimension mismatch");
    const int W = a.width(), H = a.height();
    const int win = effective_ssim_window(W, H, p);
    const auto taps = ssim_window_taps(win, p.sigma);
    const int ow = W - win + 1, oh = H - win + 1;
    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

    // Horizontal pass of the five moment images: x, y, x^2, y^2, xy.
    std::vector<double> hx(static_cast<std::size_t>(ow) * H * 5);
#pragma omp parallel for if (Parallel)
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < ow; ++x) {
            double m[5] = {0, 0, 0, 0, 0};
            for (int k = 0; k < win; ++k) {
                double va = a.at(x + k, y), vb = b.at(x + k, y), t = taps[k];
                m[0] += t * va;
                m[1] += t * vb;
                m[2] += t * va * va;
                m[3] += t * vb * vb;
                m[4] += t * va * vb;
            }
            std::copy(m, m + 5, hx.begin() + (static_cast<std::ptrdiff_t>(y) * ow + x) * 5);
        }

    double total = 0.0;
#pragma omp parallel for if (Parallel) reduction(+ : total)
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double m[5] = {0, 0, 0, 0, 0};
            for (int k = 0; k < win; ++k) {
                const double* src = &hx[(static_cast<std::size_t>(y + k) * ow + x) * 5];
                for (int q = 0; q < 5; ++q) m[q] += taps[k] * src[q];
            }
            const double mx = m[0], my = m[1];
            const double vx = m[2] - mx * mx, vy = m[3] - my * my, cxy = m[4] - mx * my;
            total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    return total / (static_cast<double>(ow) * oh);
}

}  // namespace

double mean_ssim(const Image& a, const Image& b, const SsimParams& p) { return mean_ssim_impl<true>(a, b, p); }
double serial::mean_ssim(const Image& a, const Image& b, const SsimParams& p) { return mean_ssim_impl<false>(a, b, p); }

double dssim(const Image& a, const Image& b, const SsimParams& p) {
    return std::clamp((1.0 - mean_ssim(a, b, p)) / 2.0, 0.0, 1.0);
}

ViewBucket classify_view(const ViewPose& pose) {
    const Vec3 d = normalize(pose.direction);
    const double c = std::cos(kViewBucketDegrees * std::numbers::pi / 180.0);
    if (std::abs(d.z) > c) return ViewBucket::top;
    if (std::abs(d.y) > c) return ViewBucket::front;
    if (std::abs(d.x) > c) return ViewBucket::side;
    return ViewBucket::other;
}

std::string to_string(ViewBucket b) {
    switch (b) {
        case ViewBucket::top: return "top";
        case ViewBucket::front: return "front";
        case ViewBucket::side: return "side";
        case ViewBucket::other: return "other";
    }
    return "other";
}

MeanCi mean_ci95(const std::vector<double>& xs) {
    MeanCi r;
    r.n = xs.size();
    if (xs.empty()) return r;
    double sum = 0.0;
    for (double x : xs) sum += x;
    r.mean = sum / xs.size();
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - r.mean) * (x - r.mean);
        r.half_width = 1.96 * std::sqrt(ss / (xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
    }
    return r;
}

}  // namespace xray2vol
