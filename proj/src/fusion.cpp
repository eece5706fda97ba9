#include "xray2vol/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "xray2vol/error.hpp"

namespace xray2vol {

void FusionConfig::validate() const {
    if (!std::isfinite(beta) || beta < 0) throw InvalidInput("fusion: beta must be finite and >= 0");
    if (!(chi > 0) || !std::isfinite(chi)) throw InvalidInput("fusion: chi must be positive");
    if (!(step_length > 0)) throw InvalidInput("fusion: step length must be positive");
}

namespace {

/// Policy weights over the slices flagged in `eligible`; all-zero proportional weights
/// fall back to uniform. Returns false when no slice is eligible.
bool policy_weights(std::span<const double> coarse, const std::vector<char>& eligible, FusionPolicy policy, double beta,
                    std::vector<double>& w, bool& fell_back) {
    const std::size_t n = coarse.size();
    w.assign(n, 0.0);
    std::size_t n_eligible = static_cast<std::size_t>(std::count(eligible.begin(), eligible.end(), 1));
    if (n_eligible == 0) return false;
    switch (policy) {
        case FusionPolicy::first_slice:
            for (std::size_t i = 0; i < n; ++i)
                if (eligible[i]) {
                    w[i] = 1.0;
                    break;
                }
            return true;
        case FusionPolicy::proportional: {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                if (eligible[i]) total += (w[i] = std::pow(coarse[i], beta));
            if (total > 0.0) {
                for (double& x : w) x /= total;
                return true;
            }
            fell_back = true;
            [[fallthrough]];
        }
        case FusionPolicy::uniform:
            for (std::size_t i = 0; i < n; ++i) w[i] = eligible[i] ? 1.0 / static_cast<double>(n_eligible) : 0.0;
            return true;
    }
    return false;
}

}  // namespace

FusedRay fuse_ray(std::span<const double> coarse, double target_opacity, const FusionConfig& cfg) {
    cfg.validate();
    if (!(target_opacity >= 0.0 && target_opacity < 1.0)) throw InvalidInput("fuse_ray: target opacity must lie in [0,1)");
    const std::size_t n = coarse.size();
    FusedRay out;
    out.densities.assign(coarse.begin(), coarse.end());
    if (n == 0) return out;

    double coarse_sum = 0.0;
    for (double mu : coarse) {
        if (!(mu >= 0.0) || !std::isfinite(mu)) throw InvalidInput("fuse_ray: coarse densities must be finite and >= 0");
        coarse_sum += mu;
    }
    const double scale = cfg.chi * cfg.step_length;
    const double target_alpha = 1.0 - target_opacity;

    double delta = 0.0;
    if (cfg.error_mode == FusionErrorMode::exact) {
        const double target_sum = -std::log(target_alpha) / scale;
        delta = coarse_sum - target_sum;
    } else {
        const double coarse_alpha = std::exp(-scale * coarse_sum);
        delta = std::log(1.0 - (coarse_alpha - target_alpha));
    }
    if (delta == 0.0) return out;

    std::vector<char> eligible(n, 1);
    std::vector<double> w;
    if (!policy_weights(coarse, eligible, cfg.policy, cfg.beta, w, out.fell_back_to_uniform)) return out;
    for (std::size_t i = 0; i < n; ++i) out.densities[i] = coarse[i] - delta * w[i];

    // Clamp and push the removed mass onto the remaining positive slices.
    for (std::size_t round = 0; round <= n; ++round) {
        double deficit = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (out.densities[i] < 0.0) {
                deficit -= out.densities[i];
                out.densities[i] = 0.0;
            }
            eligible[i] = out.densities[i] > 0.0 ? 1 : 0;
        }
        if (deficit == 0.0) break;
        bool ignored = false;
        if (!policy_weights(coarse, eligible, cfg.policy, cfg.beta, w, ignored)) break;
        for (std::size_t i = 0; i < n; ++i) out.densities[i] -= deficit * w[i];
    }
    return out;
}

FusedRay fuse_ray(std::span<const float> coarse, double target_opacity, const FusionConfig& cfg) {
    std::vector<double> d(coarse.begin(), coarse.end());
    return fuse_ray(std::span<const double>(d), target_opacity, cfg);
}

namespace {

template <bool Parallel>
FusionResult fuse_volume_impl(const Volume& coarse, const Image& highres, const FusionConfig& cfg_in) {
    const Dims3 c = coarse.dims();
    const int w = highres.width(), h = highres.height();
    if (coarse.empty() || highres.empty()) throw InvalidInput("fuse_volume: empty input");
    if (w < c.nx || h < c.ny)
        throw InvalidInput("fuse_volume: image " + std::to_string(w) + "x" + std::to_string(h) +
                           " is smaller than the coarse volume footprint " + std::to_string(c.nx) + "x" + std::to_string(c.ny));
    FusionConfig cfg = cfg_in;
    cfg.step_length = 1.0 / c.nz;
    cfg.validate();

    FusionResult result{Volume({w, h, c.nz}), 0};
    const double sx = static_cast<double>(c.nx) / w, sy = static_cast<double>(c.ny) / h;
    std::size_t fallbacks = 0;
#pragma omp parallel for if (Parallel) reduction(+ : fallbacks) schedule(dynamic, 4)
    for (int j = 0; j < h; ++j) {
        std::vector<double> ray(c.nz);
        const double cy = std::clamp((j + 0.5) * sy - 0.5, 0.0, static_cast<double>(c.ny - 1));
        const int y0 = std::min(static_cast<int>(cy), c.ny - 1), y1 = std::min(y0 + 1, c.ny - 1);
        const double fy = cy - y0;
        for (int i = 0; i < w; ++i) {
            const double cx = std::clamp((i + 0.5) * sx - 0.5, 0.0, static_cast<double>(c.nx - 1));
            const int x0 = std::min(static_cast<int>(cx), c.nx - 1), x1 = std::min(x0 + 1, c.nx - 1);
            const double fx = cx - x0;
            for (int k = 0; k < c.nz; ++k) {
                double top = coarse.at(x0, y0, k) * (1 - fx) + coarse.at(x1, y0, k) * fx;
                double bot = coarse.at(x0, y1, k) * (1 - fx) + coarse.at(x1, y1, k) * fx;
                ray[k] = std::max(0.0, top * (1 - fy) + bot * fy);
            }
            FusedRay fused = fuse_ray(std::span<const double>(ray), highres.at(i, j), cfg);
            if (fused.fell_back_to_uniform) ++fallbacks;
            for (int k = 0; k < c.nz; ++k) result.volume.at(i, j, k) = static_cast<float>(fused.densities[k]);
        }
    }
    result.fallback_pixels = fallbacks;
    return result;
}

}  // namespace

FusionResult fuse_volume(const Volume& coarse, const Image& highres, const FusionConfig& cfg) {
    return fuse_volume_impl<true>(coarse, highres, cfg);
}

FusionResult serial::fuse_volume(const Volume& coarse, const Image& highres, const FusionConfig& cfg) {
    return fuse_volume_impl<false>(coarse, highres, cfg);
}

FusionPolicy parse_fusion_policy(const std::string& s) {
    if (s == "proportional") return FusionPolicy::proportional;
    if (s == "uniform") return FusionPolicy::uniform;
    if (s == "first_slice" || s == "first-slice") return FusionPolicy::first_slice;
    throw InvalidInput("unknown fusion policy '" + s + "' (proportional|uniform|first_slice)");
}

FusionErrorMode parse_fusion_error_mode(const std::string& s) {
    if (s == "exact") return FusionErrorMode::exact;
    if (s == "paper_literal" || s == "paper-literal" || s == "literal") return FusionErrorMode::paper_literal;
    throw InvalidInput("unknown fusion error mode '" + s + "' (exact|paper_literal)");
}

}  // namespace xray2vol
