#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "xray2vol/image.hpp"
#include "xray2vol/volume.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("xray2vol-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline xray2vol::Volume random_volume(std::uint64_t seed, xray2vol::Dims3 d, float lo = 0.0f, float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    xray2vol::Volume v(d);
    for (float& x : v.data()) x = u(rng);
    return v;
}

inline xray2vol::Image random_image(std::uint64_t seed, int w, int h, float lo = 0.0f, float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(lo, hi);
    xray2vol::Image img(w, h);
    for (float& x : img.data()) x = u(rng);
    return img;
}

template <typename A, typename B>
double max_abs_diff(const A& a, const B& b) {
    double m = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::abs(static_cast<double>(x[i]) - y[i]));
    return m;
}

template <typename A, typename B>
double mean_abs_diff(const A& a, const B& b) {
    double s = 0.0;
    auto x = a.data();
    auto y = b.data();
    for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(static_cast<double>(x[i]) - y[i]);
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

}  // namespace testing
