#include <doctest.h>

#include <numbers>

#include "support.hpp"
#include "xray2vol/metrics.hpp"

using namespace xray2vol;

namespace {

// Per-window SSIM with a freshly built 2D Gaussian window, no separable shortcuts.
double brute_force_ssim(const Image& a, const Image& b, int win, double sigma) {
    std::vector<double> w2(static_cast<std::size_t>(win * win));
    double total = 0;
    const double c = (win - 1) / 2.0;
    for (int y = 0; y < win; ++y)
        for (int x = 0; x < win; ++x)
            total += w2[static_cast<std::size_t>(y * win + x)] = std::exp(-((x - c) * (x - c) + (y - c) * (y - c)) / (2 * sigma * sigma));
    for (double& v : w2) v /= total;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double sum = 0;
    int count = 0;
    for (int oy = 0; oy + win <= a.height(); ++oy)
        for (int ox = 0; ox + win <= a.width(); ++ox) {
            double ma = 0, mb = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    double wt = w2[static_cast<std::size_t>(y * win + x)];
                    ma += wt * a.at(ox + x, oy + y);
                    mb += wt * b.at(ox + x, oy + y);
                }
            double va = 0, vb = 0, cab = 0;
            for (int y = 0; y < win; ++y)
                for (int x = 0; x < win; ++x) {
                    double wt = w2[static_cast<std::size_t>(y * win + x)];
                    double da = a.at(ox + x, oy + y) - ma, db = b.at(ox + x, oy + y) - mb;
                    va += wt * da * da;
                    vb += wt * db * db;
                    cab += wt * da * db;
                }
            sum += ((2 * ma * mb + c1) * (2 * cab + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return sum / count;
}

}  // namespace

TEST_CASE("volume_l2") {
    Volume a = testing::random_volume(1, {4, 5, 6}, 0.0f, 0.8f);
    CHECK(volume_l2(a, a) == 0.0);
    Volume b = a;
    for (float& x : b.data()) x += 0.1f;
    CHECK(volume_l2(a, b) == doctest::Approx(0.1).epsilon(1e-5));
    for (std::uint64_t s = 0; s < 20; ++s) {
        Volume x = testing::random_volume(s, {3, 3, 3}), y = testing::random_volume(s + 100, {3, 3, 3}),
               z = testing::random_volume(s + 200, {3, 3, 3});
        CHECK(volume_l2(x, z) <= volume_l2(x, y) + volume_l2(y, z) + 1e-12);
    }
}

TEST_CASE("ssim matches a brute-force window scan") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        Image a = testing::random_image(s, 24, 20), b = testing::random_image(s + 50, 24, 20);
        for (std::size_t i = 0; i < b.size(); ++i) b.data()[i] = 0.5f * (a.data()[i] + b.data()[i]);
        const double ref = brute_force_ssim(a, b, 11, 1.5);
        CHECK(std::abs(mean_ssim(a, b) - ref) < 1e-6);
        CHECK(std::abs(dssim(a, b) - std::clamp((1 - ref) / 2, 0.0, 1.0)) < 1e-6);
        CHECK(mean_ssim(a, b) == serial::mean_ssim(a, b));
    }
}

TEST_CASE("ssim edge cases") {
    Image a = testing::random_image(3, 16, 16);
    CHECK(dssim(a, a) == 0.0);
    Image bin(16, 16), neg(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            bin.at(x, y) = static_cast<float>((x / 2 + y / 3) % 2);
            neg.at(x, y) = 1.0f - bin.at(x, y);
        }
    CHECK(mean_ssim(bin, neg) < 0);
    CHECK(dssim(bin, neg) > 0.5);
    CHECK(effective_ssim_window(7, 20) == 7);
    CHECK(effective_ssim_window(8, 20) == 7);
    Image small_a = testing::random_image(4, 6, 6), small_b = testing::random_image(5, 6, 6);
    CHECK(std::abs(mean_ssim(small_a, small_b) - brute_force_ssim(small_a, small_b, 5, 1.5)) < 1e-6);
}

TEST_CASE("view buckets") {
    CHECK(classify_view(make_pose({0, 0, 1})) == ViewBucket::top);
    CHECK(classify_view(make_pose({1, 0, 0})) == ViewBucket::side);
    CHECK(classify_view(make_pose({0, 1, 0})) == ViewBucket::front);
    CHECK(classify_view(make_pose(normalize(Vec3{1, 1, 1}))) == ViewBucket::other);
    const double a = 24.0 * std::numbers::pi / 180;
    CHECK(classify_view(make_pose({std::sin(a), 0, std::cos(a)})) == ViewBucket::top);
    CHECK(to_string(ViewBucket::front) == "front");
}

TEST_CASE("mean_ci95") {
    MeanCi m = mean_ci95({1, 2, 3, 4});
    CHECK(m.mean == doctest::Approx(2.5));
    CHECK(m.half_width == doctest::Approx(1.96 * std::sqrt(5.0 / 3.0) / 2));
    CHECK(m.n == 4);
}
