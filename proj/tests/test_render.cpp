#include <doctest.h>

#include <functional>

#include "support.hpp"
#include "xray2vol/error.hpp"
#include "xray2vol/render.hpp"

using namespace xray2vol;

namespace {

// Density ramps linearly through the iso value exactly on the analytic surface, so
// trilinear reconstruction puts the crossing where the geometry says.
Volume field(int n, const std::function<double(const Vec3&)>& signed_inside, double iso = 0.1) {
    Volume v({n, n, n});
    for (int z = 0; z < n; ++z)
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) {
                Vec3 p{(x + 0.5) / n, (y + 0.5) / n, (z + 0.5) / n};
                v.at(x, y, z) = static_cast<float>(std::clamp(iso + 0.5 * signed_inside(p) * n, 0.0, 1.0));
            }
    return v;
}

Volume sphere(int n, Vec3 c, double r) {
    return field(n, [=](const Vec3& p) { return r - norm(p - c); });
}

RenderConfig small_config(int size) {
    RenderConfig cfg;
    cfg.width = cfg.height = size;
    cfg.ao_samples = 4;
    return cfg;
}

struct Mask {
    int count = 0;
    double cx = 0, cy = 0;
};

Mask mask_of(const Image& img) {
    Mask m;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            if (img.at(x, y) > 0) {
                ++m.count;
                m.cx += x;
                m.cy += y;
            }
    if (m.count) {
        m.cx /= m.count;
        m.cy /= m.count;
    }
    return m;
}

}  // namespace

TEST_CASE("empty volume renders background") {
    Image img = render_iso(Volume({16, 16, 16}), small_config(32));
    for (float v : img.data()) CHECK(v == 0.0f);
}

TEST_CASE("sphere silhouette radius") {
    const int size = 128;
    Volume v = sphere(64, kCubeCenter, 0.3);
    for (Vec3 d : {Vec3{0, 0, 1}, normalize(Vec3{0.3, 0.5, 0.8})}) {
        RenderConfig cfg = small_config(size);
        cfg.pose = make_pose(d);
        Mask m = mask_of(render_iso(v, cfg));
        CHECK(std::abs(std::sqrt(m.count / std::numbers::pi) - 0.3 * size) <= 1.0);
        CHECK(std::abs(m.cx - (size - 1) / 2.0) < 0.5);
    }
}

TEST_CASE("ambient occlusion on a slab with a wall") {
    // Floor below z = 0.4 and a wall at x < 0.3 up to z = 0.9.
    Volume v = field(48, [](const Vec3& p) {
        double floor = 0.4 - p.z;
        double wall = std::min(0.3 - p.x, 0.9 - p.z);
        return std::max(floor, wall);
    });
    RenderConfig on = small_config(48);
    on.ao_samples = 32;
    on.ao_radius = 0.15;
    RenderConfig off = on;
    off.ao_samples = 0;
    Image a = render_iso(v, on), b = render_iso(v, off);
    // Flat floor far from the wall.
    for (int x = 36; x < 44; ++x) CHECK(std::abs(a.at(x, 24) - b.at(x, 24)) <= 0.02 * b.at(x, 24));
    // Floor right next to the wall.
    const int corner = static_cast<int>(0.31 * 48);
    CHECK(a.at(corner, 24) < b.at(corner, 24) - 0.02);
}

TEST_CASE("stereo") {
    Volume v = sphere(48, {0.5, 0.5, 0.7}, 0.15);
    RenderConfig cfg = small_config(96);
    cfg.eye_separation_deg = 0;
    RgbImage s = render_stereo(v, cfg);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) {
            CHECK(s.at(x, y, 0) == s.at(x, y, 1));
            CHECK(s.at(x, y, 1) == s.at(x, y, 2));
        }

    cfg.eye_separation_deg = 10;
    RgbImage st = render_stereo(v, cfg);
    Image left = render_iso(v, stereo_eye_frame(frame_from(cfg.pose), 10, true), cfg);
    Image right = render_iso(v, stereo_eye_frame(frame_from(cfg.pose), 10, false), cfg);
    double worst = 0;
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x) worst = std::max(worst, static_cast<double>(std::abs(st.at(x, y, 0) - left.at(x, y))));
    CHECK(worst <= 1e-6);

    // A sphere 0.2 in front of the cube center shifts by depth * sin(separation).
    const double disparity = std::abs(mask_of(left).cx - mask_of(right).cx);
    CHECK(std::abs(disparity - 0.2 * std::sin(10 * std::numbers::pi / 180) * 96) <= 1.0);
}

TEST_CASE("cutaway") {
    Volume v = sphere(32, kCubeCenter, 0.3);
    RenderConfig cfg = small_config(32);
    Image plain = render_iso(v, cfg);
    cfg.clip_box = Box{{0, 0, 0}, {1, 1, 1}};
    Image cut = render_cutaway(v, cfg);
    for (float x : cut.data()) CHECK(x == 0.0f);
    cfg.clip_box = Box{{0.2, 0.2, 0.2}, {0.1, 1, 1}};
    CHECK_THROWS_AS(render_cutaway(v, cfg), InvalidInput);
    cfg.clip_box.reset();
    CHECK_THROWS_AS(render_cutaway(v, cfg), InvalidInput);
    CHECK(render_iso(v, cfg) == plain);
}

TEST_CASE("cut shell exposes the far wall") {
    const int n = 64;
    Volume shell = field(n, [](const Vec3& p) { return 0.05 - std::abs(norm(p - kCubeCenter) - 0.3); });
    RenderConfig cfg = small_config(64);
    cfg.clip_box = Box{{0, 0, 0.5}, {1, 1, 1}};
    const ViewFrame f = frame_from(cfg.pose);
    int checked = 0;
    for (int j = 0; j < 64; ++j)
        for (int i = 0; i < 64; ++i) {
            const double u = (i + 0.5) / 64 - 0.5, w = (j + 0.5) / 64 - 0.5;
            const double rho = std::hypot(u, w);
            if (rho > 0.2) continue;
            auto hit = first_hit(shell, f, cfg, i, j);
            REQUIRE(hit);
            const double expected_z = 0.5 - std::sqrt(0.25 * 0.25 - rho * rho);
            CHECK(std::abs(hit->z - expected_z) <= 1.0 / n);
            ++checked;
        }
    CHECK(checked > 100);
}

TEST_CASE("render config validation and serial reference") {
    RenderConfig cfg = small_config(16);
    cfg.iso_value = 1.0;
    CHECK_THROWS_AS(cfg.validate(), InvalidInput);
    cfg.iso_value = 0.2;
    Volume v = testing::random_volume(1, {10, 10, 10});
    ViewFrame f = frame_from(make_pose(normalize(Vec3{0.1, 0.2, 0.9})));
    CHECK(render_iso(v, f, cfg) == serial::render_iso(v, f, cfg));
}
