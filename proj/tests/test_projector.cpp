#include <doctest.h>

#include "support.hpp"
#include "xray2vol/dataset.hpp"
#include "xray2vol/error.hpp"
#include "xray2vol/projector.hpp"

using namespace xray2vol;

TEST_CASE("ray_transparency closed forms") {
    std::vector<float> zeros(16, 0.0f);
    CHECK(ray_transparency(zeros, 10, 1.0 / 16) == 1.0);
    std::vector<float> c(128, 0.1f);
    CHECK(ray_transparency(c, 10, 1.0 / 128) == doctest::Approx(std::exp(-1.0)).epsilon(1e-7));
    std::vector<float> two{0.2f, 0.3f};
    CHECK(ray_transparency(two, 1, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-7));
    std::vector<float> neg{-0.1f};
    CHECK_THROWS_AS(ray_transparency(neg, 1, 1), InvalidInput);
}

TEST_CASE("projector config validation") {
    ProjectorConfig pc;
    pc.chi = 0;
    CHECK_THROWS_AS(pc.validate(), InvalidInput);
    pc.chi = 1;
    pc.n_steps = 0;
    CHECK_THROWS_AS(pc.validate(), InvalidInput);
}

TEST_CASE("empty volume projects to zero") {
    ProjectorConfig pc;
    pc.width = pc.height = 16;
    Image img = project(Volume({8, 8, 8}), make_pose(normalize(Vec3{0.3, 0.1, 0.9})), pc);
    for (float v : img.data()) CHECK(v == 0.0f);
}

TEST_CASE("constant volume matches Beer-Lambert") {
    const double expected = 1 - std::exp(-0.5);
    for (int steps : {1, 16, 128}) {
        ProjectorConfig pc;
        pc.width = pc.height = 32;
        pc.n_steps = steps;
        for (Vec3 d : {Vec3{0, 0, 1}, Vec3{1, 0, 0}, Vec3{0, 1, 0}}) {
            Image img = project(Volume({16, 16, 16}, 0.05f), make_pose(d), pc);
            for (float v : img.data()) CHECK(std::abs(v - expected) <= 1e-5);
        }
    }
}

TEST_CASE("direction symmetry") {
    ViewSampler vs(42);
    ProjectorConfig pc;
    pc.width = pc.height = 32;
    pc.n_steps = 64;
    for (int k = 0; k < 5; ++k) {
        Volume v = generate_phantom(100 + k, {24, 24, 24});
        ViewPose p = vs.next();
        Image a = project(v, frame_from(p.direction, p.up_hint, p.mirrored), pc);
        Image b = project(v, frame_from(-p.direction, p.up_hint, !p.mirrored), pc);
        CHECK(testing::max_abs_diff(a, b) <= 1e-6);
    }
}

TEST_CASE("opacity stays below one and parallel matches serial") {
    ProjectorConfig pc;
    pc.width = pc.height = 12;
    pc.chi = 1e4;
    Volume v({8, 8, 8}, 1.0f);
    Image img = project(v, make_pose({0, 0, 1}), pc);
    CHECK_NOTHROW(img.validate_opacity());
    Volume r = testing::random_volume(3, {10, 9, 8});
    ViewFrame f = frame_from(make_pose(normalize(Vec3{0.4, -0.3, 0.5})));
    pc.chi = 10;
    CHECK(project(r, f, pc) == serial::project(r, f, pc));
}
