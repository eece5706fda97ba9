// Serial reference vs. OpenMP kernels. Prints one line per kernel with best-of-N timings.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

#include "xray2vol/dataset.hpp"
#include "xray2vol/fusion.hpp"
#include "xray2vol/metrics.hpp"
#include "xray2vol/net/layers.hpp"
#include "xray2vol/parallel.hpp"
#include "xray2vol/projector.hpp"
#include "xray2vol/render.hpp"
#include "xray2vol/volume.hpp"

using namespace xray2vol;

namespace {

double best_ms(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
}

void row(const char* name, double serial, double parallel) {
    std::printf("%-22s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx\n", name, serial, parallel, serial / parallel);
}

}  // namespace

int main() {
    const int threads = configure_threads_from_env();
    std::printf("threads: %d\n", threads);
    const Volume phantom = generate_phantom(7, {64, 64, 64});
    const ViewPose pose = make_pose(normalize(Vec3{0.3, 0.4, 0.8}));
    const ViewFrame frame = frame_from(pose);

    ProjectorConfig pc;
    pc.width = pc.height = 128;
    row("project 64^3 -> 128^2", best_ms(3, [&] { serial::project(phantom, frame, pc); }),
        best_ms(3, [&] { project(phantom, frame, pc); }));

    row("resample 64^3 -> 32^3", best_ms(3, [&] { serial::resample_gaussian(phantom, {32, 32, 32}); }),
        best_ms(3, [&] { resample_gaussian(phantom, {32, 32, 32}); }));

    const Volume coarse = resample_gaussian(phantom, {32, 32, 32});
    ProjectorConfig hp;
    hp.width = hp.height = 128;
    hp.n_steps = 32;
    const Image target = project(phantom, make_pose({0, 0, 1}), hp);
    FusionConfig fc;
    row("fuse 32^3 @ 128^2", best_ms(3, [&] { serial::fuse_volume(coarse, target, fc); }),
        best_ms(3, [&] { fuse_volume(coarse, target, fc); }));

    const Image a = project(phantom, pose, pc);
    const Image b = project(coarse, pose, pc);
    row("ssim 128^2", best_ms(5, [&] { serial::mean_ssim(a, b); }), best_ms(5, [&] { mean_ssim(a, b); }));

    RenderConfig rc;
    rc.width = rc.height = 128;
    rc.ao_samples = 8;
    row("render 64^3 @ 128^2", best_ms(2, [&] { serial::render_iso(phantom, frame, rc); }),
        best_ms(2, [&] { render_iso(phantom, frame, rc); }));

    std::mt19937_64 rng(3);
    std::normal_distribution<float> nd;
    nn::Tensor x = nn::Tensor::nchw(4, 16, 32, 32);
    nn::Tensor k({32, 16, 3, 3});
    for (auto& v : x.data()) v = nd(rng);
    for (auto& v : k.data()) v = nd(rng);
    row("conv direct vs gemm", best_ms(2, [&] { nn::reference::conv2d(x, k, nullptr, 1, 1); }),
        best_ms(5, [&] { nn::conv2d(x, k, nullptr, 1, 1); }));
    return 0;
}
