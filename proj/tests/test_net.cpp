#include <doctest.h>

#include <fstream>
#include <sstream>

#include "net_support.hpp"
#include "support.hpp"
#include "xray2vol/error.hpp"
#include "xray2vol/net/network.hpp"
#include "xray2vol/net/train.hpp"

using namespace xray2vol;
using namespace xray2vol::nn;
using testing::random_tensor;

namespace {

// Direct definition of a strided, zero-padded cross-correlation.
Tensor conv_oracle(const Tensor& x, const Tensor& k, int stride, int pad) {
    const int kh = k.dim(2);
    const int oh = (x.h() + 2 * pad - kh) / stride + 1, ow = (x.w() + 2 * pad - kh) / stride + 1;
    Tensor y = Tensor::nchw(x.n(), k.dim(0), oh, ow);
    for (int n = 0; n < x.n(); ++n)
        for (int o = 0; o < k.dim(0); ++o)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0;
                    for (int c = 0; c < x.c(); ++c)
                        for (int dy = 0; dy < kh; ++dy)
                            for (int dx = 0; dx < kh; ++dx) {
                                int iy = oy * stride - pad + dy, ix = ox * stride - pad + dx;
                                if (iy < 0 || ix < 0 || iy >= x.h() || ix >= x.w()) continue;
                                acc += static_cast<double>(x.at(n, c, iy, ix)) * k.at(o, c, dy, dx);
                            }
                    y.at(n, o, oy, ox) = static_cast<real>(acc);
                }
    return y;
}

double inner(const Tensor& a, const Tensor& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

double max_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.dims() == b.dims());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

NetworkConfig tiny_config() { return {16, 4, 16, 4, 1}; }

}  // namespace

TEST_CASE("conv2d against the direct definition") {
    Tensor x({1, 1, 2, 2}, std::vector<real>{1, 2, 3, 4});
    Tensor ones({1, 1, 3, 3}, 1);
    Tensor y = conv2d(x, ones, nullptr, 1, 1);
    Tensor ref = conv_oracle(x, ones, 1, 1);
    CHECK(max_diff(y, ref) == 0.0);
    for (real v : y.data()) CHECK(v == 10);

    Tensor id({1, 1, 1, 1}, 1);
    Tensor r = random_tensor(1, {2, 1, 5, 5});
    CHECK(conv2d(r, id, nullptr, 1, 0) == r);

    for (std::uint64_t s = 0; s < 4; ++s) {
        Tensor xi = random_tensor(10 + s, {2, 3, 9, 8});
        Tensor k = random_tensor(20 + s, {4, 3, 3, 3});
        Tensor b = random_tensor(30 + s, {4});
        for (int stride : {1, 2}) {
            Tensor got = conv2d(xi, k, &b, stride, 1);
            Tensor want = conv_oracle(xi, k, stride, 1);
            for (int n = 0; n < want.n(); ++n)
                for (int o = 0; o < 4; ++o)
                    for (int yy = 0; yy < want.h(); ++yy)
                        for (int xx = 0; xx < want.w(); ++xx) want.at(n, o, yy, xx) += b[static_cast<std::size_t>(o)];
            CHECK(max_diff(got, want) < 1e-4);
            CHECK(max_diff(reference::conv2d(xi, k, &b, stride, 1), want) < 1e-4);
        }
    }
}

TEST_CASE("deconv2d") {
    Tensor k = random_tensor(2, {3, 2, 4, 4});
    Tensor x = random_tensor(3, {2, 3, 5, 6});
    Tensor y = deconv2d(x, k, nullptr, 2, 1);
    CHECK(y.dims() == std::vector<int>{2, 2, 10, 12});
    CHECK(max_diff(y, reference::deconv2d(x, k, nullptr, 2, 1)) < 1e-4);

    // Adjoint of the strided convolution with the same kernel.
    Tensor z = random_tensor(4, {2, 2, 10, 12});
    Tensor kc({3, 2, 4, 4});  // conv kernel (out=3, in=2) viewing the same numbers
    for (int i = 0; i < 3; ++i)
        for (int o = 0; o < 2; ++o)
            for (int a = 0; a < 4; ++a)
                for (int b = 0; b < 4; ++b) kc.at(i, o, a, b) = k.at(i, o, a, b);
    Tensor cz = conv_oracle(z, kc, 2, 1);
    CHECK(std::abs(inner(cz, x) - inner(z, y)) < 1e-4 * std::max(1.0, std::abs(inner(z, y))));

    // One pixel stamps the kernel at twice its position, shifted by the padding.
    Tensor one = Tensor::nchw(1, 1, 3, 3);
    one.at(0, 0, 1, 2) = 1;
    Tensor k1 = random_tensor(5, {1, 1, 4, 4});
    Tensor s = deconv2d(one, k1, nullptr, 2, 1);
    for (int yy = 0; yy < 6; ++yy)
        for (int xx = 0; xx < 6; ++xx) {
            int a = yy - (2 * 1 - 1), b = xx - (2 * 2 - 1);
            real want = (a >= 0 && a < 4 && b >= 0 && b < 4) ? k1.at(0, 0, a, b) : 0;
            CHECK(s.at(0, 0, yy, xx) == doctest::Approx(want));
        }
}

TEST_CASE("batch norm statistics") {
    Tensor x = random_tensor(6, {4, 3, 5, 5}, 3.0);
    Tensor scale({3}, 1), shift({3}, 0), rm({3}, 0), rv({3}, 1);
    BatchNormCache cache;
    Tensor y = batchnorm(x, scale, shift, rm, rv, Mode::train, &cache);
    for (int c = 0; c < 3; ++c) {
        double s = 0, ss = 0;
        int count = 0;
        for (int n = 0; n < 4; ++n)
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < 5; ++j) {
                    s += y.at(n, c, i, j);
                    ss += y.at(n, c, i, j) * y.at(n, c, i, j);
                    ++count;
                }
        CHECK(std::abs(s / count) < 1e-4);
        CHECK(std::abs(ss / count - 1) < 1e-4);
    }
}

TEST_CASE("basic and residual blocks") {
    BasicBlock block("b", 3, 5);
    testing::ParamStore ps(block, 1);
    // A zero input makes every channel constant (the conv bias), which normalizes to zero.
    Tensor y = block.forward(Tensor::nchw(2, 3, 6, 6), Mode::train);
    const Tensor& shift = ps.values.at("b.bn.shift");
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 5; ++c)
            for (int i = 0; i < 36; ++i) CHECK(y.item(n)[c * 36 + i] == doctest::Approx(std::max(0.0f, shift[c])));

    Residual3Block res("r", 4);
    testing::ParamStore rs(res, 2);
    Tensor x = random_tensor(7, {2, 4, 6, 6});
    Tensor full = res.forward(x, Mode::infer);
    Tensor branch = res.forward_branch(x, Mode::infer);
    add_inplace(branch, x);
    CHECK(max_diff(full, branch) < 1e-6);
    for (auto& [name, t] : rs.values)
        if (name.ends_with(".kernel") || name.ends_with(".scale") || name.ends_with(".shift") || name.ends_with(".bias")) t.fill(0);
    CHECK(res.forward(x, Mode::train) == x);
}

TEST_CASE("network shapes and determinism") {
    NetworkConfig desk = NetworkConfig::desk();
    CHECK(desk.levels() == 3);
    Network net(desk);
    net.initialize(3);
    Tensor x = random_tensor(8, {2, 1, 64, 64}, 0.3);
    Tensor y = net.forward(x, Mode::infer);
    CHECK(y.dims() == std::vector<int>{2, 32, 32, 32});
    CHECK(net.forward(x, Mode::infer) == y);
    Volume v = tensor_to_volume(y, 1);
    CHECK(v.dims() == Dims3{32, 32, 32});
    CHECK(v.at(3, 4, 5) == y.at(1, 5, 4, 3));

    NetworkConfig bad{48, 8, 32, 32, 3};
    CHECK_THROWS_AS(bad.validate(), InvalidInput);
    CHECK_THROWS_AS(net.forward(random_tensor(1, {1, 1, 32, 32}), Mode::infer), InvalidInput);
}

TEST_CASE("canonical configuration maps 256^2 to 128^3") {
    NetworkConfig c = NetworkConfig::canonical();
    Image img(256, 256, 0.2f);
    Network net(c);
    net.initialize(1);
    Volume v = network_forward(img, c, net.weights(), Mode::infer);
    CHECK(v.dims() == Dims3{128, 128, 128});
    CHECK_NOTHROW(v.validate_density());
}

TEST_CASE("loss_l2") {
    Volume a = testing::random_volume(1, {4, 4, 4}, 0.0f, 0.8f);
    CHECK(loss_l2(a, a) == 0.0);
    Volume b = a;
    for (float& x : b.data()) x += 0.1f;
    CHECK(loss_l2(a, b) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("weights round trip and errors") {
    testing::TempDir dir("w");
    NetworkConfig cfg = tiny_config();
    Network net(cfg);
    net.initialize(9);
    save_weights(cfg, net.weights(), dir / "w.xnnw");
    LoadedWeights lw = load_weights(dir / "w.xnnw");
    CHECK(lw.config == cfg);
    CHECK(lw.weights == net.weights());
    CHECK(load_weights(dir / "w.xnnw", cfg) == net.weights());

    NetworkConfig other = cfg;
    other.base_channels = 32;
    CHECK_THROWS_WITH_AS(load_weights(dir / "w.xnnw", other), doctest::Contains("enc1.down.conv.kernel"), TopologyError);

    std::stringstream ss;
    write_weights(cfg, net.weights(), ss);
    const std::string bytes = ss.str();
    {
        std::istringstream is(bytes.substr(0, bytes.size() - 10));
        CHECK_THROWS_WITH_AS(read_weights(is), doctest::Contains("truncated"), FormatError);
    }
    {
        std::string b = bytes;
        b[0] = 'Q';
        std::istringstream is(b);
        CHECK_THROWS_WITH_AS(read_weights(is), doctest::Contains("magic"), FormatError);
    }
    NetworkWeights missing = net.weights();
    missing.tensors.erase(missing.tensors.begin() + 3);
    CHECK_THROWS_WITH_AS(net.set_weights(missing), doctest::Contains(net.weights().tensors[3].name.c_str()), TopologyError);
}

namespace {

std::vector<SamplePair> synthetic_pairs(int n, const NetworkConfig& cfg) {
    std::vector<SamplePair> out;
    for (int i = 0; i < n; ++i) {
        SamplePair p;
        p.image = testing::random_image(static_cast<std::uint64_t>(i), cfg.input_size, cfg.input_size, 0.0f, 0.9f);
        Volume v({cfg.output_size(), cfg.output_size(), cfg.out_depth});
        for (int z = 0; z < cfg.out_depth; ++z)
            for (int y = 0; y < cfg.output_size(); ++y)
                for (int x = 0; x < cfg.output_size(); ++x)
                    v.at(x, y, z) = 0.5f * p.image.at(2 * x, 2 * y) * static_cast<float>(z + 1) / static_cast<float>(cfg.out_depth);
        p.volume = std::move(v);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace

TEST_CASE("training is reproducible under a fixed seed") {
    NetworkConfig cfg = tiny_config();
    auto set = synthetic_pairs(6, cfg);
    TrainHyper h;
    h.epochs = 2;
    h.batch = 3;
    h.seed = 5;
    TrainResult a = train(set, {}, cfg, h);
    TrainResult b = train(set, {}, cfg, h);
    CHECK(a.step_losses == b.step_losses);
    CHECK(a.weights == b.weights);
    CHECK(a.log.size() == 3);

    std::ostringstream csv;
    write_loss_csv(a.log, csv);
    CHECK(csv.str().rfind("epoch,train_loss,val_loss,seconds\n", 0) == 0);

    h.lr = 1e30;
    CHECK_THROWS_AS(train(set, {}, cfg, h), DivergenceError);
}

TEST_CASE("overfits a single sample") {
    NetworkConfig cfg = tiny_config();
    auto set = synthetic_pairs(1, cfg);
    TrainHyper h;
    h.iterations = 200;
    h.batch = 1;
    TrainResult r = train(set, {}, cfg, h);
    REQUIRE(r.step_losses.size() == 200);
    CHECK(r.step_losses.back() * 10 <= r.step_losses.front());
}
