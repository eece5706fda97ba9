#include "grad_cases.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>

#include "net_support.hpp"
#include "xray2vol/net/network.hpp"

using namespace xray2vol::nn;

namespace gradcheck::XRAY2VOL_NN_PRECISION {

namespace {

constexpr int kProbesPerTensor = 4;

struct Probe {
    Tensor* value;
    const Tensor* grad;  // null for loss-input probes, which use `input_grad`
    std::size_t index;
};

/// One gradient-check instance. `loss()` runs forward (training mode) and returns the
/// scalar; `backprop()` runs forward + backward and leaves gradients in place.
struct Instance {
    std::function<double()> loss;
    std::function<void()> backprop;
    std::vector<Probe> probes;
    Tensor input_grad;
    // Owned state kept alive for the closures.
    std::vector<std::shared_ptr<void>> keep;
};

Tensor weights_for(std::uint64_t seed, const std::vector<int>& dims) { return testing::random_tensor(seed ^ 0x5151, dims); }

double weighted_sum(const Tensor& y, const Tensor& r) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<double>(y[i]) * r[i];
    return s;
}

void add_probes(Instance& inst, Tensor& value, const Tensor* grad, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, value.size() - 1);
    for (int k = 0; k < kProbesPerTensor; ++k) inst.probes.push_back({&value, grad, pick(rng)});
}

template <typename Layer, typename Forward, typename Backward>
Instance layer_instance(std::shared_ptr<Layer> layer, std::vector<int> in_dims, std::vector<int> out_dims, std::uint64_t seed,
                        Forward fwd, Backward bwd, double input_sd = 1.0) {
    Instance inst;
    auto store = std::make_shared<testing::ParamStore>(*layer, seed);
    auto x = std::make_shared<Tensor>(testing::random_tensor(seed * 7 + 1, in_dims, input_sd));
    auto r = std::make_shared<Tensor>(weights_for(seed, out_dims));
    inst.keep = {layer, store, x, r};
    auto* L = layer.get();
    inst.loss = [=] { return weighted_sum(fwd(*L, *x), *r); };
    auto dx = std::make_shared<Tensor>();
    inst.keep.push_back(dx);
    inst.backprop = [=] {
        for (auto& [name, g] : store->grads) g.fill(0);
        fwd(*L, *x);
        *dx = bwd(*L, *r);
    };
    std::mt19937_64 rng(seed + 99);
    for (const auto& spec : store->specs)
        if (spec.trainable) add_probes(inst, store->values.at(spec.name), &store->grads.at(spec.name), rng);
    add_probes(inst, *x, dx.get(), rng);
    return inst;
}

Instance make(Case c, std::uint64_t seed) {
    switch (c) {
        case Case::conv2d: {
            const int stride = seed % 2 ? 2 : 1;
            auto layer = std::make_shared<Conv2d>("c", 3, 4, 3, stride, 1);
            const int o = conv_out_size(7, 3, stride, 1);
            return layer_instance(layer, {2, 3, 7, 7}, {2, 4, o, o}, seed, [](Conv2d& l, const Tensor& x) { return l.forward(x); },
                                  [](Conv2d& l, const Tensor& dy) { return l.backward(dy); });
        }
        case Case::deconv2d: {
            auto layer = std::make_shared<Deconv2d>("d", 3, 2, 4, 2, 1);
            return layer_instance(layer, {2, 3, 4, 5}, {2, 2, 8, 10}, seed,
                                  [](Deconv2d& l, const Tensor& x) { return l.forward(x); },
                                  [](Deconv2d& l, const Tensor& dy) { return l.backward(dy); });
        }
        case Case::batchnorm: {
            auto layer = std::make_shared<BatchNorm>("bn", 3);
            return layer_instance(layer, {3, 3, 4, 4}, {3, 3, 4, 4}, seed,
                                  [](BatchNorm& l, const Tensor& x) { return l.forward(x, Mode::train); },
                                  [](BatchNorm& l, const Tensor& dy) { return l.backward(dy); }, 2.0);
        }
        case Case::relu: {
            Instance inst;
            auto x = std::make_shared<Tensor>(testing::random_tensor(seed * 7 + 1, {2, 3, 5, 5}));
            // Keep inputs away from the kink so central differences are well defined.
            for (auto& v : x->data())
                if (std::abs(v) < 0.05) v = v < 0 ? static_cast<real>(-0.05) : static_cast<real>(0.05);
            auto r = std::make_shared<Tensor>(weights_for(seed, {2, 3, 5, 5}));
            auto dx = std::make_shared<Tensor>();
            inst.keep = {x, r, dx};
            inst.loss = [=] { return weighted_sum(relu(*x), *r); };
            inst.backprop = [=] { *dx = relu_backward(relu(*x), *r); };
            std::mt19937_64 rng(seed + 99);
            for (int k = 0; k < 3; ++k) add_probes(inst, *x, dx.get(), rng);
            return inst;
        }
        case Case::basic_block: {
            auto layer = std::make_shared<BasicBlock>("b", 2, 3, 3, seed % 2 ? 2 : 1);
            const int o = seed % 2 ? 3 : 6;
            return layer_instance(layer, {2, 2, 6, 6}, {2, 3, o, o}, seed,
                                  [](BasicBlock& l, const Tensor& x) { return l.forward(x, Mode::train); },
                                  [](BasicBlock& l, const Tensor& dy) { return l.backward(dy); });
        }
        case Case::residual3: {
            auto layer = std::make_shared<Residual3Block>("r", 3);
            return layer_instance(layer, {2, 3, 5, 5}, {2, 3, 5, 5}, seed,
                                  [](Residual3Block& l, const Tensor& x) { return l.forward(x, Mode::train); },
                                  [](Residual3Block& l, const Tensor& dy) { return l.backward(dy); });
        }
        case Case::network: {
            Instance inst;
            const NetworkConfig cfg{16, 4, 8, 4, 1};
            auto net = std::make_shared<Network>(cfg);
            // Random parameters everywhere, including the head, so every path carries gradient.
            std::mt19937_64 init(seed);
            std::normal_distribution<double> nd(0.0, 0.5);
            for (std::size_t i = 0; i < net->topology().size(); ++i) {
                const auto& spec = net->topology()[i];
                for (auto& v : net->weights().tensors[i].value.data())
                    v = static_cast<real>(spec.name.ends_with("running_var") ? 1.0 : nd(init));
            }
            auto x = std::make_shared<Tensor>(testing::random_tensor(seed * 7 + 1, {2, 1, 16, 16}, 0.5));
            auto target = std::make_shared<Tensor>(testing::random_tensor(seed * 7 + 2, {2, 4, 8, 8}, 0.3));
            auto dx = std::make_shared<Tensor>();
            inst.keep = {net, x, target, dx};
            inst.loss = [=] { return loss_l2(net->forward(*x, Mode::train), *target, nullptr); };
            inst.backprop = [=] {
                net->zero_grads();
                Tensor g;
                loss_l2(net->forward(*x, Mode::train), *target, &g);
                *dx = net->backward(g);
            };
            std::mt19937_64 rng(seed + 99);
            for (std::size_t i = 0; i < net->topology().size(); ++i)
                if (net->topology()[i].trainable && i % 3 == 0)
                    add_probes(inst, net->weights().tensors[i].value, &net->grads().tensors[i].value, rng);
            add_probes(inst, *x, dx.get(), rng);
            return inst;
        }
        case Case::loss_l2: {
            Instance inst;
            auto p = std::make_shared<Tensor>(testing::random_tensor(seed * 7 + 1, {2, 3, 4, 4}));
            auto t = std::make_shared<Tensor>(testing::random_tensor(seed * 7 + 2, {2, 3, 4, 4}));
            auto g = std::make_shared<Tensor>();
            inst.keep = {p, t, g};
            inst.loss = [=] { return loss_l2(*p, *t, nullptr); };
            inst.backprop = [=] { loss_l2(*p, *t, g.get()); };
            std::mt19937_64 rng(seed + 99);
            for (int k = 0; k < 3; ++k) add_probes(inst, *p, g.get(), rng);
            return inst;
        }
    }
    throw std::logic_error("unknown gradient case");
}

}  // namespace

std::vector<double> analytic(Case c, std::uint64_t seed) {
    Instance inst = make(c, seed);
    inst.backprop();
    std::vector<double> out;
    for (const Probe& p : inst.probes) out.push_back(static_cast<double>((*p.grad)[p.index]));
    return out;
}

std::vector<double> numeric(Case c, std::uint64_t seed, double h) {
    Instance inst = make(c, seed);
    std::vector<double> out;
    for (const Probe& p : inst.probes) {
        real& v = (*p.value)[p.index];
        const real saved = v;
        v = static_cast<real>(saved + h);
        const double up = inst.loss();
        v = static_cast<real>(saved - h);
        const double down = inst.loss();
        v = saved;
        out.push_back((up - down) / (2 * h));
    }
    return out;
}

}  // namespace gradcheck::XRAY2VOL_NN_PRECISION
