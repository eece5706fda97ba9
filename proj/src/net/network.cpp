#include "xray2vol/net/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <random>

#include "xray2vol/error.hpp"

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

void NetworkConfig::validate() const {
    auto pow2 = [](int v) { return v > 0 && std::has_single_bit(static_cast<unsigned>(v)); };
    if (!pow2(input_size) || !pow2(min_resolution)) throw InvalidInput("network: input_size and min_resolution must be powers of two");
    if (input_size <= min_resolution) throw InvalidInput("network: input_size must exceed min_resolution");
    if (base_channels < 1 || out_depth < 1 || blocks_per_stage < 1) throw InvalidInput("network: channel and block counts must be positive");
}

int NetworkConfig::levels() const { return std::countr_zero(static_cast<unsigned>(input_size / min_resolution)); }

int NetworkConfig::channels_at(int level) const {
    long c = 16L << std::min(level, 20);
    return static_cast<int>(std::min<long>(c, base_channels));
}

Tensor* NetworkWeights::find(const std::string& name) {
    for (auto& t : tensors)
        if (t.name == name) return &t.value;
    return nullptr;
}

const Tensor* NetworkWeights::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t.value;
    return nullptr;
}

namespace {
constexpr double kHeadGain = 0.01;
}

struct Network::Layers {
    std::vector<BasicBlock> stem;
    std::vector<BasicBlock> down;
    std::vector<Residual3Block> enc;
    std::vector<Deconv2d> up;
    std::vector<BasicBlock> merge;
    std::vector<Residual3Block> dec;
    Residual3Block head_res;
    Conv2d head;
    std::vector<int> skip_channels;  // per decoder step, channels of the concatenated skip
    int decoder_channels = 0;

    template <typename Fn>
    void each(Fn&& fn) {
        for (auto& l : stem) fn(l);
        for (std::size_t i = 0; i < down.size(); ++i) {
            fn(down[i]);
            fn(enc[i]);
        }
        for (std::size_t i = 0; i < up.size(); ++i) {
            fn(up[i]);
            fn(merge[i]);
            fn(dec[i]);
        }
        fn(head_res);
        fn(head);
    }
};

namespace {

class IndexBinder final : public ParamBinder {
public:
    IndexBinder(NetworkWeights& values, NetworkWeights& grads) : values_(values), grads_(grads) {
        for (std::size_t i = 0; i < values.tensors.size(); ++i) index_[values.tensors[i].name] = i;
    }
    Tensor* value(const std::string& name) override { return &values_.tensors.at(lookup(name)).value; }
    Tensor* grad(const std::string& name) override { return &grads_.tensors.at(lookup(name)).value; }

private:
    std::size_t lookup(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw TopologyError("missing parameter " + name);
        return it->second;
    }
    NetworkWeights& values_;
    NetworkWeights& grads_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace

Network::Network(NetworkConfig cfg) : cfg_(cfg), layers_(std::make_unique<Layers>()) {
    cfg_.validate();
    Layers& L = *layers_;
    const int levels = cfg_.levels();
    const int c0 = cfg_.channels_at(0);
    for (int b = 0; b < cfg_.blocks_per_stage; ++b)
        L.stem.emplace_back("stem." + std::to_string(b), b == 0 ? 1 : c0, c0);
    for (int l = 1; l <= levels; ++l) {
        const std::string name = "enc" + std::to_string(l);
        L.down.emplace_back(name + ".down", cfg_.channels_at(l - 1), cfg_.channels_at(l), 3, 2);
        L.enc.emplace_back(name + ".res", cfg_.channels_at(l));
    }
    L.decoder_channels = cfg_.channels_at(levels);
    const int cd = L.decoder_channels;
    // Decoder climbs from level `levels` back to level 1 (input_size / 2).
    for (int l = levels - 1; l >= 1; --l) {
        const std::string name = "dec" + std::to_string(l);
        L.up.emplace_back(name + ".up", cd, cd, 4, 2, 1);
        L.skip_channels.push_back(cfg_.channels_at(l));
        L.merge.emplace_back(name + ".merge", cd + cfg_.channels_at(l), cd, 1, 1);
        L.dec.emplace_back(name + ".res", cd);
    }
    L.head_res = Residual3Block("head.res", cd);
    L.head = Conv2d("head.out", cd, cfg_.out_depth, 1, 1, 0);

    L.each([&](auto& layer) { layer.declare(specs_); });
    // Residual sums grow with depth; start the linear head near zero output.
    for (ParamSpec& s : specs_)
        if (s.name == "head.out.kernel") s.gain = kHeadGain;
    for (const ParamSpec& s : specs_) {
        weights_.tensors.push_back({s.name, Tensor(s.dims)});
        grads_.tensors.push_back({s.name, Tensor(s.dims)});
    }
    IndexBinder binder(weights_, grads_);
    L.each([&](auto& layer) { layer.bind(binder); });
    initialize(0);
}

Network::~Network() = default;

void Network::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < specs_.size(); ++i) {
        const ParamSpec& s = specs_[i];
        Tensor& t = weights_.tensors[i].value;
        switch (s.init) {
            case ParamSpec::Init::zeros: t.fill(0); break;
            case ParamSpec::Init::ones: t.fill(1); break;
            case ParamSpec::Init::he_normal: {
                std::normal_distribution<double> dist(0.0, s.gain * std::sqrt(2.0 / std::max(1, s.fan_in)));
                for (real& v : t.data()) v = static_cast<real>(dist(rng));
                break;
            }
        }
    }
    zero_grads();
}

void check_topology(const NetworkConfig& cfg, const NetworkWeights& w) {
    Network reference(cfg);
    for (const ParamSpec& s : reference.topology()) {
        const Tensor* t = w.find(s.name);
        if (!t) throw TopologyError("weights are missing tensor '" + s.name + "' expected by the network topology");
        if (t->dims() != s.dims)
            throw TopologyError("tensor '" + s.name + "' has dims " + dims_string(t->dims()) + " but the topology expects " +
                                dims_string(s.dims));
    }
    if (w.tensors.size() != reference.topology().size()) {
        for (const auto& t : w.tensors)
            if (t.name != "meta.config" &&
                std::none_of(reference.topology().begin(), reference.topology().end(), [&](const ParamSpec& s) { return s.name == t.name; }))
                throw TopologyError("weights contain tensor '" + t.name + "' that is not part of the network topology");
    }
}

void Network::set_weights(const NetworkWeights& w) {
    check_topology(cfg_, w);
    for (std::size_t i = 0; i < specs_.size(); ++i) weights_.tensors[i].value = *w.find(specs_[i].name);
}

void Network::zero_grads() {
    for (auto& g : grads_.tensors) g.value.fill(0);
}

Tensor Network::forward(const Tensor& x, Mode mode) {
    if (x.rank() != 4 || x.c() != 1 || x.h() != cfg_.input_size || x.w() != cfg_.input_size)
        throw InvalidInput("network: expected input (N,1," + std::to_string(cfg_.input_size) + "," +
                           std::to_string(cfg_.input_size) + "), got " + dims_string(x.dims()));
    Layers& L = *layers_;
    Tensor t = x;
    for (auto& b : L.stem) t = b.forward(t, mode);
    std::vector<Tensor> skips;
    for (std::size_t l = 0; l < L.down.size(); ++l) {
        t = L.down[l].forward(t, mode);
        t = L.enc[l].forward(t, mode);
        skips.push_back(t);
    }
    // skips[i] is the output at level i + 1; decoder step j pairs with level levels - 1 - j.
    const int levels = static_cast<int>(L.down.size());
    for (std::size_t j = 0; j < L.up.size(); ++j) {
        t = L.up[j].forward(t);
        t = concat_channels(t, skips[static_cast<std::size_t>(levels - 2 - static_cast<int>(j))]);
        t = L.merge[j].forward(t, mode);
        t = L.dec[j].forward(t, mode);
    }
    t = L.head_res.forward(t, mode);
    return L.head.forward(t);
}

Tensor Network::backward(const Tensor& dy) {
    Layers& L = *layers_;
    const int levels = static_cast<int>(L.down.size());
    Tensor d = L.head.backward(dy);
    d = L.head_res.backward(d);
    std::vector<Tensor> dskip(static_cast<std::size_t>(levels));
    for (int j = static_cast<int>(L.up.size()) - 1; j >= 0; --j) {
        d = L.dec[static_cast<std::size_t>(j)].backward(d);
        d = L.merge[static_cast<std::size_t>(j)].backward(d);
        Tensor dup, ds;
        split_channels(d, L.decoder_channels, dup, ds);
        dskip[static_cast<std::size_t>(levels - 2 - j)] = std::move(ds);
        d = L.up[static_cast<std::size_t>(j)].backward(dup);
    }
    for (int l = levels - 1; l >= 0; --l) {
        if (!dskip[static_cast<std::size_t>(l)].empty() && l != levels - 1) add_inplace(d, dskip[static_cast<std::size_t>(l)]);
        d = L.enc[static_cast<std::size_t>(l)].backward(d);
        d = L.down[static_cast<std::size_t>(l)].backward(d);
    }
    for (int b = static_cast<int>(L.stem.size()) - 1; b >= 0; --b) d = L.stem[static_cast<std::size_t>(b)].backward(d);
    return d;
}

Tensor images_to_tensor(const std::vector<const Image*>& images) {
    if (images.empty()) throw InvalidInput("images_to_tensor: empty batch");
    const int w = images[0]->width(), h = images[0]->height();
    Tensor t = Tensor::nchw(static_cast<int>(images.size()), 1, h, w);
    for (std::size_t n = 0; n < images.size(); ++n) {
        if (images[n]->width() != w || images[n]->height() != h) throw InvalidInput("images_to_tensor: mixed image sizes");
        std::copy(images[n]->data().begin(), images[n]->data().end(), t.item(static_cast<int>(n)));
    }
    return t;
}

Tensor volumes_to_tensor(const std::vector<const Volume*>& volumes) {
    if (volumes.empty()) throw InvalidInput("volumes_to_tensor: empty batch");
    const Dims3 d = volumes[0]->dims();
    Tensor t = Tensor::nchw(static_cast<int>(volumes.size()), d.nz, d.ny, d.nx);
    for (std::size_t n = 0; n < volumes.size(); ++n) {
        if (volumes[n]->dims() != d) throw InvalidInput("volumes_to_tensor: mixed volume sizes");
        // Volume storage (x fastest, then y, then z) is exactly (z, y, x) row-major.
        std::copy(volumes[n]->data().begin(), volumes[n]->data().end(), t.item(static_cast<int>(n)));
    }
    return t;
}

Volume tensor_to_volume(const Tensor& t, int item) {
    Volume v({t.w(), t.h(), t.c()});
    const real* src = t.item(item);
    auto dst = v.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(src[i]);
    return v;
}

Volume network_forward(const Image& image, const NetworkConfig& cfg, const NetworkWeights& weights, Mode mode) {
    if (image.width() != cfg.input_size || image.height() != cfg.input_size)
        throw InvalidInput("network_forward: image must be " + std::to_string(cfg.input_size) + "x" + std::to_string(cfg.input_size));
    Network net(cfg);
    net.set_weights(weights);
    Tensor y = net.forward(images_to_tensor({&image}), mode);
    return clamp01(tensor_to_volume(y, 0));
}

double loss_l2(const Tensor& prediction, const Tensor& target, Tensor* grad) {
    if (prediction.dims() != target.dims())
        throw InvalidInput("loss_l2: dims " + dims_string(prediction.dims()) + " vs " + dims_string(target.dims()));
    const std::size_t n = prediction.size();
    double acc = 0.0;
    if (grad) *grad = Tensor(prediction.dims());
    for (std::size_t i = 0; i < n; ++i) {
        double d = static_cast<double>(prediction[i]) - target[i];
        acc += d * d;
        if (grad) (*grad)[i] = static_cast<real>(2.0 * d / static_cast<double>(n));
    }
    return n ? acc / static_cast<double>(n) : 0.0;
}

double loss_l2(const Volume& prediction, const Volume& target) {
    if (prediction.dims() != target.dims()) throw InvalidInput("loss_l2: volume dims differ");
    double acc = 0.0;
    auto p = prediction.data(), t = target.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        double d = static_cast<double>(p[i]) - t[i];
        acc += d * d;
    }
    return p.empty() ? 0.0 : acc / static_cast<double>(p.size());
}

}  // namespace xray2vol::nn
