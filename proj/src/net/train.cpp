#include "xray2vol/net/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "xray2vol/error.hpp"

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

void TrainHyper::validate() const {
    if (!(lr > 0) || !(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || !(eps > 0))
        throw InvalidInput("train: invalid optimizer hyper-parameters");
    if (batch < 1) throw InvalidInput("train: batch must be positive");
    if (epochs < 0 || iterations < 0) throw InvalidInput("train: epochs and iterations must be non-negative");
}

Adam::Adam(const std::vector<ParamSpec>& specs, const TrainHyper& h)
    : lr_(h.lr), b1_(h.beta1), b2_(h.beta2), eps_(h.eps) {
    for (const ParamSpec& s : specs) {
        std::size_t n = 1;
        for (int d : s.dims) n *= static_cast<std::size_t>(d);
        trainable_.push_back(s.trainable);
        m_.emplace_back(s.trainable ? n : 0, 0.0);
        v_.emplace_back(s.trainable ? n : 0, 0.0);
    }
}

void Adam::step(NetworkWeights& w, const NetworkWeights& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < trainable_.size(); ++i) {
        if (!trainable_[i]) continue;
        auto p = w.tensors[i].value.data();
        auto d = g.tensors[i].value.data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = d[k];
            m[k] = b1_ * m[k] + (1 - b1_) * gk;
            v[k] = b2_ * v[k] + (1 - b2_) * gk * gk;
            p[k] = static_cast<real>(p[k] - lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_));
        }
    }
}

namespace {

struct Batch {
    Tensor x, y;
};

Batch make_batch(const std::vector<SamplePair>& set, const std::vector<std::size_t>& order, std::size_t begin, std::size_t end) {
    std::vector<const Image*> images;
    std::vector<const Volume*> volumes;
    for (std::size_t i = begin; i < end; ++i) {
        images.push_back(&set[order[i]].image);
        volumes.push_back(&set[order[i]].volume);
    }
    return {images_to_tensor(images), volumes_to_tensor(volumes)};
}

void check_shapes(const std::vector<SamplePair>& set, const NetworkConfig& cfg) {
    for (const SamplePair& s : set) {
        if (s.image.width() != cfg.input_size || s.image.height() != cfg.input_size)
            throw InvalidInput("train: image of " + (s.sample ? s.sample->id : std::string("sample")) + " is not " +
                               std::to_string(cfg.input_size) + " square");
        const Dims3 d = s.volume.dims();
        if (d.nx != cfg.output_size() || d.ny != cfg.output_size() || d.nz != cfg.out_depth)
            throw InvalidInput("train: volume of " + (s.sample ? s.sample->id : std::string("sample")) +
                               " does not match the network output shape");
    }
}

}  // namespace

double evaluate_loss(Network& net, const std::vector<SamplePair>& set, int batch) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> order(set.size());
    std::iota(order.begin(), order.end(), 0);
    double total = 0.0;
    for (std::size_t b = 0; b < set.size(); b += static_cast<std::size_t>(batch)) {
        const std::size_t e = std::min(set.size(), b + static_cast<std::size_t>(batch));
        Batch mb = make_batch(set, order, b, e);
        total += loss_l2(net.forward(mb.x, Mode::infer), mb.y, nullptr) * static_cast<double>(e - b);
    }
    return total / static_cast<double>(set.size());
}

TrainResult train(const std::vector<SamplePair>& train_set, const std::vector<SamplePair>& val_set, const NetworkConfig& cfg,
                  const TrainHyper& hyper) {
    hyper.validate();
    if (train_set.empty()) throw InvalidInput("train: empty training set");
    check_shapes(train_set, cfg);
    check_shapes(val_set, cfg);

    Network net(cfg);
    net.initialize(hyper.seed);
    Adam adam(net.topology(), hyper);
    std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
    TrainResult result;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };

    auto record = [&](EpochLog row) {
        result.log.push_back(row);
        if (hyper.on_epoch) hyper.on_epoch(row);
    };

    double best = evaluate_loss(net, val_set, hyper.batch);
    record({0, evaluate_loss(net, train_set, hyper.batch), best, elapsed()});
    result.weights = net.weights();

    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t bs = static_cast<std::size_t>(hyper.batch);
    long steps = 0;
    for (int epoch = 1;; ++epoch) {
        if (hyper.iterations == 0 && epoch > hyper.epochs) break;
        if (hyper.iterations > 0 && steps >= hyper.iterations) break;
        std::shuffle(order.begin(), order.end(), rng);
        double sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t b = 0; b < order.size(); b += bs) {
            if (hyper.iterations > 0 && steps >= hyper.iterations) break;
            const std::size_t e = std::min(order.size(), b + bs);
            Batch mb = make_batch(train_set, order, b, e);
            net.zero_grads();
            Tensor grad;
            const double loss = loss_l2(net.forward(mb.x, Mode::train), mb.y, &grad);
            if (!std::isfinite(loss)) {
                std::ostringstream msg;
                msg << "training diverged: loss " << loss << " at epoch " << epoch << ", step " << steps + 1
                    << " (lr " << hyper.lr << ", batch " << hyper.batch << ")";
                throw DivergenceError(msg.str());
            }
            net.backward(grad);
            adam.step(net.weights(), net.grads());
            result.step_losses.push_back(loss);
            sum += loss * static_cast<double>(e - b);
            seen += e - b;
            ++steps;
        }
        const double val = evaluate_loss(net, val_set, hyper.batch);
        record({epoch, sum / static_cast<double>(seen), val, elapsed()});
        if (val_set.empty() || val < best) {
            best = val;
            result.best_epoch = epoch;
            result.weights = net.weights();
        }
    }
    return result;
}

TrainResult train(const DatasetManifest& manifest, const NetworkConfig& cfg, const TrainHyper& hyper) {
    return train(load_split(manifest, Split::train), load_split(manifest, Split::validation), cfg, hyper);
}

void write_loss_csv(const std::vector<EpochLog>& log, std::ostream& os) {
    os << "epoch,train_loss,val_loss,seconds\n";
    os.precision(9);
    for (const EpochLog& r : log) os << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.seconds << '\n';
}

void save_loss_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_loss_csv(log, os);
    if (!os) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace xray2vol::nn
