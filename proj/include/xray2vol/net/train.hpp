#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <vector>

#include "xray2vol/dataset.hpp"
#include "xray2vol/net/network.hpp"

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

struct EpochLog {
    int epoch = 0;  ///< 0 is the untrained network
    double train_loss = 0;
    double val_loss = 0;
    double seconds = 0;
};

struct TrainHyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int batch = 16;
    int epochs = 30;
    /// When positive, run exactly this many minibatch steps instead of whole epochs.
    long iterations = 0;
    std::uint64_t seed = 1;
    std::function<void(const EpochLog&)> on_epoch;

    void validate() const;
};

struct TrainResult {
    NetworkWeights weights;  ///< best validation loss (last weights when there is no validation set)
    std::vector<EpochLog> log;
    std::vector<double> step_losses;  ///< training-mode loss of every minibatch
    int best_epoch = 0;
};

class Adam {
public:
    Adam(const std::vector<ParamSpec>& specs, const TrainHyper& h);
    void step(NetworkWeights& w, const NetworkWeights& g);

private:
    std::vector<bool> trainable_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
};

/// Mean per-voxel L2 over a set, in inference mode.
double evaluate_loss(Network& net, const std::vector<SamplePair>& set, int batch);

TrainResult train(const std::vector<SamplePair>& train_set, const std::vector<SamplePair>& val_set, const NetworkConfig& cfg,
                  const TrainHyper& hyper);
TrainResult train(const DatasetManifest& manifest, const NetworkConfig& cfg, const TrainHyper& hyper);

/// CSV: epoch,train_loss,val_loss,seconds
void write_loss_csv(const std::vector<EpochLog>& log, std::ostream& os);
void save_loss_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

}  // namespace xray2vol::nn
