#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "xray2vol/image.hpp"
#include "xray2vol/net/layers.hpp"
#include "xray2vol/net/tensor.hpp"
#include "xray2vol/volume.hpp"

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

struct NetworkConfig {
    int input_size = 64;
    int min_resolution = 8;
    int base_channels = 32;
    int out_depth = 32;
    int blocks_per_stage = 3;

    static NetworkConfig canonical() { return {256, 8, 256, 128, 3}; }
    static NetworkConfig desk() { return {64, 8, 32, 32, 3}; }

    void validate() const;
    int output_size() const { return input_size / 2; }
    /// Channels at encoder level l (level 0 is full resolution): 16 doubling per level,
    /// capped at base_channels.
    int channels_at(int level) const;
    /// Number of stride-2 stages from input_size down to min_resolution.
    int levels() const;
    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Named parameter and running-statistic tensors in topology order.
struct NetworkWeights {
    std::vector<NamedTensor> tensors;

    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;
    friend bool operator==(const NetworkWeights&, const NetworkWeights&) = default;
};

/// Encoder-decoder with skip connections and residual blocks; output depth is encoded as
/// the channels of the last layer.
///
///   stem:    blocks_per_stage basic blocks at full resolution (1 -> 16 channels)
///   encoder: [stride-2 basic block, residual block] until min_resolution
///   decoder: [4x4 stride-2 deconv, concat encoder skip, 1x1 basic block, residual block]
///            back up to input_size / 2
///   head:    residual block, 1x1 conv to out_depth channels, no activation
class Network {
public:
    explicit Network(NetworkConfig cfg);
    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    ~Network();

    const NetworkConfig& config() const noexcept { return cfg_; }
    const std::vector<ParamSpec>& topology() const noexcept { return specs_; }

    /// He-normal kernels, zero biases, unit BN scale.
    void initialize(std::uint64_t seed);

    NetworkWeights& weights() noexcept { return weights_; }
    const NetworkWeights& weights() const noexcept { return weights_; }
    NetworkWeights& grads() noexcept { return grads_; }
    /// Replaces the weights after checking names and dims against the topology.
    /// Throws TopologyError naming the first mismatching tensor.
    void set_weights(const NetworkWeights& w);
    void zero_grads();

    /// x: (batch, 1, input_size, input_size) -> (batch, out_depth, input_size/2, input_size/2)
    Tensor forward(const Tensor& x, Mode mode);
    /// Backpropagates d(loss)/d(output) from the last training-mode forward; accumulates
    /// parameter gradients and returns d(loss)/d(input).
    Tensor backward(const Tensor& dy);

private:
    struct Layers;
    NetworkConfig cfg_;
    std::vector<ParamSpec> specs_;
    NetworkWeights weights_;
    NetworkWeights grads_;
    std::unique_ptr<Layers> layers_;
};

/// Checks weights against cfg's topology (TopologyError naming the first offending tensor).
void check_topology(const NetworkConfig& cfg, const NetworkWeights& w);

/// Stacks x-ray images into a (batch, 1, h, w) tensor.
Tensor images_to_tensor(const std::vector<const Image*>& images);
/// Stacks volumes into (batch, nz, ny, nx): depth becomes channels.
Tensor volumes_to_tensor(const std::vector<const Volume*>& volumes);
/// One batch item as a volume (channels become depth), unclamped.
Volume tensor_to_volume(const Tensor& t, int item);

/// Single-image inference (or a training-mode pass, which uses batch statistics of the
/// one image). Output is clamped to [0,1] for export.
Volume network_forward(const Image& image, const NetworkConfig& cfg, const NetworkWeights& weights, Mode mode);

/// Mean squared per-element difference; grad (if non-null) receives 2 (p - t) / N.
double loss_l2(const Tensor& prediction, const Tensor& target, Tensor* grad);
double loss_l2(const Volume& prediction, const Volume& target);

/// XNNW weights file. A "meta.config" tensor carries the NetworkConfig.
void save_weights(const NetworkConfig& cfg, const NetworkWeights& w, const std::filesystem::path& path);
void write_weights(const NetworkConfig& cfg, const NetworkWeights& w, std::ostream& os);
struct LoadedWeights {
    NetworkConfig config;
    NetworkWeights weights;
};
/// Reads and validates against the config stored in the file.
LoadedWeights load_weights(const std::filesystem::path& path);
LoadedWeights read_weights(std::istream& is);
/// Reads and validates against an expected config.
NetworkWeights load_weights(const std::filesystem::path& path, const NetworkConfig& expected);

}  // namespace xray2vol::nn
