#pragma once

#include <string>
#include <vector>

#include "xray2vol/net/tensor.hpp"

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

enum class Mode { train, infer };

inline constexpr real kBatchNormEpsilon = static_cast<real>(1e-5);
/// Fraction of the running statistic kept per update.
inline constexpr real kBatchNormMomentum = static_cast<real>(0.9);

inline int conv_out_size(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }
inline int deconv_out_size(int in, int k, int stride, int pad) { return (in - 1) * stride - 2 * pad + k; }

// ---- functional kernels (im2col + GEMM, parallel over batch items) ----

/// Cross-correlation with zero padding. kernel: (cout, cin, k, k); bias: (cout) or null.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad);
/// Accumulates into dkernel / dbias; writes dx when non-null.
void conv2d_backward(const Tensor& x, const Tensor& kernel, int stride, int pad, const Tensor& dy, Tensor* dx,
                     Tensor& dkernel, Tensor* dbias);

/// Transposed convolution, the adjoint of conv2d with the same geometry.
/// kernel: (cin, cout, k, k); output size (in - 1) * stride - 2 * pad + k.
Tensor deconv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad);
void deconv2d_backward(const Tensor& x, const Tensor& kernel, int stride, int pad, const Tensor& dy, Tensor* dx,
                       Tensor& dkernel, Tensor* dbias);

struct BatchNormCache {
    Tensor xhat;
    std::vector<real> inv_std;
};

/// Per-channel normalization over (batch, height, width). Training mode uses batch
/// statistics and folds them into the running ones; inference uses the running ones.
Tensor batchnorm(const Tensor& x, const Tensor& scale, const Tensor& shift, Tensor& running_mean, Tensor& running_var,
                 Mode mode, BatchNormCache* cache);
/// Training-mode backward pass.
Tensor batchnorm_backward(const Tensor& dy, const Tensor& scale, const BatchNormCache& cache, Tensor& dscale, Tensor& dshift);

Tensor relu(const Tensor& x);
/// Gradient through ReLU given its output.
Tensor relu_backward(const Tensor& y, const Tensor& dy);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels(const Tensor& d, int channels_a, Tensor& da, Tensor& db);

void add_inplace(Tensor& a, const Tensor& b);

namespace reference {
// Direct nested-loop forms, single threaded.
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad);
Tensor deconv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad);
}  // namespace reference

// ---- parameterised layers ----

struct ParamSpec {
    std::string name;
    std::vector<int> dims;
    enum class Init { he_normal, zeros, ones } init = Init::zeros;
    int fan_in = 1;
    bool trainable = true;
    double gain = 1.0;  ///< multiplies the he_normal standard deviation
};

struct NamedTensor {
    std::string name;
    Tensor value;
    friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

/// Resolves parameter names to storage once the network has allocated it.
class ParamBinder {
public:
    virtual ~ParamBinder() = default;
    virtual Tensor* value(const std::string& name) = 0;
    virtual Tensor* grad(const std::string& name) = 0;
};

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in, int out, int k, int stride, int pad);
    void declare(std::vector<ParamSpec>& specs) const;
    void bind(ParamBinder& b);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);
    int out_channels() const { return out_; }

private:
    std::string name_;
    int in_ = 0, out_ = 0, k_ = 3, stride_ = 1, pad_ = 1;
    Tensor *kernel_ = nullptr, *bias_ = nullptr, *dkernel_ = nullptr, *dbias_ = nullptr;
    Tensor x_;
};

class Deconv2d {
public:
    Deconv2d() = default;
    Deconv2d(std::string name, int in, int out, int k = 4, int stride = 2, int pad = 1);
    void declare(std::vector<ParamSpec>& specs) const;
    void bind(ParamBinder& b);
    Tensor forward(const Tensor& x);
    Tensor backward(const Tensor& dy);

private:
    std::string name_;
    int in_ = 0, out_ = 0, k_ = 4, stride_ = 2, pad_ = 1;
    Tensor *kernel_ = nullptr, *bias_ = nullptr, *dkernel_ = nullptr, *dbias_ = nullptr;
    Tensor x_;
};

class BatchNorm {
public:
    BatchNorm() = default;
    BatchNorm(std::string name, int channels);
    void declare(std::vector<ParamSpec>& specs) const;
    void bind(ParamBinder& b);
    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& dy);

private:
    std::string name_;
    int channels_ = 0;
    Tensor *scale_ = nullptr, *shift_ = nullptr, *mean_ = nullptr, *var_ = nullptr;
    Tensor *dscale_ = nullptr, *dshift_ = nullptr;
    BatchNormCache cache_;
};

/// conv -> batch norm -> ReLU.
class BasicBlock {
public:
    BasicBlock() = default;
    BasicBlock(const std::string& name, int in, int out, int k = 3, int stride = 1);
    void declare(std::vector<ParamSpec>& specs) const;
    void bind(ParamBinder& b);
    Tensor forward(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& dy);

private:
    Conv2d conv_;
    BatchNorm bn_;
    Tensor y_;
};

/// Three basic blocks plus an identity shortcut: y = blocks(x) + x.
class Residual3Block {
public:
    Residual3Block() = default;
    Residual3Block(const std::string& name, int channels);
    void declare(std::vector<ParamSpec>& specs) const;
    void bind(ParamBinder& b);
    Tensor forward(const Tensor& x, Mode mode);
    /// blocks(x) alone, without the shortcut.
    Tensor forward_branch(const Tensor& x, Mode mode);
    Tensor backward(const Tensor& dy);

private:
    int channels_ = 0;
    BasicBlock blocks_[3];
};

}  // namespace xray2vol::nn
