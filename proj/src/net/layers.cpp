#include "xray2vol/net/layers.hpp"

#include <Eigen/Core>
#include <cmath>

#include "xray2vol/error.hpp"

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

namespace {

using MatR = Eigen::Matrix<real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void require_rank4(const Tensor& t, const char* what) {
    if (t.rank() != 4) throw InvalidInput(std::string(what) + ": expected a rank-4 tensor, got " + dims_string(t.dims()));
}

/// col[(c*k + ky)*k + kx][oy*wo + ox] = img[c][oy*s - p + ky][ox*s - p + kx]
void im2col(const real* img, int channels, int h, int w, int k, int s, int p, int ho, int wo, real* col) {
    const std::size_t hw_out = static_cast<std::size_t>(ho) * wo;
    for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                real* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw_out;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * s - p + ky;
                    real* dst = row + static_cast<std::size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + wo, real(0));
                        continue;
                    }
                    const real* src = img + (static_cast<std::size_t>(c) * h + iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * s - p + kx;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : real(0);
                    }
                }
            }
}

/// Adjoint of im2col: accumulates columns back into the image.
void col2im(const real* col, int channels, int h, int w, int k, int s, int p, int ho, int wo, real* img) {
    const std::size_t hw_out = static_cast<std::size_t>(ho) * wo;
    for (int c = 0; c < channels; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const real* row = col + ((static_cast<std::size_t>(c) * k + ky) * k + kx) * hw_out;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * s - p + ky;
                    if (iy < 0 || iy >= h) continue;
                    real* dst = img + (static_cast<std::size_t>(c) * h + iy) * w;
                    const real* src = row + static_cast<std::size_t>(oy) * wo;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * s - p + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
}

bool is_pointwise(int k, int s, int p) { return k == 1 && s == 1 && p == 0; }

void check_conv_args(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad, const char* what,
                     int kernel_in_axis) {
    require_rank4(x, what);
    require_rank4(kernel, what);
    if (kernel.dim(2) != kernel.dim(3)) throw InvalidInput(std::string(what) + ": kernel must be square");
    if (stride < 1 || pad < 0) throw InvalidInput(std::string(what) + ": stride >= 1 and pad >= 0 required");
    if (kernel.dim(kernel_in_axis) != x.c())
        throw InvalidInput(std::string(what) + ": channel mismatch, input has " + std::to_string(x.c()) +
                           " channels but kernel expects " + std::to_string(kernel.dim(kernel_in_axis)));
    const int out_c = kernel.dim(1 - kernel_in_axis);
    if (bias && (bias->rank() != 1 || bias->dim(0) != out_c)) throw InvalidInput(std::string(what) + ": bias shape mismatch");
}

void add_bias(real* y, const Tensor* bias, int channels, std::size_t plane) {
    if (!bias) return;
    for (int c = 0; c < channels; ++c) {
        const real b = (*bias)[static_cast<std::size_t>(c)];
        real* row = y + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) row[i] += b;
    }
}

void accumulate_bias_grad(const Tensor& dy, Tensor* dbias) {
    if (!dbias) return;
    const std::size_t plane = dy.plane();
    for (int n = 0; n < dy.n(); ++n)
        for (int c = 0; c < dy.c(); ++c) {
            const real* row = dy.item(n) + static_cast<std::size_t>(c) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += row[i];
            (*dbias)[static_cast<std::size_t>(c)] += static_cast<real>(acc);
        }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad) {
    check_conv_args(x, kernel, bias, stride, pad, "conv2d", 1);
    const int cout = kernel.dim(0), cin = kernel.dim(1), k = kernel.dim(2);
    const int ho = conv_out_size(x.h(), k, stride, pad), wo = conv_out_size(x.w(), k, stride, pad);
    if (ho < 1 || wo < 1) throw InvalidInput("conv2d: output would be empty");
    Tensor y = Tensor::nchw(x.n(), cout, ho, wo);
    const int K = cin * k * k;
    const std::size_t hw = static_cast<std::size_t>(ho) * wo;
    CMapR wm(kernel.raw(), cout, K);
    const bool pointwise = is_pointwise(k, stride, pad);
#pragma omp parallel
    {
        std::vector<real> col(pointwise ? 0 : static_cast<std::size_t>(K) * hw);
#pragma omp for
        for (int n = 0; n < x.n(); ++n) {
            const real* cptr = x.item(n);
            if (!pointwise) {
                im2col(x.item(n), cin, x.h(), x.w(), k, stride, pad, ho, wo, col.data());
                cptr = col.data();
            }
            MapR ym(y.item(n), cout, static_cast<Eigen::Index>(hw));
            ym.noalias() = wm * CMapR(cptr, K, static_cast<Eigen::Index>(hw));
            add_bias(y.item(n), bias, cout, hw);
        }
    }
    return y;
}

void conv2d_backward(const Tensor& x, const Tensor& kernel, int stride, int pad, const Tensor& dy, Tensor* dx,
                     Tensor& dkernel, Tensor* dbias) {
    check_conv_args(x, kernel, nullptr, stride, pad, "conv2d_backward", 1);
    const int cout = kernel.dim(0), cin = kernel.dim(1), k = kernel.dim(2);
    const int ho = dy.h(), wo = dy.w();
    const int K = cin * k * k;
    const std::size_t hw = static_cast<std::size_t>(ho) * wo;
    if (dx) *dx = Tensor::nchw(x.n(), x.c(), x.h(), x.w());
    CMapR wm(kernel.raw(), cout, K);
    MapR dwm(dkernel.raw(), cout, K);
    const bool pointwise = is_pointwise(k, stride, pad);
    std::vector<real> col(pointwise ? 0 : static_cast<std::size_t>(K) * hw);
    std::vector<real> dcol(static_cast<std::size_t>(K) * hw);
    // Sequential over the batch: the kernel gradient is a shared accumulator and the
    // GEMMs below are large enough to carry the work.
    for (int n = 0; n < x.n(); ++n) {
        const real* cptr = x.item(n);
        if (!pointwise) {
            im2col(x.item(n), cin, x.h(), x.w(), k, stride, pad, ho, wo, col.data());
            cptr = col.data();
        }
        CMapR dym(dy.item(n), cout, static_cast<Eigen::Index>(hw));
        dwm.noalias() += dym * CMapR(cptr, K, static_cast<Eigen::Index>(hw)).transpose();
        if (dx) {
            if (pointwise) {
                MapR(dx->item(n), K, static_cast<Eigen::Index>(hw)).noalias() = wm.transpose() * dym;
            } else {
                MapR(dcol.data(), K, static_cast<Eigen::Index>(hw)).noalias() = wm.transpose() * dym;
                col2im(dcol.data(), cin, x.h(), x.w(), k, stride, pad, ho, wo, dx->item(n));
            }
        }
    }
    accumulate_bias_grad(dy, dbias);
}

Tensor deconv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad) {
    check_conv_args(x, kernel, bias, stride, pad, "deconv2d", 0);
    const int cin = kernel.dim(0), cout = kernel.dim(1), k = kernel.dim(2);
    const int ho = deconv_out_size(x.h(), k, stride, pad), wo = deconv_out_size(x.w(), k, stride, pad);
    if (ho < 1 || wo < 1) throw InvalidInput("deconv2d: output would be empty");
    if (conv_out_size(ho, k, stride, pad) != x.h() || conv_out_size(wo, k, stride, pad) != x.w())
        throw InvalidInput("deconv2d: geometry is not invertible for this input size");
    Tensor y = Tensor::nchw(x.n(), cout, ho, wo);
    const int K = cout * k * k;
    const std::size_t hw_in = x.plane();
    CMapR wm(kernel.raw(), cin, K);
#pragma omp parallel
    {
        std::vector<real> col(static_cast<std::size_t>(K) * hw_in);
#pragma omp for
        for (int n = 0; n < x.n(); ++n) {
            MapR(col.data(), K, static_cast<Eigen::Index>(hw_in)).noalias() =
                wm.transpose() * CMapR(x.item(n), cin, static_cast<Eigen::Index>(hw_in));
            col2im(col.data(), cout, ho, wo, k, stride, pad, x.h(), x.w(), y.item(n));
            add_bias(y.item(n), bias, cout, y.plane());
        }
    }
    return y;
}

void deconv2d_backward(const Tensor& x, const Tensor& kernel, int stride, int pad, const Tensor& dy, Tensor* dx,
                       Tensor& dkernel, Tensor* dbias) {
    check_conv_args(x, kernel, nullptr, stride, pad, "deconv2d_backward", 0);
    const int cin = kernel.dim(0), cout = kernel.dim(1), k = kernel.dim(2);
    const int K = cout * k * k;
    const std::size_t hw_in = x.plane();
    if (dx) *dx = Tensor::nchw(x.n(), x.c(), x.h(), x.w());
    CMapR wm(kernel.raw(), cin, K);
    MapR dwm(dkernel.raw(), cin, K);
    std::vector<real> col(static_cast<std::size_t>(K) * hw_in);
    for (int n = 0; n < x.n(); ++n) {
        im2col(dy.item(n), cout, dy.h(), dy.w(), k, stride, pad, x.h(), x.w(), col.data());
        CMapR colm(col.data(), K, static_cast<Eigen::Index>(hw_in));
        CMapR xm(x.item(n), cin, static_cast<Eigen::Index>(hw_in));
        dwm.noalias() += xm * colm.transpose();
        if (dx) MapR(dx->item(n), cin, static_cast<Eigen::Index>(hw_in)).noalias() = wm * colm;
    }
    accumulate_bias_grad(dy, dbias);
}

Tensor batchnorm(const Tensor& x, const Tensor& scale, const Tensor& shift, Tensor& running_mean, Tensor& running_var,
                 Mode mode, BatchNormCache* cache) {
    require_rank4(x, "batchnorm");
    if (x.n() == 0) throw InvalidInput("batchnorm: batch size must be >= 1");
    const int C = x.c();
    if (scale.size() != static_cast<std::size_t>(C) || shift.size() != static_cast<std::size_t>(C))
        throw InvalidInput("batchnorm: parameter size does not match channel count");
    const std::size_t plane = x.plane();
    const double m = static_cast<double>(x.n()) * plane;
    Tensor y = Tensor::nchw(x.n(), C, x.h(), x.w());
    if (cache) {
        cache->xhat = Tensor::nchw(x.n(), C, x.h(), x.w());
        cache->inv_std.assign(static_cast<std::size_t>(C), 0);
    }
#pragma omp parallel for
    for (int c = 0; c < C; ++c) {
        double mean, var;
        if (mode == Mode::train) {
            double s = 0.0;
            for (int n = 0; n < x.n(); ++n) {
                const real* p = x.item(n) + static_cast<std::size_t>(c) * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            mean = s / m;
            double ss = 0.0;
            for (int n = 0; n < x.n(); ++n) {
                const real* p = x.item(n) + static_cast<std::size_t>(c) * plane;
                for (std::size_t i = 0; i < plane; ++i) ss += (p[i] - mean) * (p[i] - mean);
            }
            var = ss / m;
            const double unbiased = m > 1 ? var * m / (m - 1) : var;
            running_mean[static_cast<std::size_t>(c)] =
                static_cast<real>(kBatchNormMomentum * running_mean[static_cast<std::size_t>(c)] + (1 - kBatchNormMomentum) * mean);
            running_var[static_cast<std::size_t>(c)] =
                static_cast<real>(kBatchNormMomentum * running_var[static_cast<std::size_t>(c)] + (1 - kBatchNormMomentum) * unbiased);
        } else {
            mean = running_mean[static_cast<std::size_t>(c)];
            var = running_var[static_cast<std::size_t>(c)];
        }
        const double inv_std = 1.0 / std::sqrt(var + kBatchNormEpsilon);
        const double g = scale[static_cast<std::size_t>(c)], b = shift[static_cast<std::size_t>(c)];
        if (cache) cache->inv_std[static_cast<std::size_t>(c)] = static_cast<real>(inv_std);
        for (int n = 0; n < x.n(); ++n) {
            const std::size_t off = static_cast<std::size_t>(n) * C * plane + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xh = (x.raw()[off + i] - mean) * inv_std;
                if (cache) cache->xhat.raw()[off + i] = static_cast<real>(xh);
                y.raw()[off + i] = static_cast<real>(g * xh + b);
            }
        }
    }
    return y;
}

Tensor batchnorm_backward(const Tensor& dy, const Tensor& scale, const BatchNormCache& cache, Tensor& dscale, Tensor& dshift) {
    const int C = dy.c();
    const std::size_t plane = dy.plane();
    const double m = static_cast<double>(dy.n()) * plane;
    Tensor dx = Tensor::nchw(dy.n(), C, dy.h(), dy.w());
#pragma omp parallel for
    for (int c = 0; c < C; ++c) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < dy.n(); ++n) {
            const std::size_t off = static_cast<std::size_t>(n) * C * plane + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy.raw()[off + i];
                sum_dy_xhat += dy.raw()[off + i] * static_cast<double>(cache.xhat.raw()[off + i]);
            }
        }
        dscale[static_cast<std::size_t>(c)] += static_cast<real>(sum_dy_xhat);
        dshift[static_cast<std::size_t>(c)] += static_cast<real>(sum_dy);
        const double g = scale[static_cast<std::size_t>(c)];
        const double k = g * cache.inv_std[static_cast<std::size_t>(c)] / m;
        for (int n = 0; n < dy.n(); ++n) {
            const std::size_t off = static_cast<std::size_t>(n) * C * plane + static_cast<std::size_t>(c) * plane;
            for (std::size_t i = 0; i < plane; ++i)
                dx.raw()[off + i] = static_cast<real>(k * (m * dy.raw()[off + i] - sum_dy - cache.xhat.raw()[off + i] * sum_dy_xhat));
        }
    }
    return dx;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (real& v : y.data()) v = v > 0 ? v : real(0);
    return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.size(); ++i)
        if (!(y[i] > 0)) dx[i] = 0;
    return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_rank4(a, "concat");
    require_rank4(b, "concat");
    if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
        throw InvalidInput("concat: shape mismatch " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
    Tensor y = Tensor::nchw(a.n(), a.c() + b.c(), a.h(), a.w());
    const std::size_t sa = a.c() * a.plane(), sb = b.c() * b.plane();
    for (int n = 0; n < a.n(); ++n) {
        std::copy(a.item(n), a.item(n) + sa, y.item(n));
        std::copy(b.item(n), b.item(n) + sb, y.item(n) + sa);
    }
    return y;
}

void split_channels(const Tensor& d, int channels_a, Tensor& da, Tensor& db) {
    const int cb = d.c() - channels_a;
    da = Tensor::nchw(d.n(), channels_a, d.h(), d.w());
    db = Tensor::nchw(d.n(), cb, d.h(), d.w());
    const std::size_t sa = channels_a * d.plane(), sb = cb * d.plane();
    for (int n = 0; n < d.n(); ++n) {
        std::copy(d.item(n), d.item(n) + sa, da.item(n));
        std::copy(d.item(n) + sa, d.item(n) + sa + sb, db.item(n));
    }
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (a.dims() != b.dims())
        throw InvalidInput("residual shortcut shape mismatch " + dims_string(a.dims()) + " vs " + dims_string(b.dims()));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

// ---- reference kernels ----

Tensor reference::conv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad) {
    check_conv_args(x, kernel, bias, stride, pad, "conv2d", 1);
    const int cout = kernel.dim(0), cin = kernel.dim(1), k = kernel.dim(2);
    const int ho = conv_out_size(x.h(), k, stride, pad), wo = conv_out_size(x.w(), k, stride, pad);
    Tensor y = Tensor::nchw(x.n(), cout, ho, wo);
    for (int n = 0; n < x.n(); ++n)
        for (int o = 0; o < cout; ++o)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double acc = bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0;
                    for (int c = 0; c < cin; ++c)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= x.h() || ix < 0 || ix >= x.w()) continue;
                                acc += static_cast<double>(kernel.at(o, c, ky, kx)) * x.at(n, c, iy, ix);
                            }
                    y.at(n, o, oy, ox) = static_cast<real>(acc);
                }
    return y;
}

Tensor reference::deconv2d(const Tensor& x, const Tensor& kernel, const Tensor* bias, int stride, int pad) {
    check_conv_args(x, kernel, bias, stride, pad, "deconv2d", 0);
    const int cin = kernel.dim(0), cout = kernel.dim(1), k = kernel.dim(2);
    const int ho = deconv_out_size(x.h(), k, stride, pad), wo = deconv_out_size(x.w(), k, stride, pad);
    std::vector<double> acc(static_cast<std::size_t>(x.n()) * cout * ho * wo, 0.0);
    auto idx = [&](int n, int o, int y, int xx) { return ((static_cast<std::size_t>(n) * cout + o) * ho + y) * wo + xx; };
    // Scatter every input pixel through the kernel.
    for (int n = 0; n < x.n(); ++n)
        for (int c = 0; c < cin; ++c)
            for (int iy = 0; iy < x.h(); ++iy)
                for (int ix = 0; ix < x.w(); ++ix)
                    for (int o = 0; o < cout; ++o)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                int oy = iy * stride - pad + ky, ox = ix * stride - pad + kx;
                                if (oy < 0 || oy >= ho || ox < 0 || ox >= wo) continue;
                                acc[idx(n, o, oy, ox)] += static_cast<double>(x.at(n, c, iy, ix)) * kernel.at(c, o, ky, kx);
                            }
    Tensor y = Tensor::nchw(x.n(), cout, ho, wo);
    for (int n = 0; n < x.n(); ++n)
        for (int o = 0; o < cout; ++o)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox)
                    y.at(n, o, oy, ox) = static_cast<real>(acc[idx(n, o, oy, ox)] + (bias ? (*bias)[static_cast<std::size_t>(o)] : 0.0));
    return y;
}

// ---- layers ----

Conv2d::Conv2d(std::string name, int in, int out, int k, int stride, int pad)
    : name_(std::move(name)), in_(in), out_(out), k_(k), stride_(stride), pad_(pad) {
    if (k % 2 == 0) throw InvalidInput("conv2d: kernel size must be odd");
    if (stride != 1 && stride != 2) throw InvalidInput("conv2d: stride must be 1 or 2");
}

void Conv2d::declare(std::vector<ParamSpec>& specs) const {
    specs.push_back({name_ + ".kernel", {out_, in_, k_, k_}, ParamSpec::Init::he_normal, in_ * k_ * k_, true});
    specs.push_back({name_ + ".bias", {out_}, ParamSpec::Init::zeros, 1, true});
}

void Conv2d::bind(ParamBinder& b) {
    kernel_ = b.value(name_ + ".kernel");
    bias_ = b.value(name_ + ".bias");
    dkernel_ = b.grad(name_ + ".kernel");
    dbias_ = b.grad(name_ + ".bias");
}

Tensor Conv2d::forward(const Tensor& x) {
    x_ = x;
    return conv2d(x, *kernel_, bias_, stride_, pad_);
}

Tensor Conv2d::backward(const Tensor& dy) {
    Tensor dx;
    conv2d_backward(x_, *kernel_, stride_, pad_, dy, &dx, *dkernel_, dbias_);
    return dx;
}

Deconv2d::Deconv2d(std::string name, int in, int out, int k, int stride, int pad)
    : name_(std::move(name)), in_(in), out_(out), k_(k), stride_(stride), pad_(pad) {}

void Deconv2d::declare(std::vector<ParamSpec>& specs) const {
    // Each output pixel receives (k / stride)^2 taps per input channel.
    const int fan_in = std::max(1, in_ * (k_ / stride_) * (k_ / stride_));
    specs.push_back({name_ + ".kernel", {in_, out_, k_, k_}, ParamSpec::Init::he_normal, fan_in, true});
    specs.push_back({name_ + ".bias", {out_}, ParamSpec::Init::zeros, 1, true});
}

void Deconv2d::bind(ParamBinder& b) {
    kernel_ = b.value(name_ + ".kernel");
    bias_ = b.value(name_ + ".bias");
    dkernel_ = b.grad(name_ + ".kernel");
    dbias_ = b.grad(name_ + ".bias");
}

Tensor Deconv2d::forward(const Tensor& x) {
    x_ = x;
    return deconv2d(x, *kernel_, bias_, stride_, pad_);
}

Tensor Deconv2d::backward(const Tensor& dy) {
    Tensor dx;
    deconv2d_backward(x_, *kernel_, stride_, pad_, dy, &dx, *dkernel_, dbias_);
    return dx;
}

BatchNorm::BatchNorm(std::string name, int channels) : name_(std::move(name)), channels_(channels) {}

void BatchNorm::declare(std::vector<ParamSpec>& specs) const {
    specs.push_back({name_ + ".scale", {channels_}, ParamSpec::Init::ones, 1, true});
    specs.push_back({name_ + ".shift", {channels_}, ParamSpec::Init::zeros, 1, true});
    specs.push_back({name_ + ".running_mean", {channels_}, ParamSpec::Init::zeros, 1, false});
    specs.push_back({name_ + ".running_var", {channels_}, ParamSpec::Init::ones, 1, false});
}

void BatchNorm::bind(ParamBinder& b) {
    scale_ = b.value(name_ + ".scale");
    shift_ = b.value(name_ + ".shift");
    mean_ = b.value(name_ + ".running_mean");
    var_ = b.value(name_ + ".running_var");
    dscale_ = b.grad(name_ + ".scale");
    dshift_ = b.grad(name_ + ".shift");
}

Tensor BatchNorm::forward(const Tensor& x, Mode mode) {
    return batchnorm(x, *scale_, *shift_, *mean_, *var_, mode, mode == Mode::train ? &cache_ : nullptr);
}

Tensor BatchNorm::backward(const Tensor& dy) {
    if (cache_.xhat.empty()) throw InvalidInput("batchnorm backward requires a training-mode forward pass");
    return batchnorm_backward(dy, *scale_, cache_, *dscale_, *dshift_);
}

BasicBlock::BasicBlock(const std::string& name, int in, int out, int k, int stride)
    : conv_(name + ".conv", in, out, k, stride, k / 2), bn_(name + ".bn", out) {}

void BasicBlock::declare(std::vector<ParamSpec>& specs) const {
    conv_.declare(specs);
    bn_.declare(specs);
}

void BasicBlock::bind(ParamBinder& b) {
    conv_.bind(b);
    bn_.bind(b);
}

Tensor BasicBlock::forward(const Tensor& x, Mode mode) {
    y_ = relu(bn_.forward(conv_.forward(x), mode));
    return y_;
}

Tensor BasicBlock::backward(const Tensor& dy) { return conv_.backward(bn_.backward(relu_backward(y_, dy))); }

Residual3Block::Residual3Block(const std::string& name, int channels)
    : channels_(channels),
      blocks_{BasicBlock(name + ".b0", channels, channels), BasicBlock(name + ".b1", channels, channels),
              BasicBlock(name + ".b2", channels, channels)} {}

void Residual3Block::declare(std::vector<ParamSpec>& specs) const {
    for (const auto& b : blocks_) b.declare(specs);
}

void Residual3Block::bind(ParamBinder& b) {
    for (auto& blk : blocks_) blk.bind(b);
}

Tensor Residual3Block::forward_branch(const Tensor& x, Mode mode) {
    if (x.rank() != 4 || x.c() != channels_)
        throw InvalidInput("residual block expects " + std::to_string(channels_) + " channels, got " + dims_string(x.dims()));
    Tensor t = blocks_[0].forward(x, mode);
    t = blocks_[1].forward(t, mode);
    return blocks_[2].forward(t, mode);
}

Tensor Residual3Block::forward(const Tensor& x, Mode mode) {
    Tensor y = forward_branch(x, mode);
    add_inplace(y, x);
    return y;
}

Tensor Residual3Block::backward(const Tensor& dy) {
    Tensor d = blocks_[2].backward(dy);
    d = blocks_[1].backward(d);
    d = blocks_[0].backward(d);
    add_inplace(d, dy);
    return d;
}

}  // namespace xray2vol::nn
