#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

// The double build (tests only) lives in its own inline namespace so both precisions can
// be linked into one binary.
#ifdef XRAY2VOL_NET_DOUBLE
#define XRAY2VOL_NN_PRECISION f64
#else
#define XRAY2VOL_NN_PRECISION f32
#endif

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

#ifdef XRAY2VOL_NET_DOUBLE
using real = double;
#else
using real = float;
#endif

/// Dense row-major tensor of rank 1..4. Activations are rank 4 (batch, channels,
/// height, width); parameters use whatever rank their role needs.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> dims, real fill = 0);
    Tensor(std::vector<int> dims, std::vector<real> data);
    static Tensor nchw(int n, int c, int h, int w, real fill = 0) { return Tensor({n, c, h, w}, fill); }

    const std::vector<int>& dims() const noexcept { return dims_; }
    int rank() const noexcept { return static_cast<int>(dims_.size()); }
    int dim(int i) const { return dims_.at(static_cast<std::size_t>(i)); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    // Rank-4 accessors.
    int n() const { return dims_[0]; }
    int c() const { return dims_[1]; }
    int h() const { return dims_[2]; }
    int w() const { return dims_[3]; }
    std::size_t plane() const { return static_cast<std::size_t>(dims_[2]) * dims_[3]; }
    real& at(int n, int c, int y, int x) { return data_[((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + y) * dims_[3] + x]; }
    real at(int n, int c, int y, int x) const {
        return data_[((static_cast<std::size_t>(n) * dims_[1] + c) * dims_[2] + y) * dims_[3] + x];
    }
    real* item(int n) { return data_.data() + static_cast<std::size_t>(n) * dims_[1] * plane(); }
    const real* item(int n) const { return data_.data() + static_cast<std::size_t>(n) * dims_[1] * plane(); }

    real* raw() noexcept { return data_.data(); }
    const real* raw() const noexcept { return data_.data(); }
    std::span<real> data() noexcept { return data_; }
    std::span<const real> data() const noexcept { return data_; }
    real& operator[](std::size_t i) { return data_[i]; }
    real operator[](std::size_t i) const { return data_[i]; }

    void fill(real v);
    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<int> dims_;
    std::vector<real> data_;
};

std::string dims_string(const std::vector<int>& dims);

}  // namespace xray2vol::nn
