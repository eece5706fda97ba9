#include "xray2vol/net/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "xray2vol/error.hpp"

namespace xray2vol::nn::inline XRAY2VOL_NN_PRECISION {

namespace {
std::size_t product(const std::vector<int>& dims) {
    if (dims.empty() || dims.size() > 4) throw InvalidInput("tensor rank must be 1..4");
    std::size_t p = 1;
    for (int d : dims) {
        if (d < 0) throw InvalidInput("tensor dims must be non-negative");
        p *= static_cast<std::size_t>(d);
    }
    return p;
}
}  // namespace

Tensor::Tensor(std::vector<int> dims, real fill) : dims_(std::move(dims)) { data_.assign(product(dims_), fill); }

Tensor::Tensor(std::vector<int> dims, std::vector<real> data) : dims_(std::move(dims)), data_(std::move(data)) {
    if (data_.size() != product(dims_)) throw InvalidInput("tensor data length does not match dims " + dims_string(dims_));
}

void Tensor::fill(real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](real v) { return std::isfinite(v); });
}

std::string dims_string(const std::vector<int>& dims) {
    std::string s = "(";
    for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
    return s + ")";
}

}  // namespace xray2vol::nn
