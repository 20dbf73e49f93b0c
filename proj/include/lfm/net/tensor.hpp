#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "lfm/errors.hpp"

namespace lfm::net {

/// Dense row-major tensor (last axis fastest) with an optional gradient
/// buffer of the same shape. Templated so the same layer code runs in
/// float for training and double for finite-difference checks.
template <typename T>
struct Tensor {
    std::vector<std::size_t> dims;
    std::vector<T> data;
    std::vector<T> grad;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> d) : dims(std::move(d)) {
        data.assign(numel(), T(0));
    }

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t d : dims) n *= d;
        return n;
    }

    void track() { grad.assign(data.size(), T(0)); }
    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }

    bool same_shape(const Tensor& o) const { return dims == o.dims; }
};

/// Mirror an index into [0, n) without repeating the border sample
/// (-1 -> 1, n -> n - 2). n = 1 collapses to 0.
inline std::size_t reflect_index(long i, long n) {
    if (n == 1) return 0;
    const long period = 2 * n - 2;
    i %= period;
    if (i < 0) i += period;
    if (i >= n) i = period - i;
    return static_cast<std::size_t>(i);
}

} // namespace lfm::net
