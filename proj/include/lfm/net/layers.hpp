#pragma once

#include <cstddef>

#include "lfm/net/tensor.hpp"
#include "lfm/parallel.hpp"

namespace lfm::net {

/// Input stage: correlates a light field {1, A_x, A_y, S_x, S_y} with a
/// {nd, 3, 3, fov, fov} kernel bank. Angular axes are reflect-padded by 1
/// so A_x, A_y are preserved; spatial axes are valid, O = S - fov + 1.
template <typename T>
struct Conv4dInput {
    std::size_t nd = 0;
    std::size_t fov = 0;
    Tensor<T> w; // {nd, 3, 3, fov, fov}
    Tensor<T> b; // {nd}

    Conv4dInput() = default;
    Conv4dInput(std::size_t nd_, std::size_t fov_)
        : nd(nd_), fov(fov_), w({nd_, 3, 3, fov_, fov_}), b({nd_}) {
        w.track();
        b.track();
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        check_input(x);
        const long ax = static_cast<long>(x.dims[1]);
        const long ay = static_cast<long>(x.dims[2]);
        const std::size_t sx = x.dims[3], sy = x.dims[4];
        const std::size_t ox = sx - fov + 1, oy = sy - fov + 1;
        Tensor<T> y({nd, x.dims[1], x.dims[2], ox, oy});
        const std::size_t wstride_d = 3 * 3 * fov * fov;
        // one depth per task: every output element is written exactly once,
        // so the result does not depend on the worker count
        parallel_for(0, nd, [&](std::size_t d) {
            const T* wd = w.data.data() + d * wstride_d;
            for (long px = 0; px < ax; ++px)
                for (long py = 0; py < ay; ++py)
                    for (std::size_t i = 0; i < ox; ++i)
                        for (std::size_t j = 0; j < oy; ++j) {
                            T acc = b.data[d];
                            for (int ku = 0; ku < 3; ++ku) {
                                const std::size_t qx = reflect_index(px + ku - 1, ax);
                                for (int kv = 0; kv < 3; ++kv) {
                                    const std::size_t qy = reflect_index(py + kv - 1, ay);
                                    const T* xrow =
                                        x.data.data() +
                                        ((qx * ay + qy) * sx + i) * sy + j;
                                    const T* wrow =
                                        wd + (ku * 3 + kv) * fov * fov;
                                    for (std::size_t u = 0; u < fov; ++u)
                                        for (std::size_t v = 0; v < fov; ++v)
                                            acc += wrow[u * fov + v] *
                                                   xrow[u * sy + v];
                                }
                            }
                            y.data[((d * ax + px) * ay + py) * ox * oy +
                                   i * oy + j] = acc;
                        }
        });
        return y;
    }

    /// Accumulates w.grad / b.grad; writes input gradients into x_grad when
    /// non-null (same length as x.data, caller-zeroed).
    void backward(const Tensor<T>& x, const Tensor<T>& gy,
                  std::vector<T>* x_grad) {
        check_input(x);
        const long ax = static_cast<long>(x.dims[1]);
        const long ay = static_cast<long>(x.dims[2]);
        const std::size_t sx = x.dims[3], sy = x.dims[4];
        const std::size_t ox = sx - fov + 1, oy = sy - fov + 1;
        const std::size_t wstride_d = 3 * 3 * fov * fov;
        for (std::size_t d = 0; d < nd; ++d) {
            const T* wd = w.data.data() + d * wstride_d;
            T* wg = w.grad.data() + d * wstride_d;
            for (long px = 0; px < ax; ++px)
                for (long py = 0; py < ay; ++py)
                    for (std::size_t i = 0; i < ox; ++i)
                        for (std::size_t j = 0; j < oy; ++j) {
                            const T g =
                                gy.data[((d * ax + px) * ay + py) * ox * oy +
                                        i * oy + j];
                            if (g == T(0)) continue;
                            b.grad[d] += g;
                            for (int ku = 0; ku < 3; ++ku) {
                                const std::size_t qx = reflect_index(px + ku - 1, ax);
                                for (int kv = 0; kv < 3; ++kv) {
                                    const std::size_t qy = reflect_index(py + kv - 1, ay);
                                    const std::size_t xbase =
                                        ((qx * ay + qy) * sx + i) * sy + j;
                                    const std::size_t wbase =
                                        (ku * 3 + kv) * fov * fov;
                                    for (std::size_t u = 0; u < fov; ++u)
                                        for (std::size_t v = 0; v < fov; ++v) {
                                            const std::size_t xi =
                                                xbase + u * sy + v;
                                            wg[wbase + u * fov + v] +=
                                                g * x.data[xi];
                                            if (x_grad)
                                                (*x_grad)[xi] +=
                                                    g * wd[wbase + u * fov + v];
                                        }
                                }
                            }
                        }
        }
    }

private:
    void check_input(const Tensor<T>& x) const {
        if (x.dims.size() != 5 || x.dims[0] != 1)
            throw DimensionError("conv4d input must be {1, A_x, A_y, S_x, S_y}");
        if (x.dims[3] < fov || x.dims[4] < fov)
            throw DimensionError("conv4d input smaller than fov");
    }
};

/// 2D convolution with reflect padding (k - 1) / 2 on both axes. Stride 1
/// preserves the size; stride 2 yields ceil(H / 2) (the down-sampling op).
template <typename T>
struct Conv2d {
    std::size_t ci = 0, co = 0, k = 3, s = 1;
    Tensor<T> w; // {co, ci, k, k}
    Tensor<T> b; // {co}

    Conv2d() = default;
    Conv2d(std::size_t ci_, std::size_t co_, std::size_t k_, std::size_t s_)
        : ci(ci_), co(co_), k(k_), s(s_), w({co_, ci_, k_, k_}), b({co_}) {
        w.track();
        b.track();
    }

    std::size_t out_extent(std::size_t n) const {
        return (n + (k - 1) - k) / s + 1; // pad = (k - 1) / 2 per side
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        check_input(x);
        const long h = static_cast<long>(x.dims[1]);
        const long wd = static_cast<long>(x.dims[2]);
        const std::size_t oh = out_extent(x.dims[1]), ow = out_extent(x.dims[2]);
        const long p = static_cast<long>((k - 1) / 2);
        Tensor<T> y({co, oh, ow});
        // one output channel per task; disjoint writes keep the result
        // independent of the worker count
        parallel_for(0, co, [&](std::size_t o) {
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    T acc = b.data[o];
                    for (std::size_t c = 0; c < ci; ++c) {
                        const T* wrow = w.data.data() + (o * ci + c) * k * k;
                        const T* xc = x.data.data() + c * h * wd;
                        for (std::size_t u = 0; u < k; ++u) {
                            const std::size_t qi = reflect_index(
                                static_cast<long>(i * s + u) - p, h);
                            for (std::size_t v = 0; v < k; ++v) {
                                const std::size_t qj = reflect_index(
                                    static_cast<long>(j * s + v) - p, wd);
                                acc += wrow[u * k + v] * xc[qi * wd + qj];
                            }
                        }
                    }
                    y.data[(o * oh + i) * ow + j] = acc;
                }
        });
        return y;
    }

    void backward(const Tensor<T>& x, const Tensor<T>& gy,
                  std::vector<T>* x_grad) {
        check_input(x);
        const long h = static_cast<long>(x.dims[1]);
        const long wd = static_cast<long>(x.dims[2]);
        const std::size_t oh = out_extent(x.dims[1]), ow = out_extent(x.dims[2]);
        const long p = static_cast<long>((k - 1) / 2);
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    const T g = gy.data[(o * oh + i) * ow + j];
                    if (g == T(0)) continue;
                    b.grad[o] += g;
                    for (std::size_t c = 0; c < ci; ++c) {
                        const T* wrow = w.data.data() + (o * ci + c) * k * k;
                        T* wgrow = w.grad.data() + (o * ci + c) * k * k;
                        const std::size_t xoff = c * h * wd;
                        for (std::size_t u = 0; u < k; ++u) {
                            const std::size_t qi = reflect_index(
                                static_cast<long>(i * s + u) - p, h);
                            for (std::size_t v = 0; v < k; ++v) {
                                const std::size_t qj = reflect_index(
                                    static_cast<long>(j * s + v) - p, wd);
                                const std::size_t xi = xoff + qi * wd + qj;
                                wgrow[u * k + v] += g * x.data[xi];
                                if (x_grad)
                                    (*x_grad)[xi] += g * wrow[u * k + v];
                            }
                        }
                    }
                }
    }

private:
    void check_input(const Tensor<T>& x) const {
        if (x.dims.size() != 3 || x.dims[0] != ci)
            throw DimensionError("conv2d input channel mismatch");
    }
};

/// Transposed convolution, kernel 2, stride 2: exact doubling of both
/// axes. Every output pixel receives exactly one tap per input channel.
template <typename T>
struct TConv2d {
    std::size_t ci = 0, co = 0;
    Tensor<T> w; // {ci, co, 2, 2}
    Tensor<T> b; // {co}

    TConv2d() = default;
    TConv2d(std::size_t ci_, std::size_t co_)
        : ci(ci_), co(co_), w({ci_, co_, 2, 2}), b({co_}) {
        w.track();
        b.track();
    }

    Tensor<T> forward(const Tensor<T>& x) const {
        check_input(x);
        const std::size_t h = x.dims[1], wd = x.dims[2];
        Tensor<T> y({co, 2 * h, 2 * wd});
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t pi = 0; pi < 2 * h; ++pi)
                for (std::size_t pj = 0; pj < 2 * wd; ++pj) {
                    const std::size_t u = pi & 1, v = pj & 1;
                    const std::size_t i = pi >> 1, j = pj >> 1;
                    T acc = b.data[o];
                    for (std::size_t c = 0; c < ci; ++c)
                        acc += w.data[((c * co + o) * 2 + u) * 2 + v] *
                               x.data[(c * h + i) * wd + j];
                    y.data[(o * 2 * h + pi) * 2 * wd + pj] = acc;
                }
        return y;
    }

    void backward(const Tensor<T>& x, const Tensor<T>& gy,
                  std::vector<T>* x_grad) {
        check_input(x);
        const std::size_t h = x.dims[1], wd = x.dims[2];
        for (std::size_t o = 0; o < co; ++o)
            for (std::size_t pi = 0; pi < 2 * h; ++pi)
                for (std::size_t pj = 0; pj < 2 * wd; ++pj) {
                    const T g = gy.data[(o * 2 * h + pi) * 2 * wd + pj];
                    if (g == T(0)) continue;
                    b.grad[o] += g;
                    const std::size_t u = pi & 1, v = pj & 1;
                    const std::size_t i = pi >> 1, j = pj >> 1;
                    for (std::size_t c = 0; c < ci; ++c) {
                        const std::size_t xi = (c * h + i) * wd + j;
                        w.grad[((c * co + o) * 2 + u) * 2 + v] +=
                            g * x.data[xi];
                        if (x_grad)
                            (*x_grad)[xi] +=
                                g * w.data[((c * co + o) * 2 + u) * 2 + v];
                    }
                }
    }

private:
    void check_input(const Tensor<T>& x) const {
        if (x.dims.size() != 3 || x.dims[0] != ci)
            throw DimensionError("tconv2d input channel mismatch");
    }
};

} // namespace lfm::net
