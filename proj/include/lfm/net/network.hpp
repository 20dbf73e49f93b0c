#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lfm/net/layers.hpp"
#include "lfm/rng.hpp"

namespace lfm::net {

/// 2D-stage layer kinds. conv runs at stride 1 with kernel 1 or 3; down is
/// a stride-2 kernel-3 convolution; up is a stride-2 kernel-2 transposed
/// convolution cropped back to the matching encoder extent.
enum class LayerKind { conv4d, conv, down, up };

struct LayerDesc {
    LayerKind kind = LayerKind::conv;
    std::size_t in_ch = 0;
    std::size_t out_ch = 0;
    std::size_t k = 3;
    std::size_t s = 1;
};

struct NetworkSpec {
    std::size_t fov = 9;       // odd lenslet neighborhood reconstructed from
    std::size_t nd = 64;       // output depth planes (channel count in T2)
    std::size_t ax = 33;
    std::size_t ay = 33;
    enum class Variant { shallow, full };
    Variant variant = Variant::shallow;
    bool skip = false;         // concatenation skip connections
    std::vector<LayerDesc> layers; // 2D stage, applied after the T1->T2 reshape
    std::uint64_t seed = 1;

    void validate() const;
};

NetworkSpec spec_from_json(const nlohmann::json& j);
nlohmann::json spec_to_json(const NetworkSpec& spec);

/// Exact receptive field of a 2D stack in T2 pixels: backward interval
/// propagation per output phase, maximized over one stride period.
std::size_t receptive_field(const std::vector<LayerDesc>& layers);

/// Empirical cross-check: perturb input pixels one at a time on a 1-row
/// all-ones stack and measure the influence interval of an interior output
/// pixel, maximized over the stride period. Requires a resolution-
/// preserving (balanced) stack.
std::size_t measure_receptive_field(const std::vector<LayerDesc>& layers);

/// Reference layer layouts. base scales the channel widths; skip adjusts
/// decoder input channels for the concatenations.
/// Shallow reference: 2 down / 2 up, receptive field 19 (phase-uniform).
std::vector<LayerDesc> reference_shallow_layers(std::size_t nd, std::size_t base,
                                                bool skip);
/// Full reference: 4 down / 4 up, receptive field 101.
std::vector<LayerDesc> reference_full_layers(std::size_t nd, std::size_t base,
                                             bool skip);
/// Minimal 2 down / 2 up layout with receptive field 7; fits inside one
/// lenslet for small angular counts where the shallow reference does not.
std::vector<LayerDesc> compact_shallow_layers(std::size_t nd, std::size_t base,
                                              bool skip);

/// Lenslet-major reshape: T2 pixel (o_x*A_x + a_x, o_y*A_y + a_y) =
/// T1[a_x, a_y, o_x, o_y], so each lenslet owns one contiguous block.
template <typename T>
Tensor<T> t1_to_t2(const Tensor<T>& t1) {
    if (t1.dims.size() != 5)
        throw DimensionError("t1_to_t2 expects {nd, A_x, A_y, O_x, O_y}");
    const std::size_t nd = t1.dims[0], ax = t1.dims[1], ay = t1.dims[2];
    const std::size_t ox = t1.dims[3], oy = t1.dims[4];
    Tensor<T> t2({nd, ax * ox, ay * oy});
    const std::size_t h = ax * ox, w = ay * oy;
    for (std::size_t d = 0; d < nd; ++d)
        for (std::size_t px = 0; px < ax; ++px)
            for (std::size_t py = 0; py < ay; ++py)
                for (std::size_t i = 0; i < ox; ++i)
                    for (std::size_t j = 0; j < oy; ++j)
                        t2.data[(d * h + i * ax + px) * w + j * ay + py] =
                            t1.data[(((d * ax + px) * ay + py) * ox + i) * oy + j];
    return t2;
}

template <typename T>
Tensor<T> t2_to_t1(const Tensor<T>& t2, std::size_t ax, std::size_t ay) {
    if (t2.dims.size() != 3 || t2.dims[1] % ax != 0 || t2.dims[2] % ay != 0)
        throw DimensionError("t2_to_t1 extent not divisible by the angular count");
    const std::size_t nd = t2.dims[0];
    const std::size_t ox = t2.dims[1] / ax, oy = t2.dims[2] / ay;
    Tensor<T> t1({nd, ax, ay, ox, oy});
    const std::size_t h = t2.dims[1], w = t2.dims[2];
    for (std::size_t d = 0; d < nd; ++d)
        for (std::size_t px = 0; px < ax; ++px)
            for (std::size_t py = 0; py < ay; ++py)
                for (std::size_t i = 0; i < ox; ++i)
                    for (std::size_t j = 0; j < oy; ++j)
                        t1.data[(((d * ax + px) * ay + py) * ox + i) * oy + j] =
                            t2.data[(d * h + i * ax + px) * w + j * ay + py];
    return t1;
}

/// Reflect-pads the top/left borders only; used to align the stride grid
/// of a patch with the full frame before running the 2D stage.
template <typename T>
Tensor<T> reflect_pad_topleft(const Tensor<T>& x, std::size_t px, std::size_t py) {
    const std::size_t c = x.dims[0], h = x.dims[1], w = x.dims[2];
    Tensor<T> y({c, h + px, w + py});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h + px; ++i) {
            const std::size_t qi =
                reflect_index(static_cast<long>(i) - static_cast<long>(px),
                              static_cast<long>(h));
            for (std::size_t j = 0; j < w + py; ++j) {
                const std::size_t qj =
                    reflect_index(static_cast<long>(j) - static_cast<long>(py),
                                  static_cast<long>(w));
                y.data[(ch * (h + px) + i) * (w + py) + j] =
                    x.data[(ch * h + qi) * w + qj];
            }
        }
    return y;
}

template <typename T>
Tensor<T> crop_topleft(const Tensor<T>& x, std::size_t px, std::size_t py) {
    const std::size_t c = x.dims[0], h = x.dims[1], w = x.dims[2];
    Tensor<T> y({c, h - px, w - py});
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t i = 0; i < h - px; ++i)
            for (std::size_t j = 0; j < w - py; ++j)
                y.data[(ch * (h - px) + i) * (w - py) + j] =
                    x.data[(ch * h + i + px) * w + j + py];
    return y;
}

/// The post-reshape 2D network. Encoder activations are recorded before
/// every down layer; each up layer crops its doubled output back to the
/// matching encoder extent (dropping the bottom/right overhang) and, with
/// skips enabled, concatenates the encoder activation onto its output.
template <typename T>
struct Stack2d {
    std::vector<LayerDesc> descs;
    bool skip = false;
    std::vector<Conv2d<T>> convs;
    std::vector<TConv2d<T>> tconvs;
    std::vector<int> slot;        // per desc: index into convs or tconvs
    std::vector<int> paired_down; // per desc: matching down index for ups, else -1

    struct Cache {
        std::vector<Tensor<T>> fed;  // tensor actually passed to each layer
        std::vector<Tensor<T>> out;  // per-layer output, post-crop post-ReLU
        std::vector<std::array<std::size_t, 2>> pre_crop; // up output before crop
    };

    void build(const std::vector<LayerDesc>& ds, bool with_skip) {
        descs = ds;
        skip = with_skip;
        convs.clear();
        tconvs.clear();
        slot.assign(descs.size(), -1);
        paired_down.assign(descs.size(), -1);
        std::vector<int> open_downs;
        std::size_t cur = descs.empty() ? 0 : descs.front().in_ch;
        for (std::size_t li = 0; li < descs.size(); ++li) {
            const LayerDesc& d = descs[li];
            if (d.in_ch != cur)
                throw ConfigError("layer " + std::to_string(li) +
                                  " input channels do not match the flow");
            switch (d.kind) {
            case LayerKind::conv:
                slot[li] = static_cast<int>(convs.size());
                convs.emplace_back(d.in_ch, d.out_ch, d.k, 1);
                break;
            case LayerKind::down:
                open_downs.push_back(static_cast<int>(li));
                slot[li] = static_cast<int>(convs.size());
                convs.emplace_back(d.in_ch, d.out_ch, 3, 2);
                break;
            case LayerKind::up:
                if (!open_downs.empty()) {
                    paired_down[li] = open_downs.back();
                    open_downs.pop_back();
                }
                slot[li] = static_cast<int>(tconvs.size());
                tconvs.emplace_back(d.in_ch, d.out_ch);
                break;
            case LayerKind::conv4d:
                throw ConfigError("conv4d belongs to the input stage, not the 2D stack");
            }
            cur = d.out_ch;
            if (d.kind == LayerKind::up && skip && paired_down[li] >= 0)
                cur += descs[static_cast<std::size_t>(paired_down[li])].in_ch;
        }
    }

    Tensor<T> forward(const Tensor<T>& x, Cache& cache) const {
        cache.fed.assign(descs.size(), Tensor<T>());
        cache.out.assign(descs.size(), Tensor<T>());
        cache.pre_crop.assign(descs.size(), {0, 0});
        std::vector<std::array<std::size_t, 2>> size_stack;
        Tensor<T> cur = x;
        for (std::size_t li = 0; li < descs.size(); ++li) {
            const LayerDesc& d = descs[li];
            cache.fed[li] = cur;
            Tensor<T> y;
            if (d.kind == LayerKind::up) {
                y = tconvs[slot[li]].forward(cur);
                cache.pre_crop[li] = {y.dims[1], y.dims[2]};
                if (!size_stack.empty()) {
                    const auto target = size_stack.back();
                    size_stack.pop_back();
                    if (target[0] != y.dims[1] || target[1] != y.dims[2])
                        y = crop_to(y, target[0], target[1]);
                }
            } else {
                if (d.kind == LayerKind::down)
                    size_stack.push_back({cur.dims[1], cur.dims[2]});
                y = convs[slot[li]].forward(cur);
            }
            for (T& v : y.data)
                if (v < T(0)) v = T(0); // ReLU; the final layer's clamp at zero
            cache.out[li] = y;
            cur = y;
            if (d.kind == LayerKind::up && skip && paired_down[li] >= 0)
                cur = concat_channels(y, cache.fed[paired_down[li]]);
        }
        return cur;
    }

    /// Accumulates parameter gradients and returns the gradient with
    /// respect to the stack input.
    Tensor<T> backward(Cache& cache, const Tensor<T>& grad_out) {
        std::vector<Tensor<T>> pending(descs.size()); // keyed by down index
        Tensor<T> g = grad_out;
        Tensor<T> input_pending; // skip gradient aimed at the stack input
        for (std::size_t n = descs.size(); n > 0; --n) {
            const std::size_t li = n - 1;
            const LayerDesc& d = descs[li];
            if (d.kind == LayerKind::up && skip && paired_down[li] >= 0) {
                const std::size_t pd = static_cast<std::size_t>(paired_down[li]);
                Tensor<T> g_enc;
                split_channels(g, d.out_ch, g, g_enc);
                if (pending[pd].data.empty())
                    pending[pd] = std::move(g_enc);
                else
                    add_into(pending[pd], g_enc);
            }
            const Tensor<T>& out = cache.out[li];
            for (std::size_t t = 0; t < g.data.size(); ++t)
                if (!(out.data[t] > T(0))) g.data[t] = T(0);
            Tensor<T> gin(cache.fed[li].dims);
            if (d.kind == LayerKind::up) {
                if (cache.pre_crop[li][0] != g.dims[1] ||
                    cache.pre_crop[li][1] != g.dims[2])
                    g = embed_topleft(g, cache.pre_crop[li][0],
                                      cache.pre_crop[li][1]);
                tconvs[slot[li]].backward(cache.fed[li], g, &gin.data);
            } else {
                convs[slot[li]].backward(cache.fed[li], g, &gin.data);
            }
            if (d.kind == LayerKind::down && !pending[li].data.empty())
                add_into(gin, pending[li]);
            g = std::move(gin);
        }
        return g;
    }

private:
    static Tensor<T> crop_to(const Tensor<T>& x, std::size_t h, std::size_t w) {
        Tensor<T> y({x.dims[0], h, w});
        for (std::size_t c = 0; c < x.dims[0]; ++c)
            for (std::size_t i = 0; i < h; ++i)
                for (std::size_t j = 0; j < w; ++j)
                    y.data[(c * h + i) * w + j] =
                        x.data[(c * x.dims[1] + i) * x.dims[2] + j];
        return y;
    }

    static Tensor<T> embed_topleft(const Tensor<T>& x, std::size_t h,
                                   std::size_t w) {
        Tensor<T> y({x.dims[0], h, w});
        for (std::size_t c = 0; c < x.dims[0]; ++c)
            for (std::size_t i = 0; i < x.dims[1]; ++i)
                for (std::size_t j = 0; j < x.dims[2]; ++j)
                    y.data[(c * h + i) * w + j] =
                        x.data[(c * x.dims[1] + i) * x.dims[2] + j];
        return y;
    }

    static Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
        if (a.dims[1] != b.dims[1] || a.dims[2] != b.dims[2])
            throw DimensionError("skip concat extent mismatch");
        Tensor<T> y({a.dims[0] + b.dims[0], a.dims[1], a.dims[2]});
        std::copy(a.data.begin(), a.data.end(), y.data.begin());
        std::copy(b.data.begin(), b.data.end(), y.data.begin() + a.data.size());
        return y;
    }

    static void split_channels(const Tensor<T>& g, std::size_t c_first,
                               Tensor<T>& first, Tensor<T>& rest) {
        const std::size_t h = g.dims[1], w = g.dims[2];
        Tensor<T> a({c_first, h, w});
        Tensor<T> b({g.dims[0] - c_first, h, w});
        std::copy(g.data.begin(), g.data.begin() + a.data.size(), a.data.begin());
        std::copy(g.data.begin() + a.data.size(), g.data.end(), b.data.begin());
        first = std::move(a);
        rest = std::move(b);
    }

    static void add_into(Tensor<T>& dst, const Tensor<T>& src) {
        for (std::size_t i = 0; i < dst.data.size(); ++i)
            dst.data[i] += src.data[i];
    }
};

/// Full reconstruction network: 4D input convolution, ReLU, lenslet-major
/// reshape, then the 2D stack. phase_x/phase_y reflect-pad the T2 image at
/// the top/left before the stack and crop afterwards, aligning a patch's
/// stride grid with the full frame's.
template <typename T>
struct Network {
    NetworkSpec spec;
    Conv4dInput<T> input_layer;
    Stack2d<T> stack;

    struct Cache {
        Tensor<T> lf;
        Tensor<T> t1; // post-ReLU
        typename Stack2d<T>::Cache stack;
        std::size_t phase_x = 0, phase_y = 0;
        bool valid = false;
    };

    explicit Network(const NetworkSpec& s) : spec(s) {
        spec.validate();
        input_layer = Conv4dInput<T>(spec.nd, spec.fov);
        stack.build(spec.layers, spec.skip);
        init_weights(spec.seed);
    }

    void init_weights(std::uint64_t seed) {
        Rng rng(seed);
        for (auto& [name, t] : parameters()) {
            if (name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0) {
                std::fill(t->data.begin(), t->data.end(), T(0));
                continue;
            }
            double fan_in = 1.0;
            if (t->dims.size() == 5)      // conv4d: one input channel
                fan_in = 9.0 * static_cast<double>(spec.fov * spec.fov);
            else if (t->dims.size() == 4 && name.find(".up.") != std::string::npos)
                fan_in = static_cast<double>(t->dims[0]); // ci taps: one per channel
            else if (t->dims.size() == 4)
                fan_in = static_cast<double>(t->dims[1] * t->dims[2] * t->dims[3]);
            const double limit = std::sqrt(3.0 / fan_in);
            for (T& v : t->data)
                v = static_cast<T>(rng.uniform(-limit, limit));
        }
        zero_grad();
    }

    std::vector<std::pair<std::string, Tensor<T>*>> parameters() {
        std::vector<std::pair<std::string, Tensor<T>*>> out;
        out.emplace_back("l00.conv4d.w", &input_layer.w);
        out.emplace_back("l00.conv4d.b", &input_layer.b);
        char buf[32];
        for (std::size_t li = 0; li < stack.descs.size(); ++li) {
            const char* kind = nullptr;
            Tensor<T>*w = nullptr, *b = nullptr;
            switch (stack.descs[li].kind) {
            case LayerKind::conv:
                kind = "conv";
                w = &stack.convs[stack.slot[li]].w;
                b = &stack.convs[stack.slot[li]].b;
                break;
            case LayerKind::down:
                kind = "down";
                w = &stack.convs[stack.slot[li]].w;
                b = &stack.convs[stack.slot[li]].b;
                break;
            case LayerKind::up:
                kind = "up";
                w = &stack.tconvs[stack.slot[li]].w;
                b = &stack.tconvs[stack.slot[li]].b;
                break;
            default:
                throw ConfigError("unsupported layer kind");
            }
            std::snprintf(buf, sizeof buf, "l%02zu.%s.", li + 1, kind);
            out.emplace_back(std::string(buf) + "w", w);
            out.emplace_back(std::string(buf) + "b", b);
        }
        return out;
    }

    void zero_grad() {
        for (auto& [name, t] : parameters()) t->zero_grad();
    }

    Tensor<T> forward(const Tensor<T>& lf, Cache& cache,
                      std::size_t phase_x = 0, std::size_t phase_y = 0) const {
        if (lf.dims.size() != 5 || lf.dims[1] != spec.ax || lf.dims[2] != spec.ay)
            throw DimensionError("light field angular extent does not match the network");
        cache.lf = lf;
        Tensor<T> t1 = input_layer.forward(lf);
        for (T& v : t1.data)
            if (v < T(0)) v = T(0);
        cache.t1 = t1;
        Tensor<T> t2 = t1_to_t2(t1);
        if (phase_x > 0 || phase_y > 0)
            t2 = reflect_pad_topleft(t2, phase_x, phase_y);
        Tensor<T> y = stack.forward(t2, cache.stack);
        if (phase_x > 0 || phase_y > 0)
            y = crop_topleft(y, phase_x, phase_y);
        cache.phase_x = phase_x;
        cache.phase_y = phase_y;
        cache.valid = true;
        return y;
    }

    Tensor<T> forward(const Tensor<T>& lf, std::size_t phase_x = 0,
                      std::size_t phase_y = 0) const {
        Cache scratch;
        return forward(lf, scratch, phase_x, phase_y);
    }

    /// Accumulates all parameter gradients for the forward pass recorded in
    /// cache. Only unphased passes can be differentiated (training always
    /// runs at phase 0).
    void backward(Cache& cache, const Tensor<T>& grad_out) {
        if (!cache.valid)
            throw ConfigError("backward without a recorded forward pass");
        if (cache.phase_x != 0 || cache.phase_y != 0)
            throw ConfigError("backward after a phase-shifted forward is unsupported");
        Tensor<T> g2 = stack.backward(cache.stack, grad_out);
        Tensor<T> g1 = t2_to_t1(g2, spec.ax, spec.ay);
        for (std::size_t t = 0; t < g1.data.size(); ++t)
            if (!(cache.t1.data[t] > T(0))) g1.data[t] = T(0);
        input_layer.backward(cache.lf, g1, nullptr);
    }

    std::size_t receptive_field() const { return net::receptive_field(spec.layers); }
};

struct OutputShape {
    std::size_t nd = 0;
    std::size_t lx = 0;
    std::size_t ly = 0;
};

/// Output extent for an input of sx x sy lenslets with reflect padding of
/// pad lenslets per side: lateral = A * (S + 2*pad - fov + 1).
OutputShape output_shape(const NetworkSpec& spec, std::size_t sx, std::size_t sy,
                         std::size_t pad);

} // namespace lfm::net
