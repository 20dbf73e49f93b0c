#include "lfm/net/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "lfm/rng.hpp"

namespace lfm::net {

namespace {

long floordiv2(long a) { return (a >= 0) ? a / 2 : -((-a + 1) / 2); }

std::size_t down_count(const std::vector<LayerDesc>& layers) {
    std::size_t n = 0;
    for (const LayerDesc& d : layers)
        if (d.kind == LayerKind::down) ++n;
    return n;
}

void check_keys(const nlohmann::json& j,
                std::initializer_list<const char*> allowed, const char* where) {
    if (!j.is_object())
        throw ConfigError(std::string(where) + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* a : allowed)
            if (it.key() == a) { ok = true; break; }
        if (!ok)
            throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
    }
}

} // namespace

void NetworkSpec::validate() const {
    if (fov < 3 || fov % 2 == 0)
        throw ConfigError("fov must be odd and at least 3");
    if (nd == 0) throw ConfigError("depth count must be positive");
    if (ax == 0 || ay == 0) throw ConfigError("angular extent must be positive");
    if (layers.empty()) throw ConfigError("layer list is empty");
    long balance = 0;
    std::size_t ndown = 0, nup = 0;
    bool seen_up = false;
    for (const LayerDesc& d : layers) {
        switch (d.kind) {
        case LayerKind::conv:
            if ((d.k != 1 && d.k != 3) || d.s != 1)
                throw ConfigError("conv layers use kernel 1 or 3 at stride 1");
            break;
        case LayerKind::down:
            if (d.k != 3 || d.s != 2)
                throw ConfigError("down layers use kernel 3 at stride 2");
            if (seen_up)
                throw ConfigError("down layer after an up layer");
            ++ndown;
            ++balance;
            break;
        case LayerKind::up:
            if (d.k != 2 || d.s != 2)
                throw ConfigError("up layers use kernel 2 at stride 2");
            seen_up = true;
            ++nup;
            if (--balance < 0)
                throw ConfigError("up layer without a matching down layer");
            break;
        case LayerKind::conv4d:
            throw ConfigError("conv4d belongs to the input stage, not the layer list");
        }
    }
    if (balance != 0)
        throw ConfigError("down and up layers must balance");
    const std::size_t want = variant == Variant::shallow ? 2 : 4;
    if (ndown != want || nup != want)
        throw ConfigError("variant requires exactly " + std::to_string(want) +
                          " down and up layers");
    // channel flow, mirroring Stack2d pairing
    std::vector<std::size_t> open;
    std::size_t cur = nd;
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const LayerDesc& d = layers[li];
        if (d.in_ch != cur)
            throw ConfigError("layer " + std::to_string(li) +
                              " input channels do not match the flow");
        if (d.kind == LayerKind::down) open.push_back(d.in_ch);
        cur = d.out_ch;
        if (d.kind == LayerKind::up && !open.empty()) {
            const std::size_t enc = open.back();
            open.pop_back();
            if (skip) cur += enc;
        }
    }
    if (cur != nd)
        throw ConfigError("final layer must produce the depth channel count");
    if (variant == Variant::shallow && receptive_field(layers) > ax)
        throw ConfigError("shallow receptive field exceeds the angular extent");
}

std::size_t receptive_field(const std::vector<LayerDesc>& layers) {
    if (layers.empty())
        throw ConfigError("receptive field of an empty layer list");
    for (const LayerDesc& d : layers)
        if (d.kind == LayerKind::conv4d)
            throw ConfigError("unsupported layer kind for the receptive field");
    const std::size_t ndown = down_count(layers);
    const long period = 1L << std::min<std::size_t>(ndown, 20);
    long best = 0;
    for (long x = 0; x < period; ++x) {
        long lo = x, hi = x;
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
            switch (it->kind) {
            case LayerKind::conv: {
                const long p = static_cast<long>((it->k - 1) / 2);
                lo -= p;
                hi += p;
                break;
            }
            case LayerKind::down:
                lo = 2 * lo - 1;
                hi = 2 * hi + 1;
                break;
            case LayerKind::up:
                lo = floordiv2(lo);
                hi = floordiv2(hi);
                break;
            default:
                break;
            }
        }
        best = std::max(best, hi - lo + 1);
    }
    return static_cast<std::size_t>(best);
}

std::size_t measure_receptive_field(const std::vector<LayerDesc>& layers) {
    long balance = 0;
    for (const LayerDesc& d : layers) {
        if (d.kind == LayerKind::conv4d)
            throw ConfigError("unsupported layer kind for the probe");
        if (d.kind == LayerKind::down) ++balance;
        if (d.kind == LayerKind::up && --balance < 0)
            throw ConfigError("probe requires a resolution-preserving stack");
    }
    if (balance != 0)
        throw ConfigError("probe requires a resolution-preserving stack");

    std::vector<LayerDesc> ds = layers; // channel widths do not affect support
    for (LayerDesc& d : ds) d.in_ch = d.out_ch = 1;
    Stack2d<double> st;
    st.build(ds, false);
    for (auto& c : st.convs) {
        std::fill(c.w.data.begin(), c.w.data.end(), 1.0);
        std::fill(c.b.data.begin(), c.b.data.end(), 0.0);
    }
    for (auto& t : st.tconvs) {
        std::fill(t.w.data.begin(), t.w.data.end(), 1.0);
        std::fill(t.b.data.begin(), t.b.data.end(), 0.0);
    }

    long rb = 1; // loose upper bound on the support half-width budget
    for (auto it = ds.rbegin(); it != ds.rend(); ++it) {
        if (it->kind == LayerKind::conv) rb += static_cast<long>(it->k);
        else if (it->kind == LayerKind::down) rb = 2 * rb + 3;
        else rb += 2;
    }
    const long period = 1L << down_count(ds);
    const std::size_t width = static_cast<std::size_t>(2 * rb + 8 * period + 32);

    Tensor<double> base({1, 1, width});
    std::fill(base.data.begin(), base.data.end(), 1.0);
    typename Stack2d<double>::Cache cache;
    const Tensor<double> y0 = st.forward(base, cache);

    const long c0 = (static_cast<long>(width) / 2 / period) * period;
    std::size_t best = 0;
    for (long phase = 0; phase < period; ++phase) {
        const long xs = c0 + phase;
        long lo = std::numeric_limits<long>::max();
        long hi = std::numeric_limits<long>::min();
        for (long u = xs - rb; u <= xs + rb; ++u) {
            Tensor<double> x = base;
            x.data[static_cast<std::size_t>(u)] += 1e12;
            const Tensor<double> y = st.forward(x, cache);
            if (y.data[static_cast<std::size_t>(xs)] !=
                y0.data[static_cast<std::size_t>(xs)]) {
                lo = std::min(lo, u);
                hi = std::max(hi, u);
            }
        }
        if (hi >= lo)
            best = std::max(best, static_cast<std::size_t>(hi - lo + 1));
    }
    return best;
}

std::vector<LayerDesc> reference_shallow_layers(std::size_t nd, std::size_t base,
                                                bool skip) {
    const std::size_t c = base;
    auto conv = [](std::size_t i, std::size_t o, std::size_t k) {
        return LayerDesc{LayerKind::conv, i, o, k, 1};
    };
    auto down = [](std::size_t i, std::size_t o) {
        return LayerDesc{LayerKind::down, i, o, 3, 2};
    };
    auto up = [](std::size_t i, std::size_t o) {
        return LayerDesc{LayerKind::up, i, o, 2, 2};
    };
    return {
        conv(nd, c, 3),
        conv(c, c, 3),
        down(c, 2 * c),
        conv(2 * c, 2 * c, 3),
        conv(2 * c, 2 * c, 3),
        down(2 * c, 4 * c),
        up(4 * c, 2 * c),
        up(skip ? 4 * c : 2 * c, c),
        conv(skip ? 2 * c : c, nd, 1),
    };
}

std::vector<LayerDesc> reference_full_layers(std::size_t nd, std::size_t base,
                                             bool skip) {
    const std::size_t c = base;
    auto conv = [](std::size_t i, std::size_t o, std::size_t k) {
        return LayerDesc{LayerKind::conv, i, o, k, 1};
    };
    auto down = [](std::size_t i, std::size_t o) {
        return LayerDesc{LayerKind::down, i, o, 3, 2};
    };
    auto up = [](std::size_t i, std::size_t o) {
        return LayerDesc{LayerKind::up, i, o, 2, 2};
    };
    return {
        conv(nd, c, 3),
        down(c, 2 * c),
        conv(2 * c, 2 * c, 3),
        down(2 * c, 4 * c),
        conv(4 * c, 4 * c, 3),
        conv(4 * c, 4 * c, 3),
        down(4 * c, 8 * c),
        conv(8 * c, 8 * c, 3),
        down(8 * c, 16 * c),
        conv(16 * c, 16 * c, 3),
        up(16 * c, 8 * c),
        up(skip ? 16 * c : 8 * c, 4 * c),
        up(skip ? 8 * c : 4 * c, 2 * c),
        up(skip ? 4 * c : 2 * c, c),
        conv(skip ? 2 * c : c, nd, 1),
    };
}

std::vector<LayerDesc> compact_shallow_layers(std::size_t nd, std::size_t base,
                                              bool skip) {
    const std::size_t c = base;
    return {
        LayerDesc{LayerKind::down, nd, c, 3, 2},
        LayerDesc{LayerKind::down, c, 2 * c, 3, 2},
        LayerDesc{LayerKind::up, 2 * c, c, 2, 2},
        LayerDesc{LayerKind::up, skip ? 2 * c : c, c, 2, 2},
        LayerDesc{LayerKind::conv, skip ? c + nd : c, nd, 1, 1},
    };
}

NetworkSpec spec_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    try {
        check_keys(j, {"fov", "nd", "a", "variant", "skip", "seed", "layers"},
                   "network spec");
        s.fov = j.at("fov").get<std::size_t>();
        s.nd = j.at("nd").get<std::size_t>();
        const auto& a = j.at("a");
        if (!a.is_array() || a.size() != 2)
            throw ConfigError("\"a\" must be [A_x, A_y]");
        s.ax = a.at(0).get<std::size_t>();
        s.ay = a.at(1).get<std::size_t>();
        const std::string v = j.at("variant").get<std::string>();
        if (v == "shallow") s.variant = NetworkSpec::Variant::shallow;
        else if (v == "full") s.variant = NetworkSpec::Variant::full;
        else throw ConfigError("variant must be \"shallow\" or \"full\"");
        s.skip = j.value("skip", false);
        s.seed = j.value("seed", std::uint64_t(1));
        for (const auto& lj : j.at("layers")) {
            check_keys(lj, {"kind", "in", "out", "k"}, "layer");
            LayerDesc d;
            const std::string kind = lj.at("kind").get<std::string>();
            if (kind == "conv") {
                d.kind = LayerKind::conv;
                d.k = lj.value("k", std::size_t(3));
                d.s = 1;
            } else if (kind == "down") {
                d.kind = LayerKind::down;
                d.k = 3;
                d.s = 2;
            } else if (kind == "up") {
                d.kind = LayerKind::up;
                d.k = 2;
                d.s = 2;
            } else {
                throw ConfigError("unknown layer kind \"" + kind + "\"");
            }
            d.in_ch = lj.at("in").get<std::size_t>();
            d.out_ch = lj.at("out").get<std::size_t>();
            s.layers.push_back(d);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid network spec: ") + e.what());
    }
    s.validate();
    return s;
}

nlohmann::json spec_to_json(const NetworkSpec& s) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerDesc& d : s.layers) {
        nlohmann::json lj;
        switch (d.kind) {
        case LayerKind::conv:
            lj["kind"] = "conv";
            lj["k"] = d.k;
            break;
        case LayerKind::down: lj["kind"] = "down"; break;
        case LayerKind::up: lj["kind"] = "up"; break;
        default: throw ConfigError("unsupported layer kind");
        }
        lj["in"] = d.in_ch;
        lj["out"] = d.out_ch;
        layers.push_back(lj);
    }
    return {
        {"fov", s.fov},
        {"nd", s.nd},
        {"a", {s.ax, s.ay}},
        {"variant", s.variant == NetworkSpec::Variant::shallow ? "shallow" : "full"},
        {"skip", s.skip},
        {"seed", s.seed},
        {"layers", layers},
    };
}

OutputShape output_shape(const NetworkSpec& spec, std::size_t sx, std::size_t sy,
                         std::size_t pad) {
    if (sx + 2 * pad < spec.fov || sy + 2 * pad < spec.fov)
        throw ConfigError("padded extent smaller than fov");
    const std::size_t ox = sx + 2 * pad - spec.fov + 1;
    const std::size_t oy = sy + 2 * pad - spec.fov + 1;
    return {spec.nd, spec.ax * ox, spec.ay * oy};
}

Tensor<float> lf_to_tensor(const LightField4D& lf) {
    Tensor<float> t({1, lf.ax, lf.ay, lf.sx, lf.sy});
    for (std::size_t i = 0; i < lf.data.size(); ++i)
        t.data[i] = static_cast<float>(lf.data[i]);
    return t;
}

Volume3D tensor_to_volume(const Tensor<float>& t) {
    if (t.dims.size() != 3)
        throw DimensionError("expected a {depth, x, y} tensor");
    Volume3D v(t.dims[0], t.dims[1], t.dims[2]);
    for (std::size_t i = 0; i < t.data.size(); ++i)
        v.data[i] = static_cast<double>(t.data[i]);
    return v;
}

TrainPair make_train_pair(const LightField4D& lf, const Volume3D& vol,
                          const NetworkSpec& spec) {
    if (lf.ax != spec.ax || lf.ay != spec.ay)
        throw DimensionError("light field angular extent does not match the network");
    if (lf.sx < spec.fov || lf.sy < spec.fov)
        throw DimensionError("tile smaller than fov");
    const std::size_t ox = lf.sx - spec.fov + 1;
    const std::size_t oy = lf.sy - spec.fov + 1;
    if (vol.depth != spec.nd)
        throw DimensionError("target depth count does not match the network");
    std::size_t x0 = 0, y0 = 0;
    if (vol.vx == spec.ax * lf.sx && vol.vy == spec.ay * lf.sy) {
        x0 = spec.ax * ((spec.fov - 1) / 2);
        y0 = spec.ay * ((spec.fov - 1) / 2);
    } else if (vol.vx != spec.ax * ox || vol.vy != spec.ay * oy) {
        throw DimensionError("target extent matches neither the tile nor its center");
    }
    TrainPair p;
    p.in = lf_to_tensor(lf);
    p.target = Tensor<float>({spec.nd, spec.ax * ox, spec.ay * oy});
    for (std::size_t z = 0; z < spec.nd; ++z)
        for (std::size_t x = 0; x < spec.ax * ox; ++x)
            for (std::size_t y = 0; y < spec.ay * oy; ++y)
                p.target.data[(z * spec.ax * ox + x) * spec.ay * oy + y] =
                    static_cast<float>(vol.at(z, x + x0, y + y0));
    return p;
}

namespace {

double sample_mse_and_grad(const Tensor<float>& y, const Tensor<float>& t,
                           double scale, Tensor<float>* gy) {
    double acc = 0.0;
    if (gy) *gy = Tensor<float>(y.dims);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        const double d = static_cast<double>(y.data[i]) -
                         static_cast<double>(t.data[i]);
        acc += d * d;
        if (gy)
            gy->data[i] = static_cast<float>(2.0 * d * scale /
                                             static_cast<double>(y.data.size()));
    }
    return acc / static_cast<double>(y.data.size());
}

} // namespace

TrainResult train(Network<float>& net, const std::vector<TrainPair>& pairs,
                  const TrainConfig& cfg) {
    if (pairs.empty()) throw ConfigError("empty dataset");
    if (cfg.epochs == 0) throw ConfigError("epochs must be positive");
    if (cfg.batch == 0) throw ConfigError("batch size must be positive");
    if (!(cfg.val_fraction >= 0.0) || cfg.val_fraction >= 1.0)
        throw ConfigError("val_fraction must lie in [0, 1)");
    if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");

    const OutputShape os = output_shape(net.spec, pairs[0].in.dims[3],
                                        pairs[0].in.dims[4], 0);
    for (const TrainPair& p : pairs) {
        if (p.in.dims != pairs[0].in.dims)
            throw DimensionError("training pairs must share one input shape");
        if (p.target.dims != std::vector<std::size_t>{os.nd, os.lx, os.ly})
            throw DimensionError("target shape does not match the network output");
    }

    const std::size_t n = pairs.size();
    std::size_t nval = 0;
    if (cfg.val_fraction > 0.0) {
        nval = static_cast<std::size_t>(
            std::llround(cfg.val_fraction * static_cast<double>(n)));
        nval = std::max<std::size_t>(nval, 1);
        if (nval >= n) nval = n - 1;
    }
    const std::size_t ntrain = n - nval;
    if (ntrain == 0) throw ConfigError("no training pairs left after the split");

    auto params = net.parameters();
    std::vector<std::vector<double>> m1(params.size()), m2(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        m1[i].assign(params[i].second->data.size(), 0.0);
        m2[i].assign(params[i].second->data.size(), 0.0);
    }

    TrainResult res;
    res.best_val = std::numeric_limits<double>::infinity();
    std::vector<std::vector<float>> best;
    std::vector<std::size_t> order(ntrain);

    typename Network<float>::Cache cache;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = 0; i < ntrain; ++i) order[i] = i;
        Rng rng(derive_seed(cfg.seed, 0x7261 + epoch));
        rng.shuffle(order);
        for (std::size_t b0 = 0; b0 < ntrain; b0 += cfg.batch) {
            const std::size_t bs = std::min(cfg.batch, ntrain - b0);
            net.zero_grad();
            double loss = 0.0;
            Tensor<float> gy;
            for (std::size_t bi = 0; bi < bs; ++bi) {
                const TrainPair& p = pairs[order[b0 + bi]];
                const Tensor<float> y = net.forward(p.in, cache);
                loss += sample_mse_and_grad(y, p.target,
                                            1.0 / static_cast<double>(bs), &gy);
                net.backward(cache, gy);
            }
            loss /= static_cast<double>(bs);
            ++res.steps;
            if (!std::isfinite(loss))
                throw NumericError("training loss diverged at step " +
                                   std::to_string(res.steps));
            res.step_loss.push_back(loss);

            const double c1 =
                1.0 - std::pow(cfg.beta1, static_cast<double>(res.steps));
            const double c2 =
                1.0 - std::pow(cfg.beta2, static_cast<double>(res.steps));
            for (std::size_t pi = 0; pi < params.size(); ++pi) {
                Tensor<float>* t = params[pi].second;
                for (std::size_t k = 0; k < t->data.size(); ++k) {
                    const double g = static_cast<double>(t->grad[k]);
                    m1[pi][k] = cfg.beta1 * m1[pi][k] + (1.0 - cfg.beta1) * g;
                    m2[pi][k] = cfg.beta2 * m2[pi][k] + (1.0 - cfg.beta2) * g * g;
                    const double step = cfg.lr * (m1[pi][k] / c1) /
                                        (std::sqrt(m2[pi][k] / c2) + cfg.adam_eps);
                    t->data[k] = static_cast<float>(
                        static_cast<double>(t->data[k]) - step);
                }
            }
        }

        double vloss = 0.0;
        const std::size_t v0 = nval > 0 ? ntrain : 0;
        const std::size_t vn = nval > 0 ? nval : ntrain;
        for (std::size_t vi = 0; vi < vn; ++vi) {
            const TrainPair& p = pairs[v0 + vi];
            const Tensor<float> y = net.forward(p.in, cache);
            vloss += sample_mse_and_grad(y, p.target, 1.0, nullptr);
        }
        vloss /= static_cast<double>(vn);
        if (!std::isfinite(vloss))
            throw NumericError("validation loss diverged after epoch " +
                               std::to_string(epoch + 1));
        res.val_loss.push_back(vloss);
        if (vloss < res.best_val) {
            res.best_val = vloss;
            res.best_epoch = epoch;
            best.clear();
            for (auto& [name, t] : params) best.push_back(t->data);
        }
    }

    if (!best.empty())
        for (std::size_t pi = 0; pi < params.size(); ++pi)
            params[pi].second->data = best[pi];
    return res;
}

namespace {

constexpr char kCkptMagic[4] = {'L', 'F', 'M', 'W'};

} // namespace

void save_checkpoint(Network<float>& net, const std::string& path,
                     const nlohmann::json& metadata) {
    auto params = net.parameters();
    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0;
    for (auto& [name, t] : params) {
        tensors.push_back({{"name", name},
                           {"dims", t->dims},
                           {"offset", offset},
                           {"count", t->data.size()}});
        offset += t->data.size() * sizeof(float);
    }
    const nlohmann::json header = {{"format", 1},
                                   {"spec", spec_to_json(net.spec)},
                                   {"tensors", tensors},
                                   {"metadata", metadata}};
    const std::string h = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out.write(kCkptMagic, 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(h.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (auto& [name, t] : params)
        out.write(reinterpret_cast<const char*>(t->data.data()),
                  static_cast<std::streamsize>(t->data.size() * sizeof(float)));
    if (!out) throw IoError("short write: " + path);
}

Network<float> load_checkpoint(const std::string& path,
                               nlohmann::json* metadata) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw IoError("not a checkpoint file: " + path);
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    if (!in || hlen == 0 || hlen > (1u << 27))
        throw IoError("corrupt checkpoint header length: " + path);
    std::string h(hlen, '\0');
    in.read(h.data(), hlen);
    if (!in) throw IoError("truncated checkpoint header: " + path);

    nlohmann::json header;
    NetworkSpec spec;
    try {
        header = nlohmann::json::parse(h);
        if (header.at("format").get<int>() != 1)
            throw IoError("unsupported checkpoint format version");
        spec = spec_from_json(header.at("spec"));
    } catch (const IoError&) {
        throw;
    } catch (const std::exception& e) {
        throw IoError("malformed checkpoint header: " + path + ": " + e.what());
    }

    Network<float> net(spec);
    auto params = net.parameters();
    const auto& tensors = header.at("tensors");
    if (!tensors.is_array() || tensors.size() != params.size())
        throw IoError("checkpoint tensor table does not match the spec");
    std::size_t offset = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& tj = tensors.at(i);
        if (tj.at("name").get<std::string>() != params[i].first ||
            tj.at("dims").get<std::vector<std::size_t>>() != params[i].second->dims ||
            tj.at("offset").get<std::size_t>() != offset ||
            tj.at("count").get<std::size_t>() != params[i].second->data.size())
            throw IoError("checkpoint tensor table does not match the spec");
        offset += params[i].second->data.size() * sizeof(float);
    }
    for (auto& [name, t] : params) {
        in.read(reinterpret_cast<char*>(t->data.data()),
                static_cast<std::streamsize>(t->data.size() * sizeof(float)));
        if (!in) throw IoError("truncated checkpoint payload: " + path);
        for (float v : t->data)
            if (!std::isfinite(v))
                throw IoError("non-finite weight in checkpoint: " + path);
    }
    in.peek();
    if (!in.eof()) throw IoError("trailing bytes in checkpoint: " + path);
    if (metadata) *metadata = header.value("metadata", nlohmann::json::object());
    return net;
}

namespace {

LightField4D reflect_pad_lenslets(const LightField4D& lf, std::size_t pad) {
    LightField4D out(lf.ax, lf.ay, lf.sx + 2 * pad, lf.sy + 2 * pad);
    out.meta = lf.meta;
    for (std::size_t a = 0; a < lf.ax; ++a)
        for (std::size_t b = 0; b < lf.ay; ++b)
            for (std::size_t sx = 0; sx < out.sx; ++sx) {
                const std::size_t qx = reflect_index(
                    static_cast<long>(sx) - static_cast<long>(pad),
                    static_cast<long>(lf.sx));
                for (std::size_t sy = 0; sy < out.sy; ++sy) {
                    const std::size_t qy = reflect_index(
                        static_cast<long>(sy) - static_cast<long>(pad),
                        static_cast<long>(lf.sy));
                    out.at(a, b, sx, sy) = lf.at(a, b, qx, qy);
                }
            }
    return out;
}

} // namespace

Volume3D infer_full(const Network<float>& net, const LightField4D& lf,
                    std::size_t pad_lenslets) {
    const NetworkSpec& s = net.spec;
    if (lf.ax != s.ax || lf.ay != s.ay)
        throw DimensionError("light field angular extent does not match the network");
    if (lf.sx + 2 * pad_lenslets < s.fov || lf.sy + 2 * pad_lenslets < s.fov)
        throw ConfigError("padding leaves fewer lenslets than fov");
    const LightField4D padded =
        pad_lenslets == 0 ? lf : reflect_pad_lenslets(lf, pad_lenslets);
    const Tensor<float> in = lf_to_tensor(padded);
    const Tensor<float> y = net.forward(in);
    Volume3D out = tensor_to_volume(y);
    out.meta["pixels_per_lenslet"] = s.ax;
    return out;
}

Volume3D infer_tiled(const Network<float>& net, const LightField4D& lf,
                     std::size_t tile_lenslets) {
    const NetworkSpec& s = net.spec;
    if (tile_lenslets == 0)
        throw ConfigError("tile extent must be positive");
    if (lf.ax != s.ax || lf.ay != s.ay)
        throw DimensionError("light field angular extent does not match the network");
    const std::size_t halo = (s.fov - 1) / 2;
    const std::size_t rf = net.receptive_field();
    const std::size_t margin = (rf - 1 + s.ax - 1) / s.ax; // lenslets
    const std::size_t period =
        std::size_t(1) << down_count(s.layers);
    // Patches are windows of the same halo-padded frame the full pass
    // runs on, clamped at the frame borders. A clamped window's edge
    // coincides with the frame's, so the stack's reflect there mirrors
    // identical content; elsewhere the margin keeps the receptive field
    // inside the window. Together with the stride-phase alignment this
    // reproduces infer_full exactly.
    const LightField4D frame = reflect_pad_lenslets(lf, halo);

    Volume3D out(s.nd, s.ax * lf.sx, s.ay * lf.sy);
    for (std::size_t t0x = 0; t0x < lf.sx; t0x += tile_lenslets)
        for (std::size_t t0y = 0; t0y < lf.sy; t0y += tile_lenslets) {
            const std::size_t cx = std::min(tile_lenslets, lf.sx - t0x);
            const std::size_t cy = std::min(tile_lenslets, lf.sy - t0y);
            const std::size_t lox = t0x > margin ? t0x - margin : 0;
            const std::size_t loy = t0y > margin ? t0y - margin : 0;
            const std::size_t hix =
                std::min(frame.sx, t0x + cx + 2 * halo + margin);
            const std::size_t hiy =
                std::min(frame.sy, t0y + cy + 2 * halo + margin);
            LightField4D patch(s.ax, s.ay, hix - lox, hiy - loy);
            for (std::size_t a = 0; a < s.ax; ++a)
                for (std::size_t b = 0; b < s.ay; ++b)
                    for (std::size_t i = lox; i < hix; ++i)
                        for (std::size_t j = loy; j < hiy; ++j)
                            patch.at(a, b, i - lox, j - loy) =
                                frame.at(a, b, i, j);
            const Tensor<float> y =
                net.forward(lf_to_tensor(patch), (s.ax * lox) % period,
                            (s.ay * loy) % period);
            const std::size_t oh = y.dims[1], ow = y.dims[2];
            for (std::size_t z = 0; z < s.nd; ++z)
                for (std::size_t i = 0; i < s.ax * cx; ++i)
                    for (std::size_t j = 0; j < s.ay * cy; ++j)
                        out.at(z, s.ax * t0x + i, s.ay * t0y + j) =
                            y.data[(z * oh + s.ax * (t0x - lox) + i) * ow +
                                   s.ay * (t0y - loy) + j];
        }
    out.meta["pixels_per_lenslet"] = s.ax;
    return out;
}

} // namespace lfm::net
