// Command-line front end: one executable exposing the full pipeline from
// phantom generation to network inference. Configuration is a single JSON
// file with per-module sections; flags override the file; all randomness
// derives from one top-level seed.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lfm/align.hpp"
#include "lfm/container.hpp"
#include "lfm/deconv.hpp"
#include "lfm/design.hpp"
#include "lfm/errors.hpp"
#include "lfm/lfcore.hpp"
#include "lfm/metrics.hpp"
#include "lfm/net/train.hpp"
#include "lfm/optics.hpp"
#include "lfm/parallel.hpp"
#include "lfm/phantom.hpp"
#include "lfm/projector.hpp"
#include "lfm/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config

json default_config() {
    json optics;
    lfm::to_json(optics, lfm::OpticalConfig{});
    return {
        {"seed", 1},
        {"optics", optics},
        {"phantom",
         {{"kind", "empty"},
          {"frequencies_lpmm", json::array()},
          {"tube_count", 0},
          {"tube_radius_um", {0.5, 1.5}},
          {"bead_count", 0},
          {"bead_radius_um", 0.5},
          {"bead_positions_um", nullptr},
          {"nd", 64},
          {"vx", 429},
          {"vy", 429},
          // lateral pitch so 11 voxels span one lenslet in object space
          {"lat_um", 112.0 / 40.0 / 11.0},
          {"ax_um", 0.9}}},
        {"design",
         {{"grid", "reduced"},
          {"b_values_um", nullptr},
          {"depths_um", nullptr},
          {"frequencies_lpmm", json::array()},
          {"lenslets", 13},
          {"target_ppl", 11},
          {"rl_iters", 0},
          {"rl_voxels_per_lenslet", 7},
          {"rays", 100000},
          {"thresh_frac", 0.8},
          {"metric", "contrast"}}},
        {"deconv",
         {{"iterations", 5},
          {"epsilon_scale", 1e-9},
          {"mode", "invariant"},
          {"voxels_per_lenslet", 1},
          {"smooth3", false},
          {"psf",
           {{"ppl", 11},
            {"ns", 1},
            {"mode", "geometric"},
            {"rays", 100000},
            {"nd", 64},
            {"depth_step_um", 0.9},
            {"depth_center_um", 0.0}}}}},
        {"align",
         {{"threshold", 0.59},
          {"raw_ppl", 32.46},
          {"target_ppl", 33},
          {"offset_x", 0.0},
          {"offset_y", 0.0},
          {"step_um", 0.9},
          {"ratio_num", 1.0},
          {"ratio_den", 1.44},
          {"tile_lenslets", 11}}},
        {"network",
         {{"fov", 9},
          {"nd", 64},
          {"a", {33, 33}},
          {"variant", "shallow"},
          {"skip", false},
          {"base_channels", 16},
          {"preset", "reference"},
          {"layers", nullptr}}},
        {"train",
         {{"epochs", 50},
          {"batch", 8},
          {"lr", 1e-3},
          {"beta1", 0.9},
          {"beta2", 0.999},
          {"adam_eps", 1e-8},
          {"val_fraction", 0.2}}},
        {"eval", {{"ssim_window", 11}}},
    };
}

void check_against_template(const json& tmpl, const json& given,
                            const std::string& where) {
    if (!given.is_object())
        throw lfm::ConfigError(where + " must be a JSON object");
    for (auto it = given.begin(); it != given.end(); ++it) {
        if (!tmpl.contains(it.key()))
            throw lfm::ConfigError("unknown key \"" + it.key() + "\" in " + where);
        const json& t = tmpl.at(it.key());
        if (t.is_object() && !t.is_null())
            check_against_template(t, it.value(), where + "." + it.key());
    }
}

void deep_merge(json& base, const json& over) {
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (it->is_object() && base.contains(it.key()) &&
            base.at(it.key()).is_object())
            deep_merge(base.at(it.key()), it.value());
        else
            base[it.key()] = it.value();
    }
}

json load_config(const std::string& path) {
    json cfg = default_config();
    if (path.empty()) return cfg;
    std::ifstream in(path);
    if (!in) throw lfm::IoError("cannot open config: " + path);
    json user;
    try {
        user = json::parse(in);
    } catch (const json::exception& e) {
        throw lfm::ConfigError("config parse error in " + path + ": " + e.what());
    }
    check_against_template(cfg, user, "config");
    deep_merge(cfg, user);
    return cfg;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

// ---------------------------------------------------------------- helpers

struct Opts {
    std::string config;
    std::string out, vol, psf, lf, raw, white, ref, pred, ckpt, data;
    std::uint64_t seed = 1;
    int threads = 0;
    std::size_t pad = 0;
    std::size_t tile = 0;
    long iterations = -1;
    long epochs = -1;
};

struct RunContext {
    json cfg;             // fully resolved configuration
    std::uint64_t seed = 1;
    std::chrono::steady_clock::time_point t0;
};

RunContext make_context(CLI::App* sub, Opts& o) {
    RunContext ctx;
    ctx.t0 = std::chrono::steady_clock::now();
    if (sub->count("--threads")) lfm::set_thread_count(o.threads);
    ctx.cfg = load_config(o.config);
    ctx.seed = sub->count("--seed") ? o.seed
                                    : ctx.cfg.value("seed", std::uint64_t(1));
    ctx.cfg["seed"] = ctx.seed;
    if (o.iterations >= 0)
        ctx.cfg["deconv"]["iterations"] = static_cast<std::size_t>(o.iterations);
    if (o.epochs >= 0)
        ctx.cfg["train"]["epochs"] = static_cast<std::size_t>(o.epochs);
    return ctx;
}

void ensure_parent(const std::string& path) {
    const fs::path p = fs::path(path).parent_path();
    if (!p.empty()) fs::create_directories(p);
}

void write_manifest(const RunContext& ctx, const std::string& sub,
                    const std::string& path, const json& inputs,
                    const std::vector<std::string>& outputs) {
    const double wall_ms =
        std::chrono::duration<double, std::milli>(
            std::chrono::steady_clock::now() - ctx.t0)
            .count();
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a(ctx.cfg.dump())));
    const json m = {{"subcommand", sub},
                    {"seed", ctx.seed},
                    {"threads", lfm::thread_count()},
                    {"config", ctx.cfg},
                    {"config_hash", hash},
                    {"inputs", inputs},
                    {"outputs", outputs},
                    {"format_versions", {{"container", 1}, {"checkpoint", 1}}},
                    {"wall_ms", wall_ms}};
    std::ofstream out(path);
    if (!out) throw lfm::IoError("cannot write manifest: " + path);
    out << m.dump(2) << "\n";
}

lfm::OpticalConfig optics_from(const json& cfg) {
    lfm::OpticalConfig oc;
    lfm::from_json(cfg.at("optics"), oc);
    oc.validate();
    return oc;
}

lfm::ProjectionMode projection_mode_from(const std::string& s) {
    if (s == "invariant") return lfm::ProjectionMode::invariant;
    if (s == "periodic") return lfm::ProjectionMode::periodic;
    throw lfm::ConfigError("deconv.mode must be \"invariant\" or \"periodic\"");
}

lfm::PsfMode psf_mode_from(const std::string& s) {
    if (s == "geometric") return lfm::PsfMode::geometric;
    if (s == "wave") return lfm::PsfMode::wave;
    throw lfm::ConfigError("psf mode must be \"geometric\" or \"wave\"");
}

lfm::DeconvConfig deconv_from(const json& cfg) {
    const json& d = cfg.at("deconv");
    lfm::DeconvConfig dc;
    dc.iterations = d.at("iterations").get<std::size_t>();
    dc.epsilon_scale = d.at("epsilon_scale").get<double>();
    dc.mode = projection_mode_from(d.at("mode").get<std::string>());
    dc.voxels_per_lenslet = d.at("voxels_per_lenslet").get<std::size_t>();
    dc.smooth3 = d.at("smooth3").get<bool>();
    return dc;
}

std::vector<double> psf_depths_from(const json& cfg) {
    const json& p = cfg.at("deconv").at("psf");
    const std::size_t nd = p.at("nd").get<std::size_t>();
    const double step = p.at("depth_step_um").get<double>();
    const double center = p.at("depth_center_um").get<double>();
    if (nd == 0) throw lfm::ConfigError("deconv.psf.nd must be positive");
    std::vector<double> depths(nd);
    for (std::size_t i = 0; i < nd; ++i)
        depths[i] = center +
                    (static_cast<double>(i) -
                     static_cast<double>(nd - 1) / 2.0) *
                        step;
    return depths;
}

lfm::net::NetworkSpec network_spec_from(const json& cfg, std::uint64_t seed) {
    const json& n = cfg.at("network");
    json sj = {{"fov", n.at("fov")},     {"nd", n.at("nd")},
               {"a", n.at("a")},         {"variant", n.at("variant")},
               {"skip", n.at("skip")},   {"seed", seed}};
    if (!n.at("layers").is_null()) {
        sj["layers"] = n.at("layers");
        return lfm::net::spec_from_json(sj);
    }
    const std::size_t nd = n.at("nd").get<std::size_t>();
    const std::size_t base = n.at("base_channels").get<std::size_t>();
    const bool skip = n.at("skip").get<bool>();
    const std::string variant = n.at("variant").get<std::string>();
    const std::string preset = n.at("preset").get<std::string>();
    std::vector<lfm::net::LayerDesc> layers;
    if (preset == "reference")
        layers = variant == "full"
                     ? lfm::net::reference_full_layers(nd, base, skip)
                     : lfm::net::reference_shallow_layers(nd, base, skip);
    else if (preset == "compact")
        layers = lfm::net::compact_shallow_layers(nd, base, skip);
    else
        throw lfm::ConfigError("network.preset must be \"reference\" or \"compact\"");
    json lj = json::array();
    for (const auto& d : layers) {
        json row = {{"in", d.in_ch}, {"out", d.out_ch}};
        switch (d.kind) {
        case lfm::net::LayerKind::conv:
            row["kind"] = "conv";
            row["k"] = d.k;
            break;
        case lfm::net::LayerKind::down: row["kind"] = "down"; break;
        case lfm::net::LayerKind::up: row["kind"] = "up"; break;
        default: throw lfm::ConfigError("unsupported layer kind");
        }
        lj.push_back(row);
    }
    sj["layers"] = lj;
    return lfm::net::spec_from_json(sj);
}

json metric_json(const lfm::PsnrResult& r) {
    if (r.identical) return "identical";
    return r.db;
}

// ------------------------------------------------------------ subcommands

int run_phantom(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const json& ph = ctx.cfg.at("phantom");
    json spec_json = json::object();
    for (const char* key :
         {"kind", "frequencies_lpmm", "tube_count", "tube_radius_um",
          "bead_count", "bead_radius_um", "bead_positions_um"})
        if (ph.contains(key) && !ph.at(key).is_null())
            spec_json[key] = ph.at(key);
    spec_json["seed"] = lfm::derive_seed(ctx.seed, 10);
    const lfm::PhantomSpec spec = lfm::phantom_from_json(spec_json);
    lfm::Volume3D vol = lfm::render_phantom(
        spec, ph.at("nd").get<std::size_t>(), ph.at("vx").get<std::size_t>(),
        ph.at("vy").get<std::size_t>(), ph.at("lat_um").get<double>(),
        ph.at("ax_um").get<double>());
    ensure_parent(o.out);
    lfm::write_container(vol, o.out);
    write_manifest(ctx, "phantom", o.out + ".manifest.json", json::object(),
                   {o.out});
    std::cout << "wrote " << o.out << "\n";
    return 0;
}

int run_psf(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const lfm::OpticalConfig oc = optics_from(ctx.cfg);
    const json& p = ctx.cfg.at("deconv").at("psf");
    const lfm::PsfStack stack = lfm::build_psf_stack(
        oc, psf_depths_from(ctx.cfg), p.at("ppl").get<std::size_t>(),
        p.at("ns").get<std::size_t>(),
        psf_mode_from(p.at("mode").get<std::string>()),
        p.at("rays").get<std::size_t>(), lfm::derive_seed(ctx.seed, 20));
    ensure_parent(o.out);
    lfm::write_psf_stack(stack, o.out);
    write_manifest(ctx, "psf", o.out + ".manifest.json", json::object(),
                   {o.out});
    std::cout << "wrote " << o.out << " (" << stack.depths_um.size()
              << " depths, " << stack.ns << "x" << stack.ns << " offsets)\n";
    return 0;
}

int run_simulate(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const lfm::Volume3D vol = lfm::read_volume3d(o.vol);
    const lfm::PsfStack stack = lfm::read_psf_stack(o.psf);
    const lfm::DeconvConfig dc = deconv_from(ctx.cfg);
    const lfm::LightField4D lf =
        lfm::forward_project(vol, stack, dc.mode, dc.voxels_per_lenslet);
    ensure_parent(o.out);
    lfm::write_container(lf, o.out);
    write_manifest(ctx, "simulate", o.out + ".manifest.json",
                   {{"vol", o.vol}, {"psf", o.psf}}, {o.out});
    std::cout << "wrote " << o.out << "\n";
    return 0;
}

int run_rectify(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const json& a = ctx.cfg.at("align");
    const lfm::Image2D raw = lfm::read_image2d(o.raw);
    const lfm::Image2D white = lfm::read_image2d(o.white);
    const lfm::LightField4D lf = lfm::rectify(
        raw, white, a.at("raw_ppl").get<double>(),
        a.at("target_ppl").get<std::size_t>(), a.at("offset_x").get<double>(),
        a.at("offset_y").get<double>());
    ensure_parent(o.out);
    lfm::write_container(lf, o.out);
    write_manifest(ctx, "rectify", o.out + ".manifest.json",
                   {{"raw", o.raw}, {"white", o.white}}, {o.out});
    std::cout << "wrote " << o.out << "\n";
    return 0;
}

int run_design_scan(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const json& d = ctx.cfg.at("design");
    lfm::DesignScanConfig dsc;
    dsc.optics = optics_from(ctx.cfg);
    const std::string grid = d.at("grid").get<std::string>();
    if (grid == "full")
        dsc.grid = lfm::DesignGridSpec::full_default();
    else if (grid == "reduced")
        dsc.grid = lfm::DesignGridSpec::reduced_default();
    else
        throw lfm::ConfigError("design.grid must be \"full\" or \"reduced\"");
    if (!d.at("b_values_um").is_null())
        dsc.grid.b_values_um = d.at("b_values_um").get<std::vector<double>>();
    if (!d.at("depths_um").is_null())
        dsc.grid.depths_um = d.at("depths_um").get<std::vector<double>>();
    dsc.frequencies_lpmm = d.at("frequencies_lpmm").get<std::vector<double>>();
    dsc.lenslets = d.at("lenslets").get<std::size_t>();
    dsc.target_ppl = d.at("target_ppl").get<std::size_t>();
    dsc.rl_iters = d.at("rl_iters").get<std::size_t>();
    dsc.rl_voxels_per_lenslet = d.at("rl_voxels_per_lenslet").get<std::size_t>();
    dsc.rays = d.at("rays").get<std::size_t>();
    dsc.thresh_frac = d.at("thresh_frac").get<double>();
    dsc.seed = lfm::derive_seed(ctx.seed, 40);
    const lfm::DesignGrid gridres = lfm::run_design_scan(dsc);
    fs::create_directories(o.out);
    lfm::emit_design_artifacts(gridres, o.out);
    const std::string metric = d.at("metric").get<std::string>();
    const lfm::OptimumB opt = lfm::optimum_b(gridres, metric);
    {
        const json oj = {{"metric", metric},
                         {"b_um", opt.b_um},
                         {"average", opt.average},
                         {"margin", opt.margin}};
        std::ofstream out(o.out + "/optimum.json");
        out << oj.dump(2) << "\n";
    }
    std::vector<std::string> outputs;
    for (const auto& e : fs::directory_iterator(o.out))
        outputs.push_back(e.path().string());
    std::sort(outputs.begin(), outputs.end());
    write_manifest(ctx, "design-scan", o.out + "/run-manifest.json",
                   json::object(), outputs);
    std::cout << "optimum " << metric << " at b = " << opt.b_um << " um\n";
    return 0;
}

int run_deconvolve(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const lfm::LightField4D lf = lfm::read_lf4d(o.lf);
    const lfm::PsfStack stack = lfm::read_psf_stack(o.psf);
    const lfm::Volume3D vol =
        lfm::richardson_lucy(lf, stack, deconv_from(ctx.cfg));
    ensure_parent(o.out);
    lfm::write_container(vol, o.out);
    write_manifest(ctx, "deconvolve", o.out + ".manifest.json",
                   {{"lf", o.lf}, {"psf", o.psf}}, {o.out});
    std::cout << "wrote " << o.out << "\n";
    return 0;
}

int run_align(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const json& a = ctx.cfg.at("align");
    const lfm::LightField4D lf = lfm::read_lf4d(o.lf);
    const lfm::PsfStack stack = lfm::read_psf_stack(o.psf);
    const lfm::Volume3D ref = lfm::read_volume3d(o.ref);
    const lfm::AlignmentResult res = lfm::align_tile(
        lf, stack, ref, a.at("threshold").get<double>(), deconv_from(ctx.cfg));
    const double range = lfm::compensate_depth(
        a.at("step_um").get<double>(), a.at("ratio_num").get<double>(),
        a.at("ratio_den").get<double>(), stack.depths_um.size());
    const json report = {{"dx", res.dx},
                         {"dy", res.dy},
                         {"peak_corr", res.peak_corr},
                         {"accepted", res.accepted},
                         {"threshold", res.threshold},
                         {"compensated_axial_range_um", range}};
    ensure_parent(o.out);
    {
        std::ofstream out(o.out);
        if (!out) throw lfm::IoError("cannot write report: " + o.out);
        out << report.dump(2) << "\n";
    }
    write_manifest(ctx, "align", o.out + ".manifest.json",
                   {{"lf", o.lf}, {"psf", o.psf}, {"ref", o.ref}}, {o.out});
    std::cout << report.dump() << "\n";
    return 0;
}

int run_dataset_build(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const json& a = ctx.cfg.at("align");
    const lfm::LightField4D lf = lfm::read_lf4d(o.lf);
    const lfm::Volume3D ref = lfm::read_volume3d(o.ref);
    const lfm::PsfStack stack = lfm::read_psf_stack(o.psf);
    const std::size_t tile = a.at("tile_lenslets").get<std::size_t>();
    if (tile == 0 || tile > lf.sx || tile > lf.sy)
        throw lfm::ConfigError("align.tile_lenslets must fit inside the light field");
    std::vector<lfm::LightField4D> tiles;
    for (std::size_t tx = 0; tx + tile <= lf.sx; tx += tile)
        for (std::size_t ty = 0; ty + tile <= lf.sy; ty += tile) {
            lfm::LightField4D t(lf.ax, lf.ay, tile, tile);
            for (std::size_t px = 0; px < lf.ax; ++px)
                for (std::size_t py = 0; py < lf.ay; ++py)
                    for (std::size_t i = 0; i < tile; ++i)
                        for (std::size_t j = 0; j < tile; ++j)
                            t.at(px, py, i, j) = lf.at(px, py, tx + i, ty + j);
            tiles.push_back(std::move(t));
        }
    lfm::DatasetBuildConfig cfg;
    cfg.threshold = a.at("threshold").get<double>();
    cfg.deconv = deconv_from(ctx.cfg);
    const lfm::DatasetBuildResult res =
        lfm::build_dataset(tiles, ref, stack, cfg);
    fs::create_directories(o.out);
    std::vector<std::string> outputs;
    char idx[16];
    for (std::size_t i = 0; i < res.pairs.size(); ++i) {
        std::snprintf(idx, sizeof idx, "%04zu", i);
        const std::string in_path = o.out + "/in_" + idx + ".lfc";
        const std::string target_path = o.out + "/target_" + idx + ".lfc";
        lfm::write_container(res.pairs[i].lf, in_path);
        lfm::write_container(res.pairs[i].vol, target_path);
        outputs.push_back(in_path);
        outputs.push_back(target_path);
    }
    {
        std::ofstream out(o.out + "/dataset.json");
        if (!out) throw lfm::IoError("cannot write dataset index");
        out << res.manifest.dump(2) << "\n";
    }
    outputs.push_back(o.out + "/dataset.json");
    write_manifest(ctx, "dataset-build", o.out + "/run-manifest.json",
                   {{"lf", o.lf}, {"ref", o.ref}, {"psf", o.psf}}, outputs);
    std::cout << "wrote " << res.pairs.size() << " pairs to " << o.out << "\n";
    return 0;
}

int run_train(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    std::vector<std::string> in_files;
    if (!fs::is_directory(o.data))
        throw lfm::IoError("data directory not found: " + o.data);
    for (const auto& e : fs::directory_iterator(o.data)) {
        const std::string n = e.path().filename().string();
        if (n.rfind("in_", 0) == 0 && n.size() > 7 &&
            n.compare(n.size() - 4, 4, ".lfc") == 0)
            in_files.push_back(e.path().string());
    }
    std::sort(in_files.begin(), in_files.end());
    if (in_files.empty())
        throw lfm::IoError("no in_*.lfc pairs under " + o.data);

    lfm::net::NetworkSpec spec =
        network_spec_from(ctx.cfg, lfm::derive_seed(ctx.seed, 30));
    std::vector<lfm::net::TrainPair> pairs;
    for (const std::string& f : in_files) {
        std::string tf = f;
        const std::size_t pos = tf.rfind("in_");
        tf.replace(pos, 3, "target_");
        pairs.push_back(lfm::net::make_train_pair(lfm::read_lf4d(f),
                                                  lfm::read_volume3d(tf), spec));
    }

    const json& t = ctx.cfg.at("train");
    lfm::net::TrainConfig tc;
    tc.epochs = t.at("epochs").get<std::size_t>();
    tc.batch = t.at("batch").get<std::size_t>();
    tc.lr = t.at("lr").get<double>();
    tc.beta1 = t.at("beta1").get<double>();
    tc.beta2 = t.at("beta2").get<double>();
    tc.adam_eps = t.at("adam_eps").get<double>();
    tc.val_fraction = t.at("val_fraction").get<double>();
    tc.seed = lfm::derive_seed(ctx.seed, 31);

    lfm::net::Network<float> net(spec);
    const lfm::net::TrainResult res = lfm::net::train(net, pairs, tc);

    ensure_parent(o.out);
    const json metadata = {{"seed", ctx.seed},
                           {"epochs", tc.epochs},
                           {"steps", res.steps},
                           {"best_epoch", res.best_epoch},
                           {"best_val", res.best_val},
                           {"step_loss", res.step_loss},
                           {"val_loss", res.val_loss}};
    lfm::net::save_checkpoint(net, o.out, metadata);
    {
        std::ofstream curve(o.out + ".loss.csv");
        if (!curve) throw lfm::IoError("cannot write loss curve");
        curve << "step,loss\n";
        char buf[64];
        for (std::size_t i = 0; i < res.step_loss.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1,
                          res.step_loss[i]);
            curve << buf;
        }
    }
    write_manifest(ctx, "train", o.out + ".manifest.json", {{"data", o.data}},
                   {o.out, o.out + ".loss.csv"});
    std::cout << "trained " << res.steps << " steps, best val " << res.best_val
              << " at epoch " << res.best_epoch + 1 << "\n";
    return 0;
}

int run_infer(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    lfm::net::Network<float> net = lfm::net::load_checkpoint(o.ckpt, nullptr);
    const lfm::LightField4D lf = lfm::read_lf4d(o.lf);
    const std::size_t pad =
        sub->count("--pad") ? o.pad : (net.spec.fov - 1) / 2;
    const lfm::Volume3D vol = o.tile > 0
                                  ? lfm::net::infer_tiled(net, lf, o.tile)
                                  : lfm::net::infer_full(net, lf, pad);
    ensure_parent(o.out);
    lfm::write_container(vol, o.out);
    write_manifest(ctx, "infer", o.out + ".manifest.json",
                   {{"ckpt", o.ckpt}, {"lf", o.lf}}, {o.out});
    std::cout << "wrote " << o.out << " (" << vol.depth << "x" << vol.vx << "x"
              << vol.vy << ")\n";
    return 0;
}

int run_eval(Opts& o, CLI::App* sub) {
    RunContext ctx = make_context(sub, o);
    const int window = ctx.cfg.at("eval").at("ssim_window").get<int>();
    json report;
    const std::string kind = lfm::peek_kind(o.ref);
    lfm::SsimParams sp;
    sp.window = window;
    if (kind == "vol3d") {
        const lfm::Volume3D ref = lfm::read_volume3d(o.ref);
        const lfm::Volume3D pred = lfm::read_volume3d(o.pred);
        const double peak = lfm::min_max(ref.data).max;
        report = {{"psnr_db", metric_json(lfm::psnr(pred, ref, peak))},
                  {"ssim", lfm::ssim(pred, ref, peak, sp)},
                  {"pearson", lfm::pearson(pred, ref)},
                  {"peak", peak}};
    } else if (kind == "img2d") {
        const lfm::Image2D ref = lfm::read_image2d(o.ref);
        const lfm::Image2D pred = lfm::read_image2d(o.pred);
        const double peak = lfm::min_max(ref.data).max;
        report = {{"psnr_db", metric_json(lfm::psnr(pred, ref, peak))},
                  {"ssim", lfm::ssim(pred, ref, peak, sp)},
                  {"pearson", lfm::pearson(pred, ref)},
                  {"peak", peak}};
    } else {
        throw lfm::IoError("eval supports vol3d and img2d containers, got " +
                           kind);
    }
    std::cout << report.dump(2) << "\n";
    if (!o.out.empty()) {
        ensure_parent(o.out);
        std::ofstream out(o.out);
        if (!out) throw lfm::IoError("cannot write report: " + o.out);
        out << report.dump(2) << "\n";
        write_manifest(ctx, "eval", o.out + ".manifest.json",
                       {{"pred", o.pred}, {"ref", o.ref}}, {o.out});
    }
    return 0;
}

void add_common(CLI::App* sub, Opts& o) {
    sub->add_option("--config", o.config, "JSON configuration file");
    sub->add_option("--seed", o.seed, "master seed (overrides the config)");
    sub->add_option("--threads", o.threads, "worker thread cap")
        ->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"light-field microscopy toolkit"};
    app.require_subcommand(1);
    Opts o;

    CLI::App* c_phantom = app.add_subcommand("phantom", "render a synthetic volume");
    add_common(c_phantom, o);
    c_phantom->add_option("--out", o.out)->required();

    CLI::App* c_simulate =
        app.add_subcommand("simulate", "project a volume to a light field");
    add_common(c_simulate, o);
    c_simulate->add_option("--vol", o.vol)->required();
    c_simulate->add_option("--psf", o.psf)->required();
    c_simulate->add_option("--out", o.out)->required();

    CLI::App* c_psf = app.add_subcommand("psf", "simulate a PSF stack");
    add_common(c_psf, o);
    c_psf->add_option("--out", o.out)->required();

    CLI::App* c_rectify =
        app.add_subcommand("rectify", "rectify a raw sensor image");
    add_common(c_rectify, o);
    c_rectify->add_option("--raw", o.raw)->required();
    c_rectify->add_option("--white", o.white)->required();
    c_rectify->add_option("--out", o.out)->required();

    CLI::App* c_design =
        app.add_subcommand("design-scan", "scan sensor distances and depths");
    add_common(c_design, o);
    c_design->add_option("--out", o.out, "output directory")->required();

    CLI::App* c_deconv =
        app.add_subcommand("deconvolve", "Richardson-Lucy reconstruction");
    add_common(c_deconv, o);
    c_deconv->add_option("--lf", o.lf)->required();
    c_deconv->add_option("--psf", o.psf)->required();
    c_deconv->add_option("--out", o.out)->required();
    c_deconv->add_option("--iterations", o.iterations,
                         "override deconv.iterations");

    CLI::App* c_align =
        app.add_subcommand("align", "register a tile against a reference");
    add_common(c_align, o);
    c_align->add_option("--lf", o.lf)->required();
    c_align->add_option("--psf", o.psf)->required();
    c_align->add_option("--ref", o.ref)->required();
    c_align->add_option("--out", o.out, "JSON report path")->required();

    CLI::App* c_dataset =
        app.add_subcommand("dataset-build", "align tiles and emit training pairs");
    add_common(c_dataset, o);
    c_dataset->add_option("--lf", o.lf)->required();
    c_dataset->add_option("--ref", o.ref)->required();
    c_dataset->add_option("--psf", o.psf)->required();
    c_dataset->add_option("--out", o.out, "output directory")->required();

    CLI::App* c_train = app.add_subcommand("train", "train the network");
    add_common(c_train, o);
    c_train->add_option("--data", o.data, "directory of in_/target_ pairs")
        ->required();
    c_train->add_option("--out", o.out, "checkpoint path")->required();
    c_train->add_option("--epochs", o.epochs, "override train.epochs");

    CLI::App* c_infer = app.add_subcommand("infer", "reconstruct a volume");
    add_common(c_infer, o);
    c_infer->add_option("--ckpt", o.ckpt)->required();
    c_infer->add_option("--lf", o.lf)->required();
    c_infer->add_option("--out", o.out)->required();
    c_infer->add_option("--pad", o.pad,
                        "reflect padding in lenslets (default (fov-1)/2)");
    c_infer->add_option("--tile", o.tile,
                        "tile extent in lenslets (0 = full frame)");

    CLI::App* c_eval = app.add_subcommand("eval", "compare two containers");
    add_common(c_eval, o);
    c_eval->add_option("--pred", o.pred)->required();
    c_eval->add_option("--ref", o.ref)->required();
    c_eval->add_option("--out", o.out, "optional JSON report path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        std::cerr << json{{"error", {{"type", "usage"}, {"message", e.what()}}}}
                         .dump()
                  << "\n";
        return 2;
    }

    const auto report = [](const char* type, const std::exception& e, int code) {
        std::cerr << json{{"error",
                           {{"type", type}, {"message", e.what()}}}}
                         .dump()
                  << "\n";
        return code;
    };
    try {
        if (c_phantom->parsed()) return run_phantom(o, c_phantom);
        if (c_simulate->parsed()) return run_simulate(o, c_simulate);
        if (c_psf->parsed()) return run_psf(o, c_psf);
        if (c_rectify->parsed()) return run_rectify(o, c_rectify);
        if (c_design->parsed()) return run_design_scan(o, c_design);
        if (c_deconv->parsed()) return run_deconvolve(o, c_deconv);
        if (c_align->parsed()) return run_align(o, c_align);
        if (c_dataset->parsed()) return run_dataset_build(o, c_dataset);
        if (c_train->parsed()) return run_train(o, c_train);
        if (c_infer->parsed()) return run_infer(o, c_infer);
        if (c_eval->parsed()) return run_eval(o, c_eval);
    } catch (const lfm::ConfigError& e) {
        return report("config", e, 2);
    } catch (const lfm::DimensionError& e) {
        return report("dimension", e, 2);
    } catch (const lfm::IoError& e) {
        return report("io", e, 3);
    } catch (const lfm::NumericError& e) {
        return report("numeric", e, 4);
    } catch (const std::exception& e) {
        return report("internal", e, 4);
    }
    return 0;
}
