#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "doctest.h"
#include "lfm/container.hpp"
#include "lfm/rng.hpp"
#include "test_util.hpp"

using nlohmann::json;

namespace {

const std::string kCli = LFM_CLI_PATH;

int run(const std::string& args, const std::string& log) {
    const std::string cmd = kCli + " " + args + " > " + log + " 2>&1";
    const int st = std::system(cmd.c_str());
    if (st == -1) return -1;
    if (WIFEXITED(st)) return WEXITSTATUS(st);
    return -2;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

void write_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    out << j.dump(2) << "\n";
}

/// Shared tiny pipeline setup: a bar phantom on a 9x9 lenslet grid with
/// 5 pixels per lenslet and 4 depth planes.
json smoke_config() {
    return {
        {"seed", 3},
        {"phantom",
         {{"kind", "bars"},
          {"frequencies_lpmm", {125.0}}, // 8 um period = 4 voxels at 2 um
          {"nd", 4},
          {"vx", 9},
          {"vy", 9},
          {"lat_um", 2.0},
          {"ax_um", 1.0}}},
        {"deconv",
         {{"iterations", 3},
          {"psf",
           {{"ppl", 5}, {"rays", 20000}, {"nd", 4}, {"depth_step_um", 1.0}}}}},
        {"eval", {{"ssim_window", 5}}},
    };
}

} // namespace

TEST_CASE("help and usage errors use the documented exit codes") {
    testutil::TempDir tmp;
    CHECK(run("--help", tmp.file("h.log")) == 0);
    CHECK(run("phantom --help", tmp.file("h2.log")) == 0);
    CHECK(run("", tmp.file("none.log")) == 2);          // missing subcommand
    CHECK(run("phantom", tmp.file("miss.log")) == 2);   // missing --out
    CHECK(run("phantom --nope x --out y", tmp.file("flag.log")) == 2);
    CHECK(run("frobnicate", tmp.file("sub.log")) == 2);
}

TEST_CASE("unknown config keys are rejected before any work") {
    testutil::TempDir tmp;
    write_json(tmp.file("cfg.json"), {{"phantom", {{"vs", 9}}}});
    CHECK(run("phantom --config " + tmp.file("cfg.json") + " --out " +
                  tmp.file("v.lfc"),
              tmp.file("log")) == 2);
    const std::string err = testutil::read_bytes(tmp.file("log"));
    CHECK(err.find("unknown key") != std::string::npos);

    std::ofstream(tmp.file("broken.json")) << "{ not json";
    CHECK(run("phantom --config " + tmp.file("broken.json") + " --out " +
                  tmp.file("v.lfc"),
              tmp.file("log2")) == 2);
}

TEST_CASE("missing inputs exit with the io code") {
    testutil::TempDir tmp;
    CHECK(run("simulate --vol " + tmp.file("no.lfc") + " --psf " +
                  tmp.file("no.psf") + " --out " + tmp.file("o.lfc"),
              tmp.file("log")) == 3);
    CHECK(run("train --data " + tmp.file("nowhere") + " --out " +
                  tmp.file("c.lfmw"),
              tmp.file("log2")) == 3);
}

TEST_CASE("phantom writes a readable container and a manifest") {
    testutil::TempDir tmp;
    write_json(tmp.file("cfg.json"), smoke_config());
    const std::string vol = tmp.file("vol.lfc");
    REQUIRE(run("phantom --config " + tmp.file("cfg.json") + " --out " + vol,
                tmp.file("log")) == 0);

    CHECK(lfm::peek_kind(vol) == "vol3d");
    const lfm::Volume3D v = lfm::read_volume3d(vol);
    CHECK(v.depth == 4);
    CHECK(v.vx == 9);
    CHECK(v.vy == 9);
    CHECK(lfm::min_max(v.data).max == 1.0);

    const json m = read_json(vol + ".manifest.json");
    CHECK(m.at("subcommand") == "phantom");
    CHECK(m.at("seed") == 3);
    CHECK(m.at("outputs") == json::array({vol}));
    CHECK(m.contains("config_hash"));
    CHECK(m.at("format_versions").at("container") == 1);
}

TEST_CASE("the phantom to evaluation pipeline runs end to end") {
    testutil::TempDir tmp;
    const std::string cfg = tmp.file("cfg.json");
    write_json(cfg, smoke_config());
    const std::string vol = tmp.file("vol.lfc"), psf = tmp.file("psf.lfc");
    const std::string lf = tmp.file("lf.lfc"), rec = tmp.file("rec.lfc");

    REQUIRE(run("phantom --config " + cfg + " --out " + vol, tmp.file("1")) == 0);
    REQUIRE(run("psf --config " + cfg + " --out " + psf, tmp.file("2")) == 0);
    REQUIRE(run("simulate --config " + cfg + " --vol " + vol + " --psf " + psf +
                    " --out " + lf,
                tmp.file("3")) == 0);
    CHECK(lfm::peek_kind(lf) == "lf4d");
    const lfm::LightField4D field = lfm::read_lf4d(lf);
    CHECK(field.ax == 5);
    CHECK(field.sx == 9);

    REQUIRE(run("deconvolve --config " + cfg + " --lf " + lf + " --psf " + psf +
                    " --out " + rec + " --iterations 3",
                tmp.file("4")) == 0);
    const lfm::Volume3D recon = lfm::read_volume3d(rec);
    CHECK(recon.depth == 4);
    CHECK(recon.vx == 9);
    for (double x : recon.data) CHECK(x >= 0.0);

    const std::string report = tmp.file("report.json");
    REQUIRE(run("eval --config " + cfg + " --pred " + rec + " --ref " + vol +
                    " --out " + report,
                tmp.file("5")) == 0);
    const json r = read_json(report);
    CHECK(r.at("psnr_db").is_number());
    CHECK(r.at("ssim").is_number());
    CHECK(r.at("peak") == 1.0);

    // Same seed, same inputs: the light field must be byte-identical.
    const std::string lf2 = tmp.file("lf2.lfc");
    REQUIRE(run("simulate --config " + cfg + " --vol " + vol + " --psf " + psf +
                    " --out " + lf2,
                tmp.file("6")) == 0);
    CHECK(testutil::read_bytes(lf) == testutil::read_bytes(lf2));
}

TEST_CASE("evaluating a container against itself reports identity") {
    testutil::TempDir tmp;
    lfm::Volume3D v(2, 6, 6);
    lfm::Rng r(9);
    for (double& x : v.data) x = r.uniform(0.0, 1.0);
    const std::string path = tmp.file("v.lfc");
    lfm::write_container(v, path);

    write_json(tmp.file("cfg.json"), {{"eval", {{"ssim_window", 5}}}});
    const std::string report = tmp.file("r.json");
    REQUIRE(run("eval --config " + tmp.file("cfg.json") + " --pred " + path +
                    " --ref " + path + " --out " + report,
                tmp.file("log")) == 0);
    const json rep = read_json(report);
    CHECK(rep.at("psnr_db") == "identical");
    CHECK(rep.at("ssim") == 1.0);
    CHECK(rep.at("pearson").get<double>() > 1.0 - 1e-9);
}

TEST_CASE("eval rejects light field containers") {
    testutil::TempDir tmp;
    lfm::LightField4D lf(3, 3, 2, 2);
    const std::string path = tmp.file("lf.lfc");
    lfm::write_container(lf, path);
    CHECK(run("eval --pred " + path + " --ref " + path, tmp.file("log")) == 3);
}

TEST_CASE("rectify resamples a raw frame through the cli") {
    testutil::TempDir tmp;
    lfm::Image2D raw(15, 15);
    lfm::Rng r(11);
    for (double& x : raw.data) x = r.uniform(0.1, 1.0);
    lfm::Image2D white(15, 15);
    std::fill(white.data.begin(), white.data.end(), 2.0);
    lfm::write_container(raw, tmp.file("raw.lfc"));
    lfm::write_container(white, tmp.file("white.lfc"));

    write_json(tmp.file("cfg.json"),
               {{"align", {{"raw_ppl", 5.0}, {"target_ppl", 5}}}});
    REQUIRE(run("rectify --config " + tmp.file("cfg.json") + " --raw " +
                    tmp.file("raw.lfc") + " --white " + tmp.file("white.lfc") +
                    " --out " + tmp.file("lf.lfc"),
                tmp.file("log")) == 0);
    const lfm::LightField4D lf = lfm::read_lf4d(tmp.file("lf.lfc"));
    CHECK(lf.ax == 5);
    CHECK(lf.sx == 3);
}

TEST_CASE("training and inference run from fabricated pairs") {
    testutil::TempDir tmp;
    lfm::Rng r(21);
    const std::size_t a = 7, s = 5, nd = 4, o = 3;
    for (int k = 0; k < 2; ++k) {
        lfm::LightField4D lf(a, a, s, s);
        for (double& v : lf.data) v = r.uniform(0.0, 1.0);
        lfm::Volume3D vol(nd, a * o, a * o);
        for (double& v : vol.data) v = r.uniform(0.0, 1.0);
        char idx[8];
        std::snprintf(idx, sizeof idx, "%04d", k);
        lfm::write_container(lf, tmp.file("in_" + std::string(idx) + ".lfc"));
        lfm::write_container(vol,
                             tmp.file("target_" + std::string(idx) + ".lfc"));
    }

    const json cfg = {
        {"network",
         {{"fov", 3},
          {"nd", 4},
          {"a", {7, 7}},
          {"preset", "compact"},
          {"base_channels", 2}}},
        {"train", {{"epochs", 2}, {"batch", 2}, {"val_fraction", 0.2}}},
    };
    write_json(tmp.file("cfg.json"), cfg);

    const std::string ckpt = tmp.file("net.lfmw");
    REQUIRE(run("train --config " + tmp.file("cfg.json") + " --data " +
                    tmp.path().string() + " --out " + ckpt,
                tmp.file("tlog")) == 0);
    CHECK(testutil::read_bytes(ckpt).substr(0, 4) == "LFMW");
    const std::string curve = testutil::read_bytes(ckpt + ".loss.csv");
    CHECK(curve.rfind("step,loss\n", 0) == 0);

    const std::string rec = tmp.file("rec.lfc");
    REQUIRE(run("infer --config " + tmp.file("cfg.json") + " --ckpt " + ckpt +
                    " --lf " + tmp.file("in_0000.lfc") + " --out " + rec,
                tmp.file("ilog")) == 0);
    const lfm::Volume3D vol = lfm::read_volume3d(rec);
    CHECK(vol.depth == nd);
    CHECK(vol.vx == a * s);

    // Tiled inference must reproduce the full pass byte for byte.
    const std::string rec2 = tmp.file("rec_tiled.lfc");
    REQUIRE(run("infer --config " + tmp.file("cfg.json") + " --ckpt " + ckpt +
                    " --lf " + tmp.file("in_0000.lfc") + " --out " + rec2 +
                    " --tile 2",
                tmp.file("ilog2")) == 0);
    CHECK(testutil::read_bytes(rec) == testutil::read_bytes(rec2));
}

TEST_CASE("the design scan emits stable artifacts") {
    testutil::TempDir tmp;
    const json cfg = {
        {"design",
         {{"b_values_um", {2400.0, 2500.0}},
          {"depths_um", {-2.0, 2.0}},
          {"frequencies_lpmm", {15.0, 30.0}},
          {"lenslets", 9},
          {"target_ppl", 7},
          {"rays", 20000}}},
    };
    write_json(tmp.file("cfg.json"), cfg);

    const std::string out = tmp.file("scan");
    REQUIRE(run("design-scan --config " + tmp.file("cfg.json") + " --out " + out,
                tmp.file("log")) == 0);
    const json opt = read_json(out + "/optimum.json");
    CHECK((opt.at("b_um") == 2400.0 || opt.at("b_um") == 2500.0));
    const std::string grid = testutil::read_bytes(out + "/grid.csv");
    CHECK(grid.find("b_um") != std::string::npos);

    const std::string out2 = tmp.file("scan2");
    REQUIRE(run("design-scan --config " + tmp.file("cfg.json") + " --out " +
                    out2,
                tmp.file("log2")) == 0);
    CHECK(grid == testutil::read_bytes(out2 + "/grid.csv"));
}
