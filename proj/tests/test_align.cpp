#include <cmath>
#include <vector>

#include "doctest.h"
#include "lfm/align.hpp"
#include "lfm/errors.hpp"
#include "lfm/lfcore.hpp"
#include "lfm/metrics.hpp"
#include "lfm/phantom.hpp"
#include "lfm/rng.hpp"
#include "test_util.hpp"

using namespace lfm;
using testutil::gaussian_stack;

namespace {

Volume3D tube_reference(std::size_t nd, std::size_t lateral, std::uint64_t seed,
                        std::size_t tubes = 6) {
    PhantomSpec spec;
    spec.kind = PhantomSpec::Kind::tubes;
    spec.tube_count = tubes;
    spec.seed = seed;
    return render_phantom(spec, nd, lateral, lateral, 1.0, 1.0);
}

Volume3D crop_volume(const Volume3D& v, std::size_t x0, std::size_t y0,
                     std::size_t w, std::size_t h) {
    Volume3D out(v.depth, w, h);
    for (std::size_t z = 0; z < v.depth; ++z)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t y = 0; y < h; ++y)
                out.at(z, x, y) = v.at(z, x0 + x, y0 + y);
    return out;
}

} // namespace

TEST_CASE("ncc map peaks at one for an exact crop") {
    const Volume3D ref = tube_reference(1, 24, 51);
    const Image2D img = z_project_mean(ref);
    const Image2D tmpl = [&] {
        Image2D t(9, 9);
        for (std::size_t x = 0; x < 9; ++x)
            for (std::size_t y = 0; y < 9; ++y) t.at(x, y) = img.at(7 + x, 4 + y);
        return t;
    }();
    const Image2D map = ncc_map(tmpl, img);
    REQUIRE(map.width == 16);
    REQUIRE(map.height == 16);
    CHECK(std::abs(map.at(7, 4) - 1.0) < 1e-12);
    for (std::size_t x = 0; x < map.width; ++x)
        for (std::size_t y = 0; y < map.height; ++y)
            CHECK(map.at(x, y) <= map.at(7, 4) + 1e-12);
}

TEST_CASE("ncc map equals a per-offset correlation oracle") {
    Rng r(3);
    Image2D ref(8, 8), tmpl(5, 5);
    for (double& v : ref.data) v = r.uniform();
    for (double& v : tmpl.data) v = r.uniform();
    const Image2D map = ncc_map(tmpl, ref);
    REQUIRE(map.width == 4);
    for (std::size_t ox = 0; ox < map.width; ++ox)
        for (std::size_t oy = 0; oy < map.height; ++oy) {
            std::vector<double> a, b;
            for (std::size_t i = 0; i < 5; ++i)
                for (std::size_t j = 0; j < 5; ++j) {
                    a.push_back(tmpl.at(i, j));
                    b.push_back(ref.at(ox + i, oy + j));
                }
            CHECK(std::abs(map.at(ox, oy) - pearson(a, b)) < 1e-10);
        }
}

TEST_CASE("zero-variance windows score zero and templates must vary") {
    // 0.5 sums and averages exactly, so the flat window's variance is a
    // true zero rather than accumulated rounding noise.
    Image2D ref(10, 10, 0.5);
    Rng r(5);
    for (std::size_t x = 6; x < 10; ++x)
        for (std::size_t y = 0; y < 10; ++y) ref.at(x, y) = r.uniform();
    Image2D tmpl(4, 4);
    for (double& v : tmpl.data) v = r.uniform();
    const Image2D map = ncc_map(tmpl, ref);
    CHECK(map.at(0, 0) == 0.0); // fully inside the flat region
    CHECK_THROWS_AS(ncc_map(Image2D(4, 4, 1.0), ref), NumericError);
    CHECK_THROWS_AS(ncc_map(Image2D(12, 4, 1.0), ref), DimensionError);
}

TEST_CASE("ncc map is invariant to affine template changes") {
    Rng r(7);
    Image2D ref(12, 12), tmpl(6, 6);
    for (double& v : ref.data) v = r.uniform();
    for (double& v : tmpl.data) v = r.uniform();
    Image2D scaled = tmpl;
    for (double& v : scaled.data) v = 4.2 * v + 0.7;
    const Image2D m1 = ncc_map(tmpl, ref);
    const Image2D m2 = ncc_map(scaled, ref);
    for (std::size_t i = 0; i < m1.data.size(); ++i)
        CHECK(std::abs(m1.data[i] - m2.data[i]) < 1e-9);
}

TEST_CASE("planted integer shifts are recovered exactly") {
    // Sub-lenslet offsets only stay identifiable when the stack carries one
    // class per sub-lenslet voxel; a shift-invariant stack collapses every
    // lenslet column and quantizes the correlation peak to the lenslet
    // pitch. A dense reference keeps every candidate window textured.
    const std::size_t a = 5, nd = 3, ref_lens = 11, tile_lens = 5;
    const PsfStack st = testutil::periodic_gaussian_stack(a, nd, 1, 1.2, 0.5);
    const Volume3D ref = tube_reference(nd, ref_lens * a, 61, 40);

    DeconvConfig dc;
    dc.iterations = 8;
    dc.voxels_per_lenslet = a;
    dc.mode = ProjectionMode::periodic;

    Rng r(62);
    const std::size_t span = (ref_lens - tile_lens) * a;
    for (int cse = 0; cse < 5; ++cse) {
        const std::size_t dx = r.uniform_index(span + 1);
        const std::size_t dy = r.uniform_index(span + 1);
        const Volume3D window =
            crop_volume(ref, dx, dy, tile_lens * a, tile_lens * a);
        const LightField4D tile =
            forward_project(window, st, ProjectionMode::periodic, a);
        const AlignmentResult res = align_tile(tile, st, ref, 0.59, dc);
        CHECK(res.accepted);
        CHECK(res.dx == static_cast<long>(dx));
        CHECK(res.dy == static_cast<long>(dy));
    }
}

TEST_CASE("a noise reference is rejected at the default threshold") {
    const std::size_t a = 5, nd = 3, tile_lens = 5;
    const PsfStack st = gaussian_stack(a, nd, 1, 1.2, 0.5);
    const Volume3D content = tube_reference(nd, tile_lens * a, 63);
    const LightField4D tile =
        forward_project(content, st, ProjectionMode::invariant, a);

    Volume3D noise(nd, 9 * a, 9 * a);
    Rng r(64);
    for (double& v : noise.data) v = r.uniform();

    DeconvConfig dc;
    dc.iterations = 8;
    dc.voxels_per_lenslet = a;
    const AlignmentResult res = align_tile(tile, st, noise, 0.59, dc);
    CHECK(!res.accepted);
    CHECK(res.peak_corr < 0.59);
}

TEST_CASE("depth compensation scales the axial range exactly") {
    CHECK(compensate_depth(0.9, 1.0, 1.44, 64) == 40.0);
    CHECK(compensate_depth(1.0, 1.0, 1.0, 10) == 10.0);
    CHECK_THROWS_AS(compensate_depth(0.0, 1.0, 1.44, 64), ConfigError);
    CHECK_THROWS_AS(compensate_depth(0.9, -1.0, 1.44, 64), ConfigError);
    CHECK_THROWS_AS(compensate_depth(0.9, 1.0, 0.0, 64), ConfigError);
    CHECK_THROWS_AS(compensate_depth(0.9, 1.0, 1.44, 0), ConfigError);
}

TEST_CASE("dataset builder pairs accepted tiles with bit-exact crops") {
    const std::size_t a = 5, nd = 3, ref_lens = 11, tile_lens = 5;
    const PsfStack st = testutil::periodic_gaussian_stack(a, nd, 1, 1.2, 0.5);
    const Volume3D ref = tube_reference(nd, ref_lens * a, 65, 40);

    const std::vector<std::pair<std::size_t, std::size_t>> shifts{
        {0, 0}, {10, 17}, {23, 5}};
    std::vector<LightField4D> tiles;
    for (const auto& [dx, dy] : shifts) {
        const Volume3D window =
            crop_volume(ref, dx, dy, tile_lens * a, tile_lens * a);
        tiles.push_back(forward_project(window, st, ProjectionMode::periodic, a));
    }

    DatasetBuildConfig cfg;
    cfg.deconv.iterations = 8;
    cfg.deconv.voxels_per_lenslet = a;
    cfg.deconv.mode = ProjectionMode::periodic;
    const DatasetBuildResult out = build_dataset(tiles, ref, st, cfg);
    REQUIRE(out.pairs.size() == shifts.size());
    CHECK(out.manifest["accepted_count"] == shifts.size());
    CHECK(out.manifest["rejected_count"] == 0);

    for (std::size_t i = 0; i < out.pairs.size(); ++i) {
        const auto& [dx, dy] = shifts[i];
        CHECK(out.pairs[i].provenance["shift"][0] == static_cast<long>(dx));
        CHECK(out.pairs[i].provenance["shift"][1] == static_cast<long>(dy));
        const Volume3D want =
            crop_volume(ref, dx, dy, tile_lens * a, tile_lens * a);
        REQUIRE(out.pairs[i].vol.data.size() == want.data.size());
        for (std::size_t j = 0; j < want.data.size(); ++j)
            CHECK(out.pairs[i].vol.data[j] == want.data[j]);
    }

    // Rerunning the build reproduces the manifest verbatim.
    const DatasetBuildResult again = build_dataset(tiles, ref, st, cfg);
    CHECK(again.manifest.dump() == out.manifest.dump());

    DatasetBuildConfig bad = cfg;
    bad.deconv.voxels_per_lenslet = 1;
    CHECK_THROWS_AS(build_dataset(tiles, ref, st, bad), ConfigError);
}
