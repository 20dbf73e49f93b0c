#include <cmath>
#include <vector>

#include "doctest.h"
#include "lfm/errors.hpp"
#include "lfm/lfcore.hpp"
#include "lfm/metrics.hpp"
#include "lfm/rng.hpp"
#include "test_util.hpp"

using namespace lfm;

TEST_CASE("spatial to angular reorders a 1D row as documented") {
    // One row, two lenslets of two pixels: [p0 p1 | p2 p3] regroups into
    // per-angle views [p0 p2 | p1 p3].
    Image2D img(4, 1);
    img.at(0, 0) = 0.0;
    img.at(1, 0) = 1.0;
    img.at(2, 0) = 2.0;
    img.at(3, 0) = 3.0;
    const Image2D ang = spatial_to_angular(img, 2, 1);
    CHECK(ang.at(0, 0) == 0.0);
    CHECK(ang.at(1, 0) == 2.0);
    CHECK(ang.at(2, 0) == 1.0);
    CHECK(ang.at(3, 0) == 3.0);
}

TEST_CASE("spatial to angular matches the index map exhaustively") {
    const std::size_t ax = 2, ay = 2, sx = 2, sy = 2;
    Image2D img(ax * sx, ay * sy);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        img.data[i] = static_cast<double>(i);
    const Image2D ang = spatial_to_angular(img, ax, ay);
    for (std::size_t a = 0; a < ax; ++a)
        for (std::size_t b = 0; b < ay; ++b)
            for (std::size_t u = 0; u < sx; ++u)
                for (std::size_t v = 0; v < sy; ++v)
                    CHECK(ang.at(a * sx + u, b * sy + v) ==
                          img.at(u * ax + a, v * ay + b));
}

TEST_CASE("angular round trip is bit exact") {
    Rng r(3);
    Image2D img(66, 78); // lenslet grids 11x13 at 6 pixels per lenslet
    for (double& v : img.data) v = r.uniform();
    const Image2D back = angular_to_spatial(spatial_to_angular(img, 6, 6), 6, 6);
    REQUIRE(back.width == img.width);
    REQUIRE(back.height == img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == img.data[i]);
    CHECK_THROWS_AS(spatial_to_angular(img, 7, 6), DimensionError);
}

TEST_CASE("light field and spatial forms are interchangeable") {
    Rng r(4);
    Image2D img(15, 15);
    for (double& v : img.data) v = r.uniform();
    const LightField4D lf = spatial_to_lf(img, 3, 3);
    CHECK(lf.ax == 3);
    CHECK(lf.sx == 5);
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b)
            for (std::size_t u = 0; u < 5; ++u)
                for (std::size_t v = 0; v < 5; ++v)
                    CHECK(lf.at(a, b, u, v) == img.at(u * 3 + a, v * 3 + b));
    const Image2D back = lf_to_spatial(lf);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        CHECK(back.data[i] == img.data[i]);

    const Image2D view = extract_view(lf, 1, 2);
    REQUIRE(view.width == 5);
    for (std::size_t u = 0; u < 5; ++u)
        for (std::size_t v = 0; v < 5; ++v)
            CHECK(view.at(u, v) == lf.at(1, 2, u, v));
}

TEST_CASE("rectify at matching grids with a flat white is the identity") {
    Rng r(5);
    Image2D raw(15, 15);
    for (double& v : raw.data) v = r.uniform(0.2, 1.0);
    const Image2D white(15, 15, 2.0);
    const LightField4D lf = rectify(raw, white, 5.0, 5);
    CHECK(lf.ax == 5);
    CHECK(lf.sx == 3);
    const Image2D out = lf_to_spatial(lf);
    for (std::size_t i = 0; i < raw.data.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(raw.data[i]).epsilon(1e-12));
}

TEST_CASE("rectify divides out the white image") {
    Image2D raw(10, 10), white(10, 10);
    for (std::size_t x = 0; x < 10; ++x)
        for (std::size_t y = 0; y < 10; ++y) {
            white.at(x, y) = (x < 5) ? 1.0 : 3.0;  // mean 2
            raw.at(x, y) = white.at(x, y) * 0.7;   // flat scene
        }
    const LightField4D lf = rectify(raw, white, 5.0, 5);
    const Image2D out = lf_to_spatial(lf);
    // Flat-field correction recovers a constant (scaled by the white mean).
    for (double v : out.data) CHECK(v == doctest::Approx(1.4).epsilon(1e-12));
}

namespace {

double smooth_scene(double x, double y) {
    // Lenslet-unit coordinates; periods of a few lenslets keep the scene
    // well inside the resampling band.
    return 0.5 + 0.2 * std::sin(2.0 * 3.14159265358979323846 * x / 3.7) +
           0.2 * std::cos(2.0 * 3.14159265358979323846 * y / 2.9);
}

} // namespace

TEST_CASE("rectifying a fractional-pitch capture restores the scene") {
    const double raw_ppl = 32.46;
    const std::size_t target = 33;
    const std::size_t raw_dim = 163; // covers five 32.46-pixel lenslets

    Image2D raw(raw_dim, raw_dim);
    for (std::size_t i = 0; i < raw_dim; ++i)
        for (std::size_t j = 0; j < raw_dim; ++j)
            raw.at(i, j) = smooth_scene((i + 0.5) / raw_ppl, (j + 0.5) / raw_ppl);
    const Image2D white(raw_dim, raw_dim, 1.0);

    const LightField4D lf = rectify(raw, white, raw_ppl, target);
    REQUIRE(lf.sx == 5);
    REQUIRE(lf.ax == target);
    const Image2D got = lf_to_spatial(lf);

    Image2D want(got.width, got.height);
    for (std::size_t i = 0; i < want.width; ++i)
        for (std::size_t j = 0; j < want.height; ++j)
            want.at(i, j) =
                smooth_scene((i + 0.5) / target, (j + 0.5) / target);

    const PsnrResult p = psnr(got, want, min_max(want.data).max);
    CHECK(!p.identical);
    CHECK(p.db > 40.0);

    // Resampling must not create or destroy light over the shared region.
    CHECK(testutil::rel_err(mean(got.data), mean(want.data)) < 0.005);
}

TEST_CASE("rectify validates its grid parameters") {
    Image2D raw(10, 10, 1.0), white(10, 10, 1.0);
    CHECK_THROWS_AS(rectify(raw, white, 0.5, 5), ConfigError);
    CHECK_THROWS_AS(rectify(raw, white, 5.0, 4), ConfigError);
    CHECK_THROWS_AS(rectify(raw, white, 5.0, 2), ConfigError);
    CHECK_THROWS_AS(rectify(raw, Image2D(9, 9, 1.0), 5.0, 5), DimensionError);
    CHECK_THROWS_AS(rectify(raw, Image2D(10, 10, 0.0), 5.0, 5), NumericError);
    CHECK_THROWS_AS(rectify(raw, white, 20.0, 5), DimensionError);
}

TEST_CASE("z projection averages depth slices") {
    Volume3D vol(3, 2, 2);
    for (std::size_t z = 0; z < 3; ++z)
        for (std::size_t x = 0; x < 2; ++x)
            for (std::size_t y = 0; y < 2; ++y)
                vol.at(z, x, y) = static_cast<double>(z) + 0.5 * x;
    const Image2D p = z_project_mean(vol);
    CHECK(p.at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(p.at(1, 1) == doctest::Approx(1.5).epsilon(1e-15));

    Volume3D single(1, 2, 2);
    single.at(0, 1, 0) = 4.0;
    const Image2D q = z_project_mean(single);
    CHECK(q.at(1, 0) == 4.0);
}

TEST_CASE("stitching constant tiles yields the constant everywhere") {
    Image2D tile(10, 10, 0.7);
    std::vector<std::pair<Image2D, TilePlacement>> tiles;
    for (std::size_t gx = 0; gx < 3; ++gx)
        for (std::size_t gy = 0; gy < 2; ++gy)
            tiles.push_back({tile, TilePlacement{gx, gy}});
    const Image2D mosaic = stitch_tiles(tiles, 0.2);
    for (double v : mosaic.data)
        CHECK(v == doctest::Approx(0.7).epsilon(1e-6));
}

TEST_CASE("overlap bands blend neighbors with complementary ramps") {
    const std::size_t w = 10;
    const double frac = 0.2; // band of 2 samples
    const std::size_t ov = 2;
    Image2D a(w, w, 0.0), b(w, w, 1.0);
    const Image2D mosaic = stitch_tiles(
        {{a, TilePlacement{0, 0}}, {b, TilePlacement{1, 0}}}, frac);
    const std::size_t step = w - ov;
    REQUIRE(mosaic.width == step + w);
    for (std::size_t c = 0; c < ov; ++c) {
        const double wa = stitch_weight_1d(step + c, w, ov); // leaving tile a
        const double wb = stitch_weight_1d(c, w, ov);        // entering tile b
        const double want = wb / (wa + wb);
        CHECK(mosaic.at(step + c, 5) == doctest::Approx(want).epsilon(1e-12));
    }
    // Outside the band each tile owns its pixels.
    CHECK(mosaic.at(step - 1, 5) == 0.0);
    CHECK(mosaic.at(step + ov, 5) == 1.0);
}

TEST_CASE("entering and leaving stitch weights are complementary") {
    const std::size_t w = 12, ov = 3;
    for (std::size_t c = 0; c < ov; ++c)
        CHECK(stitch_weight_1d(c, w, ov) + stitch_weight_1d(w - ov + c, w, ov) ==
              doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stitch_weight_1d(5, w, ov) == 1.0);
    CHECK(stitch_weight_1d(0, w, 0) == 1.0);
}

TEST_CASE("volume stitching matches the image path slice by slice") {
    Rng r(9);
    Volume3D t0(2, 8, 8), t1(2, 8, 8);
    for (double& v : t0.data) v = r.uniform();
    for (double& v : t1.data) v = r.uniform();
    const Volume3D mosaic = stitch_tiles(
        {{t0, TilePlacement{0, 0}}, {t1, TilePlacement{1, 0}}}, 0.25);
    for (std::size_t z = 0; z < 2; ++z) {
        const Image2D expect = stitch_tiles(
            {{t0.slice(z), TilePlacement{0, 0}},
             {t1.slice(z), TilePlacement{1, 0}}},
            0.25);
        const Image2D got = mosaic.slice(z);
        REQUIRE(got.width == expect.width);
        for (std::size_t i = 0; i < got.data.size(); ++i)
            CHECK(got.data[i] == doctest::Approx(expect.data[i]).epsilon(1e-12));
    }
}
