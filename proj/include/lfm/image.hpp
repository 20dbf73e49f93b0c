#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfm/errors.hpp"

namespace lfm {

/// 2-D image, row-major with axis order (x, y): y is the fastest axis.
/// Pixels are stored as double in memory; files store f32 (see container.hpp).
struct Image2D {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> data;
    nlohmann::json meta = nlohmann::json::object();

    Image2D() = default;
    Image2D(std::size_t w, std::size_t h, double fill = 0.0)
        : width(w), height(h), data(w * h, fill) {}

    double& at(std::size_t x, std::size_t y) { return data[x * height + y]; }
    double at(std::size_t x, std::size_t y) const { return data[x * height + y]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Image2D& o) const {
        return width == o.width && height == o.height;
    }
};

/// 3-D volume with axis order (z, x, y): depth slowest, y fastest.
struct Volume3D {
    std::size_t depth = 0; // number of axial planes
    std::size_t vx = 0;
    std::size_t vy = 0;
    std::vector<double> data;
    nlohmann::json meta = nlohmann::json::object();

    Volume3D() = default;
    Volume3D(std::size_t d, std::size_t x, std::size_t y, double fill = 0.0)
        : depth(d), vx(x), vy(y), data(d * x * y, fill) {}

    double& at(std::size_t z, std::size_t x, std::size_t y) {
        return data[(z * vx + x) * vy + y];
    }
    double at(std::size_t z, std::size_t x, std::size_t y) const {
        return data[(z * vx + x) * vy + y];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const Volume3D& o) const {
        return depth == o.depth && vx == o.vx && vy == o.vy;
    }

    Image2D slice(std::size_t z) const {
        Image2D out(vx, vy);
        for (std::size_t x = 0; x < vx; ++x)
            for (std::size_t y = 0; y < vy; ++y)
                out.at(x, y) = at(z, x, y);
        return out;
    }
};

/// 4-D light field with axis order (a_x, a_y, s_x, s_y):
/// angular indices within a lenslet first, then the lenslet grid.
struct LightField4D {
    std::size_t ax = 0;
    std::size_t ay = 0;
    std::size_t sx = 0;
    std::size_t sy = 0;
    std::vector<double> data;
    nlohmann::json meta = nlohmann::json::object();

    LightField4D() = default;
    LightField4D(std::size_t a_x, std::size_t a_y, std::size_t s_x,
                 std::size_t s_y, double fill = 0.0)
        : ax(a_x), ay(a_y), sx(s_x), sy(s_y),
          data(a_x * a_y * s_x * s_y, fill) {}

    double& at(std::size_t a_x, std::size_t a_y, std::size_t s_x,
               std::size_t s_y) {
        return data[((a_x * ay + a_y) * sx + s_x) * sy + s_y];
    }
    double at(std::size_t a_x, std::size_t a_y, std::size_t s_x,
              std::size_t s_y) const {
        return data[((a_x * ay + a_y) * sx + s_x) * sy + s_y];
    }

    std::size_t size() const { return data.size(); }
    bool same_shape(const LightField4D& o) const {
        return ax == o.ax && ay == o.ay && sx == o.sx && sy == o.sy;
    }
};

/// Min/max over a buffer; throws NumericError on empty input.
struct MinMax {
    double min = 0.0;
    double max = 0.0;
};
MinMax min_max(const std::vector<double>& v);

double sum(const std::vector<double>& v);
double mean(const std::vector<double>& v);

} // namespace lfm
