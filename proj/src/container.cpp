#include "lfm/container.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "lfm/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

namespace lfm {

namespace {

constexpr char kMagic[4] = {'L', 'F', 'M', '1'};

std::size_t dims_product(const std::vector<std::size_t>& dims) {
    std::size_t n = 1;
    for (std::size_t d : dims) n *= d;
    return n;
}

nlohmann::json header_json(const ContainerBlob& blob) {
    nlohmann::json h;
    h["kind"] = blob.kind;
    h["dims"] = blob.dims;
    h["dtype"] = "f32";
    h["axis_order"] = blob.axis_order;
    h["meta"] = blob.meta.is_null() ? nlohmann::json::object() : blob.meta;
    return h;
}

nlohmann::json read_header(std::ifstream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("bad magic in container file: " + path);
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    if (!in || hlen == 0 || hlen > (1u << 27))
        throw IoError("bad header length in container file: " + path);
    std::string htext(hlen, '\0');
    in.read(htext.data(), hlen);
    if (!in) throw IoError("truncated header in container file: " + path);
    nlohmann::json h = nlohmann::json::parse(htext, nullptr, false);
    if (h.is_discarded() || !h.is_object())
        throw IoError("unparsable header in container file: " + path);
    return h;
}

} // namespace

void write_blob(const ContainerBlob& blob, const std::string& path) {
    if (blob.dims.size() != blob.axis_order.size())
        throw DimensionError("container: dims/axis_order rank mismatch");
    if (dims_product(blob.dims) != blob.payload.size())
        throw DimensionError("container: dims do not match payload length");

    const std::string htext = header_json(blob).dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    const std::uint32_t hlen = static_cast<std::uint32_t>(htext.size());
    out.write(reinterpret_cast<const char*>(&hlen), 4);
    out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    out.write(reinterpret_cast<const char*>(blob.payload.data()),
              static_cast<std::streamsize>(blob.payload.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

ContainerBlob read_blob(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open container file: " + path);
    const nlohmann::json h = read_header(in, path);

    ContainerBlob blob;
    try {
        blob.kind = h.at("kind").get<std::string>();
        if (h.at("dtype").get<std::string>() != "f32")
            throw IoError("unsupported dtype in container file: " + path);
        blob.dims = h.at("dims").get<std::vector<std::size_t>>();
        blob.axis_order = h.at("axis_order").get<std::vector<std::string>>();
        blob.meta = h.value("meta", nlohmann::json::object());
    } catch (const nlohmann::json::exception&) {
        throw IoError("malformed header fields in container file: " + path);
    }
    if (blob.dims.size() != blob.axis_order.size())
        throw IoError("dims/axis_order rank mismatch in container file: " + path);

    const std::size_t count = dims_product(blob.dims);
    blob.payload.resize(count);
    in.read(reinterpret_cast<char*>(blob.payload.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != count * sizeof(float))
        throw IoError("truncated payload in container file: " + path);
    in.peek();
    if (!in.eof())
        throw IoError("payload longer than declared dims in container file: " + path);
    for (float v : blob.payload)
        if (!std::isfinite(v))
            throw IoError("non-finite payload value in container file: " + path);
    return blob;
}

std::string peek_kind(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open container file: " + path);
    const nlohmann::json h = read_header(in, path);
    if (!h.contains("kind") || !h["kind"].is_string())
        throw IoError("missing kind in container file: " + path);
    return h["kind"].get<std::string>();
}

void write_container(const Image2D& img, const std::string& path) {
    ContainerBlob blob;
    blob.kind = "img2d";
    blob.dims = {img.width, img.height};
    blob.axis_order = {"x", "y"};
    blob.meta = img.meta;
    blob.payload.reserve(img.data.size());
    for (double v : img.data) blob.payload.push_back(static_cast<float>(v));
    write_blob(blob, path);
}

void write_container(const Volume3D& vol, const std::string& path) {
    ContainerBlob blob;
    blob.kind = "vol3d";
    blob.dims = {vol.depth, vol.vx, vol.vy};
    blob.axis_order = {"z", "x", "y"};
    blob.meta = vol.meta;
    blob.payload.reserve(vol.data.size());
    for (double v : vol.data) blob.payload.push_back(static_cast<float>(v));
    write_blob(blob, path);
}

void write_container(const LightField4D& lf, const std::string& path) {
    ContainerBlob blob;
    blob.kind = "lf4d";
    blob.dims = {lf.ax, lf.ay, lf.sx, lf.sy};
    blob.axis_order = {"a_x", "a_y", "s_x", "s_y"};
    blob.meta = lf.meta;
    blob.payload.reserve(lf.data.size());
    for (double v : lf.data) blob.payload.push_back(static_cast<float>(v));
    write_blob(blob, path);
}

std::variant<Image2D, Volume3D, LightField4D> read_container(const std::string& path) {
    ContainerBlob blob = read_blob(path);
    if (blob.kind == "img2d") {
        if (blob.dims.size() != 2)
            throw IoError("img2d container must have 2 dims: " + path);
        Image2D img(blob.dims[0], blob.dims[1]);
        for (std::size_t i = 0; i < blob.payload.size(); ++i)
            img.data[i] = static_cast<double>(blob.payload[i]);
        img.meta = blob.meta;
        return img;
    }
    if (blob.kind == "vol3d") {
        if (blob.dims.size() != 3)
            throw IoError("vol3d container must have 3 dims: " + path);
        Volume3D vol(blob.dims[0], blob.dims[1], blob.dims[2]);
        for (std::size_t i = 0; i < blob.payload.size(); ++i)
            vol.data[i] = static_cast<double>(blob.payload[i]);
        vol.meta = blob.meta;
        return vol;
    }
    if (blob.kind == "lf4d") {
        if (blob.dims.size() != 4)
            throw IoError("lf4d container must have 4 dims: " + path);
        LightField4D lf(blob.dims[0], blob.dims[1], blob.dims[2], blob.dims[3]);
        for (std::size_t i = 0; i < blob.payload.size(); ++i)
            lf.data[i] = static_cast<double>(blob.payload[i]);
        lf.meta = blob.meta;
        return lf;
    }
    throw IoError("unsupported container kind '" + blob.kind + "': " + path);
}

Image2D read_image2d(const std::string& path) {
    auto v = read_container(path);
    if (auto* img = std::get_if<Image2D>(&v)) return std::move(*img);
    throw IoError("expected img2d container: " + path);
}

Volume3D read_volume3d(const std::string& path) {
    auto v = read_container(path);
    if (auto* vol = std::get_if<Volume3D>(&v)) return std::move(*vol);
    throw IoError("expected vol3d container: " + path);
}

LightField4D read_lf4d(const std::string& path) {
    auto v = read_container(path);
    if (auto* lf = std::get_if<LightField4D>(&v)) return std::move(*lf);
    throw IoError("expected lf4d container: " + path);
}

void write_pgm(const Image2D& img, const std::string& path, int bits) {
    if (bits != 8 && bits != 16)
        throw ConfigError("write_pgm: bits must be 8 or 16");
    if (img.size() == 0) throw DimensionError("write_pgm: empty image");
    const MinMax mm = min_max(img.data);
    const double span = mm.max - mm.min;
    const double maxval = bits == 8 ? 255.0 : 65535.0;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "P5\n" << img.width << " " << img.height << "\n"
        << static_cast<int>(maxval) << "\n";
    // PGM raster is row-major top to bottom; rows map to y, columns to x.
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const double t = span > 0.0 ? (img.at(x, y) - mm.min) / span : 0.0;
            const std::uint32_t q =
                static_cast<std::uint32_t>(std::lround(t * maxval));
            if (bits == 8) {
                const unsigned char b = static_cast<unsigned char>(q);
                out.write(reinterpret_cast<const char*>(&b), 1);
            } else {
                // 16-bit PGM samples are big-endian.
                const unsigned char hi = static_cast<unsigned char>(q >> 8);
                const unsigned char lo = static_cast<unsigned char>(q & 0xff);
                out.write(reinterpret_cast<const char*>(&hi), 1);
                out.write(reinterpret_cast<const char*>(&lo), 1);
            }
        }
    }
    if (!out) throw IoError("write failed: " + path);

    nlohmann::json side;
    side["min"] = mm.min;
    side["max"] = mm.max;
    side["bits"] = bits;
    std::ofstream sc(path + ".json");
    if (!sc) throw IoError("cannot open for writing: " + path + ".json");
    sc << side.dump(2) << "\n";
}

} // namespace lfm
