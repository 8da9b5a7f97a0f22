#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "s2l/error.hpp"
#include "s2l/io.hpp"
#include "s2l/refine.hpp"

namespace s2l::refine {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFF);
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos, const std::string& origin) {
    if (pos + 4 > in.size()) throw ParseError(origin + ": truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

std::filesystem::path frames_sidecar(const std::filesystem::path& path) {
    auto p = path;
    p += ".frames.csv";
    return p;
}

}  // namespace

void write_float_matrix(const std::filesystem::path& path, const FloatMatrixFile& file) {
    if (static_cast<std::size_t>(file.n) * file.dim != file.values.size()) {
        throw ArgumentError("float matrix holds " + std::to_string(file.values.size()) + " values, expected n * dim");
    }
    std::string out;
    out.reserve(24 + file.values.size() * 4);
    put_u32(out, kEmbeddingMagic);
    put_u32(out, file.shape.empty() ? kEmbeddingVersion : kTensorVersion);
    put_u32(out, file.n);
    put_u32(out, file.dim);
    if (!file.shape.empty()) {
        put_u32(out, static_cast<std::uint32_t>(file.shape.size()));
        for (auto d : file.shape) put_u32(out, d);
    }
    for (float f : file.values) {
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    io::write_atomic(path, out);
}

FloatMatrixFile read_float_matrix(const std::filesystem::path& path) {
    const std::string in = io::read_text(path);
    const std::string origin = path.string();
    std::size_t pos = 0;
    if (get_u32(in, pos, origin) != kEmbeddingMagic) throw ParseError(origin + ": bad magic");
    const auto version = get_u32(in, pos, origin);
    if (version != kEmbeddingVersion && version != kTensorVersion) {
        throw ParseError(origin + ": unsupported version " + std::to_string(version));
    }
    FloatMatrixFile f;
    f.n = get_u32(in, pos, origin);
    f.dim = get_u32(in, pos, origin);
    if (version == kTensorVersion) {
        const auto rank = get_u32(in, pos, origin);
        for (std::uint32_t i = 0; i < rank; ++i) f.shape.push_back(get_u32(in, pos, origin));
    }
    const std::size_t count = static_cast<std::size_t>(f.n) * f.dim;
    if (in.size() - pos != count * 4) throw ParseError(origin + ": payload size does not match n * dim");
    f.values.resize(count);
    for (auto& v : f.values) {
        const auto bits = get_u32(in, pos, origin);
        std::memcpy(&v, &bits, 4);
    }
    return f;
}

void save_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
    FloatMatrixFile f;
    f.n = static_cast<std::uint32_t>(set.size());
    f.dim = static_cast<std::uint32_t>(set.dim());
    f.values.assign(set.data().begin(), set.data().end());
    write_float_matrix(path, f);
    std::string csv = "row,frame\n";
    for (std::size_t i = 0; i < set.size(); ++i) {
        csv += std::to_string(i) + "," + std::to_string(set.frame_indices()[i]) + "\n";
    }
    io::write_atomic(frames_sidecar(path), csv);
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
    const auto f = read_float_matrix(path);
    const auto sidecar = frames_sidecar(path);
    std::vector<std::size_t> frames;
    if (std::filesystem::exists(sidecar)) {
        std::istringstream csv(io::read_text(sidecar));
        std::string line;
        std::getline(csv, line);
        if (line != "row,frame") throw ParseError(sidecar.string() + ": expected header 'row,frame'");
        while (std::getline(csv, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            if (comma == std::string::npos) throw ParseError(sidecar.string() + ": malformed row '" + line + "'");
            frames.push_back(std::stoull(line.substr(comma + 1)));
        }
    } else {
        frames.resize(f.n);
        for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = i;
    }
    if (frames.size() != f.n) throw StructuralError(sidecar.string() + ": frame count differs from embedding rows");
    return EmbeddingSet(std::vector<double>(f.values.begin(), f.values.end()), f.dim == 0 ? 1 : f.dim,
                        std::move(frames));
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& path) : all_(load_embeddings(path)) {}

EmbeddingSet FileEmbeddingProvider::embed(std::span<const std::size_t> frames) {
    std::vector<double> data;
    std::vector<std::size_t> kept;
    for (auto f : frames) {
        const auto row = all_.find_frame(f);
        if (row < 0) continue;
        const auto r = all_.row(static_cast<std::size_t>(row));
        data.insert(data.end(), r.begin(), r.end());
        kept.push_back(f);
    }
    return EmbeddingSet(std::move(data), all_.dim(), std::move(kept));
}

ImageEmbeddingProvider::ImageEmbeddingProvider(std::filesystem::path frame_dir, std::size_t side)
    : dir_(std::move(frame_dir)), side_(side) {
    if (side_ == 0) throw ArgumentError("embedding side must be positive");
}

std::vector<double> ImageEmbeddingProvider::embed_image(std::span<const double> gray, std::size_t width,
                                                        std::size_t height, std::size_t side) {
    if (width == 0 || height == 0 || gray.size() != width * height) throw ArgumentError("bad image dimensions");
    std::vector<double> out(side * side, 0.0);
    // Area averaging: each output cell integrates the input pixels it covers.
    for (std::size_t oy = 0; oy < side; ++oy) {
        const double y0 = static_cast<double>(oy) * height / side;
        const double y1 = static_cast<double>(oy + 1) * height / side;
        for (std::size_t ox = 0; ox < side; ++ox) {
            const double x0 = static_cast<double>(ox) * width / side;
            const double x1 = static_cast<double>(ox + 1) * width / side;
            double acc = 0.0;
            double area = 0.0;
            for (auto y = static_cast<std::size_t>(y0); y < height && static_cast<double>(y) < y1; ++y) {
                const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
                for (auto x = static_cast<std::size_t>(x0); x < width && static_cast<double>(x) < x1; ++x) {
                    const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
                    acc += wx * wy * gray[y * width + x];
                    area += wx * wy;
                }
            }
            out[oy * side + ox] = area > 0.0 ? acc / area : 0.0;
        }
    }
    double mean = 0.0;
    for (double v : out) mean += v;
    mean /= static_cast<double>(out.size());
    for (auto& v : out) v -= mean;
    return out;
}

EmbeddingSet ImageEmbeddingProvider::embed(std::span<const std::size_t> frames) {
    std::vector<double> data;
    std::vector<std::size_t> kept;
    for (auto f : frames) {
        std::ostringstream name;
        name << "frame_" << std::setw(6) << std::setfill('0') << f;
        auto path = dir_ / (name.str() + ".pgm");
        if (!std::filesystem::exists(path)) path = dir_ / (name.str() + ".ppm");
        if (!std::filesystem::exists(path)) continue;
        const auto img = read_netpbm_gray(path);
        const auto e = embed_image(img.pixels, img.width, img.height, side_);
        data.insert(data.end(), e.begin(), e.end());
        kept.push_back(f);
    }
    return EmbeddingSet(std::move(data), side_ * side_, std::move(kept));
}

GrayImage read_netpbm_gray(const std::filesystem::path& path) {
    const std::string in = io::read_text(path);
    const std::string origin = path.string();
    std::size_t pos = 0;
    auto token = [&]() {
        for (;;) {
            while (pos < in.size() && std::isspace(static_cast<unsigned char>(in[pos]))) ++pos;
            if (pos < in.size() && in[pos] == '#') {
                while (pos < in.size() && in[pos] != '\n') ++pos;
                continue;
            }
            break;
        }
        const std::size_t b = pos;
        while (pos < in.size() && !std::isspace(static_cast<unsigned char>(in[pos]))) ++pos;
        if (b == pos) throw ParseError(origin + ": truncated netpbm header");
        return in.substr(b, pos - b);
    };
    const auto magic = token();
    if (magic != "P5" && magic != "P6") throw ParseError(origin + ": only binary PGM (P5) / PPM (P6) supported");
    GrayImage img;
    try {
        img.width = std::stoul(token());
        img.height = std::stoul(token());
        const auto maxval = std::stoul(token());
        if (maxval == 0 || maxval > 65535) throw ParseError(origin + ": bad maxval");
        ++pos;  // single whitespace before raster
        const std::size_t channels = magic == "P6" ? 3 : 1;
        const std::size_t bps = maxval > 255 ? 2 : 1;
        const std::size_t need = img.width * img.height * channels * bps;
        if (in.size() < pos + need) throw ParseError(origin + ": truncated raster");
        img.pixels.resize(img.width * img.height);
        const double scale = 1.0 / static_cast<double>(maxval);
        auto sample = [&](std::size_t idx) {
            const auto* p = reinterpret_cast<const unsigned char*>(in.data() + pos + idx * bps);
            return bps == 2 ? static_cast<double>((p[0] << 8) | p[1]) : static_cast<double>(p[0]);
        };
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            if (channels == 1) {
                img.pixels[i] = sample(i) * scale;
            } else {
                img.pixels[i] =
                    (0.299 * sample(3 * i) + 0.587 * sample(3 * i + 1) + 0.114 * sample(3 * i + 2)) * scale;
            }
        }
    } catch (const std::logic_error&) {
        throw ParseError(origin + ": malformed netpbm header");
    }
    return img;
}

}  // namespace s2l::refine
