#include "vitscape/dataset.hpp"

#include "vitscape/errors.hpp"
#include "vitscape/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace vitscape {

namespace {

double clamp01(double v) {
    return std::min(1.0, std::max(0.0, v));
}

// One geometric family per class. Per-image parameters (orientation, phase,
// period, center) are drawn once per image into `cache`.
double pattern_value(int family, double x, double y, int s, Rng& rng_params, bool fresh,
                     std::vector<double>& cache) {
    if (fresh) {
        cache.clear();
        switch (family) {
        case 0: // horizontal bars
        case 1: // vertical bars
            cache = {rng_params.uniform() < 0.5 ? 4.0 : 8.0, rng_params.uniform()};
            break;
        case 2: // checkerboard
            cache = {rng_params.uniform() < 0.5 ? 2.0 : 4.0, rng_params.uniform(), rng_params.uniform()};
            break;
        case 3: // filled disk
            cache = {0.3 + 0.4 * rng_params.uniform(), 0.3 + 0.4 * rng_params.uniform(),
                     0.18 + 0.14 * rng_params.uniform()};
            break;
        case 4: // ring
            cache = {0.35 + 0.3 * rng_params.uniform(), 0.35 + 0.3 * rng_params.uniform(),
                     0.22 + 0.12 * rng_params.uniform()};
            break;
        case 5: // linear gradient
            cache = {rng_params.uniform() * 6.283185307179586};
            break;
        case 6: // radial gradient
            cache = {0.3 + 0.4 * rng_params.uniform(), 0.3 + 0.4 * rng_params.uniform()};
            break;
        case 7: // diagonal bars
            cache = {rng_params.uniform() < 0.5 ? 1.0 : -1.0, rng_params.uniform(),
                     rng_params.uniform() < 0.5 ? 4.0 : 8.0};
            break;
        default:
            fail_contract("pattern family out of range");
        }
    }
    const double fx = x / s, fy = y / s;
    switch (family) {
    case 0: {
        return std::fmod(y / cache[0] + cache[1], 1.0) < 0.5 ? 0.85 : 0.15;
    }
    case 1: {
        return std::fmod(x / cache[0] + cache[1], 1.0) < 0.5 ? 0.85 : 0.15;
    }
    case 2: {
        const int cx = static_cast<int>(std::floor(x / cache[0] + cache[1]));
        const int cy = static_cast<int>(std::floor(y / cache[0] + cache[2]));
        return ((cx + cy) & 1) ? 0.85 : 0.15;
    }
    case 3: {
        const double dx = fx - cache[0], dy = fy - cache[1];
        return dx * dx + dy * dy < cache[2] * cache[2] ? 0.85 : 0.15;
    }
    case 4: {
        const double dx = fx - cache[0], dy = fy - cache[1];
        const double r = std::sqrt(dx * dx + dy * dy);
        return std::abs(r - cache[2]) < 0.08 ? 0.85 : 0.15;
    }
    case 5: {
        const double c = std::cos(cache[0]), sn = std::sin(cache[0]);
        return clamp01(0.5 + ((fx - 0.5) * c + (fy - 0.5) * sn) / 1.4142135623730951);
    }
    case 6: {
        const double dx = fx - cache[0], dy = fy - cache[1];
        return clamp01(1.0 - std::sqrt(dx * dx + dy * dy) / 0.75);
    }
    case 7: {
        const double u = cache[0] > 0 ? (x + y) : (x - y);
        return std::fmod(u / cache[2] + cache[1] + 16.0, 1.0) < 0.5 ? 0.85 : 0.15;
    }
    default:
        return 0.0;
    }
}

} // namespace

Dataset generate_synthetic(int n, const ViTConfig& cfg, int k_classes, std::uint64_t seed,
                           std::string split) {
    require(n >= 1, "generate_synthetic: need at least one image");
    if (k_classes < 1 || k_classes > kPatternFamilies) {
        fail_contract("generate_synthetic: " + std::to_string(k_classes) + " classes requested, only " +
                      std::to_string(kPatternFamilies) + " pattern families exist");
    }
    Dataset ds;
    ds.split = std::move(split);
    ds.num_classes = k_classes;
    Rng rng = Rng::stream(seed, "synthetic-" + ds.split);
    const int s = cfg.image_size;
    std::vector<double> cache;
    for (int i = 0; i < n; ++i) {
        const int label = i % k_classes; // balanced within +-1
        Tensor img = Tensor::zeros({cfg.channels, s, s});
        bool fresh = true;
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const double v = pattern_value(label, x, y, s, rng, fresh, cache);
                fresh = false;
                for (int c = 0; c < cfg.channels; ++c) {
                    const long long at = (static_cast<long long>(c) * s + y) * s + x;
                    img[at] = clamp01(v + 0.1 * rng.normal());
                }
            }
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
    }
    return ds;
}

namespace idx {

namespace {

constexpr std::uint8_t kTypeUByte = 0x08;

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32be(const std::vector<std::uint8_t>& in, std::size_t at) {
    return (static_cast<std::uint32_t>(in[at]) << 24) | (static_cast<std::uint32_t>(in[at + 1]) << 16) |
           (static_cast<std::uint32_t>(in[at + 2]) << 8) | static_cast<std::uint32_t>(in[at + 3]);
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        throw FormatError("cannot open " + path + " for writing");
    }
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
        throw FormatError("short write to " + path);
    }
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        throw FormatError("cannot open " + path);
    }
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void check_magic(const std::vector<std::uint8_t>& b, const std::string& path, int want_dims) {
    if (b.size() < 4) {
        throw FormatError(path + ": truncated IDX header at byte 0");
    }
    if (b[0] != 0 || b[1] != 0) {
        throw FormatError(path + ": bad IDX magic at byte 0");
    }
    if (b[2] != kTypeUByte) {
        throw FormatError(path + ": unsupported IDX element type at byte 2");
    }
    if (b[3] != want_dims) {
        throw FormatError(path + ": expected " + std::to_string(want_dims) + " dimensions at byte 3, got " +
                          std::to_string(static_cast<int>(b[3])));
    }
}

} // namespace

void write_images(const std::string& path, const Images& im) {
    require(im.count >= 0 && im.rows > 0 && im.cols > 0, "idx: bad image dimensions");
    require(im.pixels.size() == static_cast<std::size_t>(im.count) * im.rows * im.cols,
            "idx: pixel buffer does not match dimensions");
    std::vector<std::uint8_t> out;
    out.reserve(16 + im.pixels.size());
    out.push_back(0);
    out.push_back(0);
    out.push_back(kTypeUByte);
    out.push_back(3);
    put_u32be(out, static_cast<std::uint32_t>(im.count));
    put_u32be(out, static_cast<std::uint32_t>(im.rows));
    put_u32be(out, static_cast<std::uint32_t>(im.cols));
    out.insert(out.end(), im.pixels.begin(), im.pixels.end());
    write_file(path, out);
}

Images read_images(const std::string& path) {
    const auto b = read_file(path);
    check_magic(b, path, 3);
    if (b.size() < 16) {
        throw FormatError(path + ": truncated IDX dimensions at byte " + std::to_string(b.size()));
    }
    Images im;
    im.count = static_cast<int>(get_u32be(b, 4));
    im.rows = static_cast<int>(get_u32be(b, 8));
    im.cols = static_cast<int>(get_u32be(b, 12));
    const std::size_t need = 16 + static_cast<std::size_t>(im.count) * im.rows * im.cols;
    if (b.size() < need) {
        throw FormatError(path + ": truncated IDX payload at byte " + std::to_string(b.size()) +
                          ", expected " + std::to_string(need));
    }
    im.pixels.assign(b.begin() + 16, b.begin() + static_cast<std::ptrdiff_t>(need));
    return im;
}

void write_labels(const std::string& path, const Labels& lb) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + lb.values.size());
    out.push_back(0);
    out.push_back(0);
    out.push_back(kTypeUByte);
    out.push_back(1);
    put_u32be(out, static_cast<std::uint32_t>(lb.values.size()));
    out.insert(out.end(), lb.values.begin(), lb.values.end());
    write_file(path, out);
}

Labels read_labels(const std::string& path) {
    const auto b = read_file(path);
    check_magic(b, path, 1);
    if (b.size() < 8) {
        throw FormatError(path + ": truncated IDX dimensions at byte " + std::to_string(b.size()));
    }
    const std::size_t n = get_u32be(b, 4);
    if (b.size() < 8 + n) {
        throw FormatError(path + ": truncated IDX payload at byte " + std::to_string(b.size()) +
                          ", expected " + std::to_string(8 + n));
    }
    Labels lb;
    lb.values.assign(b.begin() + 8, b.begin() + static_cast<std::ptrdiff_t>(8 + n));
    return lb;
}

} // namespace idx

Dataset load_idx(const std::string& images_path, const std::string& labels_path, const ViTConfig& cfg) {
    const idx::Images im = idx::read_images(images_path);
    const idx::Labels lb = idx::read_labels(labels_path);
    if (static_cast<std::size_t>(im.count) != lb.values.size()) {
        throw FormatError("idx: " + std::to_string(im.count) + " images vs " +
                          std::to_string(lb.values.size()) + " labels");
    }
    Dataset ds;
    ds.split = "train";
    const int s = cfg.image_size;
    int max_label = 0;
    for (int i = 0; i < im.count; ++i) {
        Tensor img = Tensor::zeros({cfg.channels, s, s});
        // center-crop when the source is larger, center-pad when smaller
        const int off_y = (im.rows - s) / 2;
        const int off_x = (im.cols - s) / 2;
        for (int y = 0; y < s; ++y) {
            for (int x = 0; x < s; ++x) {
                const int sy = y + off_y, sx = x + off_x;
                double v = 0.0;
                if (sy >= 0 && sy < im.rows && sx >= 0 && sx < im.cols) {
                    const std::size_t at = (static_cast<std::size_t>(i) * im.rows + sy) * im.cols + sx;
                    v = im.pixels[at] / 255.0;
                }
                for (int c = 0; c < cfg.channels; ++c) {
                    img[(static_cast<long long>(c) * s + y) * s + x] = v;
                }
            }
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(static_cast<int>(lb.values[static_cast<std::size_t>(i)]));
        max_label = std::max(max_label, ds.labels.back());
    }
    ds.num_classes = max_label + 1;
    return ds;
}

} // namespace vitscape
