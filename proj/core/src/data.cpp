#include "tnml/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace tnml {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t off) {
    if (off + 4 > bytes.size()) throw std::runtime_error("idx: truncated stream");
    return (static_cast<std::uint32_t>(bytes[off]) << 24) |
           (static_cast<std::uint32_t>(bytes[off + 1]) << 16) |
           (static_cast<std::uint32_t>(bytes[off + 2]) << 8) |
           static_cast<std::uint32_t>(bytes[off + 3]);
}

std::vector<std::uint8_t> inflate_gzip(std::span<const std::uint8_t> bytes) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        throw std::runtime_error("gzip: inflateInit failed");
    std::vector<std::uint8_t> out;
    out.reserve(bytes.size() * 4);
    std::vector<std::uint8_t> buf(1 << 16);
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = buf.data();
        zs.avail_out = static_cast<uInt>(buf.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw std::runtime_error("gzip: corrupt stream");
        }
        out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
    }
    inflateEnd(&zs);
    return out;
}

}  // namespace

void write_csv(const LabeledDataset& ds, std::ostream& os) {
    os.precision(17);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        os << ds.labels[i];
        for (double x : ds.input(i)) os << ',' << x;
        os << '\n';
    }
}

std::vector<RawImage> parse_idx_images(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kImageMagic)
        throw std::runtime_error("idx: bad image magic " + std::to_string(magic));
    const std::uint32_t count = read_be32(bytes, 4);
    const std::uint32_t rows = read_be32(bytes, 8);
    const std::uint32_t cols = read_be32(bytes, 12);
    const std::size_t expected = 16 + std::size_t{count} * rows * cols;
    if (bytes.size() != expected)
        throw std::runtime_error("idx: image payload length mismatch");
    std::vector<RawImage> images(count);
    std::size_t off = 16;
    for (auto& img : images) {
        img.height = rows;
        img.width = cols;
        img.pixels.assign(bytes.begin() + off, bytes.begin() + off + rows * cols);
        off += std::size_t{rows} * cols;
    }
    return images;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kLabelMagic)
        throw std::runtime_error("idx: bad label magic " + std::to_string(magic));
    const std::uint32_t count = read_be32(bytes, 4);
    if (bytes.size() != 8 + std::size_t{count})
        throw std::runtime_error("idx: label payload length mismatch");
    std::vector<int> labels(count);
    for (std::uint32_t i = 0; i < count; ++i) labels[i] = bytes[8 + i];
    return labels;
}

std::vector<std::uint8_t> read_file_maybe_gzip(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
        return inflate_gzip(bytes);
    return bytes;
}

std::vector<double> downsample_14x14(const RawImage& img) {
    if (img.height != 28 || img.width != 28)
        throw std::invalid_argument("downsample: expected a 28x28 image");
    std::vector<double> out(14 * 14);
    for (std::size_t r = 0; r < 14; ++r)
        for (std::size_t c = 0; c < 14; ++c) {
            const std::size_t r0 = 2 * r, c0 = 2 * c;
            const double sum = img.pixels[r0 * 28 + c0] + img.pixels[r0 * 28 + c0 + 1] +
                               img.pixels[(r0 + 1) * 28 + c0] +
                               img.pixels[(r0 + 1) * 28 + c0 + 1];
            out[r * 14 + c] = sum / 4.0 / 255.0;
        }
    return out;
}

std::vector<std::size_t> snake_order(std::size_t height, std::size_t width) {
    if (height == 0 || width == 0) throw std::invalid_argument("snake_order: empty grid");
    std::vector<std::size_t> order;
    order.reserve(height * width);
    for (std::size_t r = 0; r < height; ++r) {
        if (r % 2 == 0)
            for (std::size_t c = 0; c < width; ++c) order.push_back(r * width + c);
        else
            for (std::size_t c = width; c-- > 0;) order.push_back(r * width + c);
    }
    return order;
}

namespace {

std::filesystem::path find_idx_file(const std::filesystem::path& dir,
                                    const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
        const auto p = dir / (stem + suffix);
        if (std::filesystem::exists(p)) return p;
    }
    throw std::runtime_error("mnist: missing " + (dir / stem).string() + "[.gz]");
}

}  // namespace

LabeledDataset build_mnist(const std::filesystem::path& dir, MnistSplit split,
                           std::optional<std::size_t> subset, std::uint64_t seed) {
    const std::string img_stem =
        split == MnistSplit::train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
    const std::string lab_stem =
        split == MnistSplit::train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
    auto images = parse_idx_images(read_file_maybe_gzip(find_idx_file(dir, img_stem)));
    auto labels = parse_idx_labels(read_file_maybe_gzip(find_idx_file(dir, lab_stem)));
    if (images.size() != labels.size())
        throw std::runtime_error("mnist: image/label count mismatch");

    std::vector<std::size_t> keep(images.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (subset) {
        if (*subset == 0) throw std::invalid_argument("mnist: subset size must be positive");
        if (*subset > images.size())
            throw std::invalid_argument("mnist: subset larger than the dataset");
        if (*subset < images.size()) {
            // Stratified by label, uniform without replacement.
            std::vector<std::vector<std::size_t>> byLabel(10);
            for (std::size_t i = 0; i < labels.size(); ++i) byLabel[labels[i]].push_back(i);
            std::mt19937_64 rng(seed);
            keep.clear();
            std::size_t assigned = 0;
            std::vector<std::size_t> quota(10);
            for (std::size_t l = 0; l < 10; ++l) {
                quota[l] = *subset * byLabel[l].size() / images.size();
                assigned += quota[l];
            }
            for (std::size_t l = 0; assigned < *subset; l = (l + 1) % 10) {
                if (quota[l] < byLabel[l].size()) {
                    ++quota[l];
                    ++assigned;
                }
            }
            for (std::size_t l = 0; l < 10; ++l) {
                auto& idx = byLabel[l];
                std::shuffle(idx.begin(), idx.end(), rng);
                keep.insert(keep.end(), idx.begin(), idx.begin() + quota[l]);
            }
            std::sort(keep.begin(), keep.end());
        }
    }

    const auto order = snake_order(14, 14);
    LabeledDataset ds;
    ds.n_features = 196;
    ds.ordering = order;
    ds.provenance = (dir / img_stem).string();
    ds.inputs.reserve(keep.size() * 196);
    ds.labels.reserve(keep.size());
    for (std::size_t i : keep) {
        const auto grid = downsample_14x14(images[i]);
        for (std::size_t k = 0; k < 196; ++k) ds.inputs.push_back(grid[order[k]]);
        ds.labels.push_back(labels[i]);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Toy distributions

namespace {

std::array<double, 4> rotated_cov(double v1, double v2, double degrees) {
    const double t = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    // R diag(v1, v2) R^T
    return {c * c * v1 + s * s * v2, c * s * (v1 - v2),
            c * s * (v1 - v2), s * s * v1 + c * c * v2};
}

struct Chol2 {
    double l00, l10, l11;
};

Chol2 cholesky2(std::span<const double, 4> cov) {
    const double a = cov[0], b = cov[1], bt = cov[2], c = cov[3];
    if (std::abs(b - bt) > 1e-12 * (std::abs(b) + 1.0))
        throw std::invalid_argument("covariance must be symmetric");
    if (a <= 0 || a * c - b * b <= 0)
        throw std::invalid_argument("covariance must be positive definite");
    Chol2 l;
    l.l00 = std::sqrt(a);
    l.l10 = b / l.l00;
    l.l11 = std::sqrt(c - l.l10 * l.l10);
    return l;
}

}  // namespace

GaussianPairParams::GaussianPairParams()
    : cov_a(rotated_cov(0.02, 0.04, 30.0)), cov_b(rotated_cov(0.05, 0.015, -20.0)) {}

double gaussian_density(std::span<const double, 2> mean, std::span<const double, 4> cov,
                        double x1, double x2) {
    const double det = cov[0] * cov[3] - cov[1] * cov[2];
    if (det <= 0) throw std::invalid_argument("covariance must be positive definite");
    const double dx = x1 - mean[0], dy = x2 - mean[1];
    const double q =
        (cov[3] * dx * dx - (cov[1] + cov[2]) * dx * dy + cov[0] * dy * dy) / det;
    return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

LabeledDataset sample_gaussian_pair(const GaussianPairParams& params, std::uint64_t seed) {
    const Chol2 la = cholesky2(params.cov_a);
    const Chol2 lb = cholesky2(params.cov_b);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    LabeledDataset ds;
    ds.n_features = 2;
    ds.provenance = "gaussian_pair";
    auto draw = [&](const std::array<double, 2>& mean, const Chol2& l, int label) {
        for (std::size_t i = 0; i < params.n_per_class; ++i) {
            for (int attempt = 0;; ++attempt) {
                if (attempt > 100000)
                    throw std::runtime_error("gaussian sampling: rejection stuck outside [0,1]^2");
                const double z1 = gauss(rng), z2 = gauss(rng);
                const double x1 = mean[0] + l.l00 * z1;
                const double x2 = mean[1] + l.l10 * z1 + l.l11 * z2;
                if (x1 >= 0 && x1 <= 1 && x2 >= 0 && x2 <= 1) {
                    ds.inputs.push_back(x1);
                    ds.inputs.push_back(x2);
                    ds.labels.push_back(label);
                    break;
                }
            }
        }
    };
    draw(params.mean_a, la, 0);
    draw(params.mean_b, lb, 1);
    return ds;
}

std::vector<int> bayes_boundary(const GaussianPairParams& params, std::size_t grid) {
    if (grid == 0) throw std::invalid_argument("bayes_boundary: empty grid");
    std::vector<int> labels(grid * grid);
    for (std::size_t ix = 0; ix < grid; ++ix)
        for (std::size_t iy = 0; iy < grid; ++iy) {
            const double x1 = (ix + 0.5) / static_cast<double>(grid);
            const double x2 = (iy + 0.5) / static_cast<double>(grid);
            const double pa = gaussian_density(params.mean_a, params.cov_a, x1, x2);
            const double pb = gaussian_density(params.mean_b, params.cov_b, x1, x2);
            labels[ix * grid + iy] = pb > pa ? 1 : 0;
        }
    return labels;
}

// Spiral geometry: two interlocked Archimedean arms r(theta) = a + b*theta
// with a = 0, theta in [0, 3pi], anchored at (0.5, 0.5) and reaching just
// past the square's corners. The winding phase w = r/(pi*b) - ang/pi is
// continuous away from the center, so floor(w) parity two-colors the square
// with the arms as the boundary. Sampling stays away from the boundary
// (non-overlapping class supports): a gap of 8% of the band width plus a
// central exclusion disk of radius 0.1.
namespace {
constexpr double kSpiralB = 0.75 / (3.0 * std::numbers::pi);
constexpr double kSpiralSampleMargin = 0.08;
constexpr double kSpiralSampleRmin = 0.10;

double spiral_phase(double x1, double x2) {
    const double dx = x1 - 0.5, dy = x2 - 0.5;
    const double r = std::hypot(dx, dy);
    double ang = std::atan2(dy, dx);
    if (ang < 0) ang += 2.0 * std::numbers::pi;
    return r / (std::numbers::pi * kSpiralB) - ang / std::numbers::pi;
}

}  // namespace

int spiral_label(double x1, double x2) {
    const long band = static_cast<long>(std::floor(spiral_phase(x1, x2)));
    return static_cast<int>(((band % 2) + 2) % 2);
}

LabeledDataset spiral_dataset(std::size_t n_per_class, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LabeledDataset ds;
    ds.n_features = 2;
    ds.provenance = "spiral";
    std::array<std::size_t, 2> want{n_per_class, n_per_class};
    while (want[0] > 0 || want[1] > 0) {
        const double x1 = u(rng), x2 = u(rng);
        if (std::hypot(x1 - 0.5, x2 - 0.5) < kSpiralSampleRmin) continue;
        const double w = spiral_phase(x1, x2);
        const double frac = w - std::floor(w);
        if (std::min(frac, 1.0 - frac) < kSpiralSampleMargin) continue;
        const int label = spiral_label(x1, x2);
        if (want[label] == 0) continue;
        --want[label];
        ds.inputs.push_back(x1);
        ds.inputs.push_back(x2);
        ds.labels.push_back(label);
    }
    return ds;
}

}  // namespace tnml
