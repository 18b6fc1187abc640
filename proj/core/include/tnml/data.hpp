#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tnml {

struct RawImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;  // row-major, height * width
};

/// Real-valued inputs in [0,1]^N with integer labels; the universal handoff
/// between ingestion and encoding.
struct LabeledDataset {
    std::size_t n_features = 0;
    std::vector<double> inputs;       // n x n_features, row-major
    std::vector<int> labels;
    std::vector<std::size_t> ordering;  // feature permutation applied, if any
    std::string provenance;

    std::size_t size() const { return labels.size(); }
    std::span<const double> input(std::size_t i) const {
        return std::span<const double>(inputs.data() + i * n_features, n_features);
    }
};

/// Write "label, x1, ..., xN" rows.
void write_csv(const LabeledDataset& ds, std::ostream& os);

/// IDX parsing (big-endian). Magic 2051 = u8 images, 2049 = u8 labels.
std::vector<RawImage> parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Whole file, transparently inflating gzip (1f 8b) content.
std::vector<std::uint8_t> read_file_maybe_gzip(const std::filesystem::path& path);

/// 28x28 -> 14x14: mean over 2x2 blocks, scaled to [0,1].
std::vector<double> downsample_14x14(const RawImage& img);

/// Boustrophedon pixel visit order: out[k] is the row-major index of the
/// k-th visited pixel (row 0 left-to-right, row 1 right-to-left, ...).
std::vector<std::size_t> snake_order(std::size_t height, std::size_t width);

enum class MnistSplit { train, test };

/// Parse -> downsample -> snake-order; optional stratified subset (uniform
/// without replacement per label, deterministic under seed). Accepts the
/// standard file names with or without .gz.
LabeledDataset build_mnist(const std::filesystem::path& dir, MnistSplit split,
                           std::optional<std::size_t> subset = std::nullopt,
                           std::uint64_t seed = 0);

struct GaussianPairParams {
    std::array<double, 2> mean_a{0.7, 0.3};
    std::array<double, 2> mean_b{0.3, 0.7};
    // Row-major 2x2 SPD matrices; defaults are axis-aligned spreads rotated
    // by +30 and -20 degrees.
    std::array<double, 4> cov_a;
    std::array<double, 4> cov_b;
    std::size_t n_per_class = 100;

    GaussianPairParams();
};

/// Two overlapping Gaussian clouds restricted to the unit square
/// (out-of-square draws are rejected and redrawn). Labels: A=0, B=1.
LabeledDataset sample_gaussian_pair(const GaussianPairParams& params, std::uint64_t seed);

/// Per-cell label of the larger class density at the cell center (equal
/// priors; ties go to A). Row-major over (ix, iy) with x1 = (ix+0.5)/grid.
std::vector<int> bayes_boundary(const GaussianPairParams& params, std::size_t grid);

double gaussian_density(std::span<const double, 2> mean, std::span<const double, 4> cov,
                        double x1, double x2);

/// Two-region partition of the unit square by an Archimedean spiral
/// r = a + b*theta centered at (0.5, 0.5); bands between consecutive
/// windings alternate between the classes.
int spiral_label(double x1, double x2);

/// Uniform rejection samples from each spiral region, labels consistent
/// with spiral_label. Labels: A=0, B=1.
LabeledDataset spiral_dataset(std::size_t n_per_class, std::uint64_t seed);

}  // namespace tnml
