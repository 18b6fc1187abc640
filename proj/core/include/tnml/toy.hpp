#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tnml/data.hpp"
#include "tnml/feature_map.hpp"
#include "tnml/tensor.hpp"

namespace tnml {

// Two-pixel toy models: the full weight tensor W^l_{s1 s2} is stored with
// extents (n_labels, d, d) and optimized directly, no MPS factorization.

template <typename T>
std::vector<T> toy_scores(const Tensor<T>& w, const LocalFeatureMap& map, double x1,
                          double x2);

/// Gradient of C = 1/2 sum_n sum_l (f^l(x_n) - delta^l_{L_n})^2 with respect
/// to W, divided by the number of points (mean gradient).
Tensor<double> toy_quadratic_gradient(const Tensor<double>& w, const LabeledDataset& pts,
                                      const LocalFeatureMap& map);

double toy_quadratic_cost(const Tensor<double>& w, const LabeledDataset& pts,
                          const LocalFeatureMap& map);

/// Plain gradient descent with backtracking (step halved until the cost does
/// not increase); deterministic under the seed.
Tensor<double> train_full_quadratic(const LabeledDataset& pts, const LocalFeatureMap& map,
                                    std::size_t iters, double rate, std::uint64_t seed = 0);

struct DecisionGrid {
    std::size_t grid = 0;
    std::vector<int> labels;       // grid x grid, row-major over (ix, iy)
    std::vector<double> margins;   // |f_best| - |f_second|
};

DecisionGrid decision_grid(const Tensor<double>& w, const LocalFeatureMap& map,
                           std::size_t grid);
void write_csv(const DecisionGrid& g, std::ostream& os);

/// Fraction of cells on which two label grids disagree.
double grid_disagreement(std::span<const int> a, std::span<const int> b);

// ---------------------------------------------------------------------------
// Generative path: complex W with unit Frobenius norm and an orthonormal
// local map make p(l, x) = |f^l(x)|^2 a normalized density under
// d_mu = 2dx per axis.

/// i.i.d. complex Gaussian entries, normalized to sum |W|^2 = 1; two labels.
Tensor<cplx> random_hidden_model(std::size_t d, std::uint64_t seed);

/// (P_A, P_B) with P_l = sum_{s1 s2} |W^l|^2; requires unit-norm W (1e-8).
std::array<double, 2> label_probabilities(const Tensor<cplx>& w);

/// Quadrature check of sum_l integral |f^l|^2 d_mu over the unit square by
/// grid x grid midpoint rule.
double born_normalization(const Tensor<cplx>& w, const LocalFeatureMap& map,
                          std::size_t grid);

/// Two-step Born sampling: label via Bernoulli(P_A), then the point from the
/// grid-discretized p(x|l) (inverse CDF on the x1 marginal, then the x2
/// conditional, uniform jitter within the chosen cell). grid >= 64.
LabeledDataset sample_points(const Tensor<cplx>& w, const LocalFeatureMap& map,
                             std::size_t n_samples, std::size_t grid, std::uint64_t seed);

/// C = -sum_n log |f^{L_n}(x_n)|^2; +inf if any |f|^2 underflows.
double toy_nll(const Tensor<cplx>& w, const LabeledDataset& pts, const LocalFeatureMap& map);

/// Real-coordinate gradient packed as d/dRe + i d/dIm, divided by the number
/// of points.
Tensor<cplx> toy_nll_gradient(const Tensor<cplx>& w, const LabeledDataset& pts,
                              const LocalFeatureMap& map);

/// Projected gradient descent on the unit sphere (renormalized after every
/// accepted step) with backtracking; steps that drive any training point's
/// |f|^2 below 1e-300 are rejected and the rate halved.
Tensor<cplx> train_full_nll(const LabeledDataset& pts, const LocalFeatureMap& map,
                            std::size_t iters, double rate, std::uint64_t seed);

/// sum_l integral p log(p / p~) d_mu by grid x grid midpoint rule; cells with
/// p < 1e-15 contribute zero.
double kl_divergence(const Tensor<cplx>& w_true, const Tensor<cplx>& w_learned,
                     const LocalFeatureMap& map, std::size_t grid);

struct KlScanConfig {
    std::size_t trials = 20;
    std::size_t d = 2;
    std::size_t grid_kl = 256;
    std::size_t grid_sample = 128;
    std::size_t train_iters = 600;
    double train_rate = 0.25;
    std::uint64_t seed = 0;
};

struct KlScanResult {
    std::vector<std::size_t> sizes;
    std::vector<double> mean_kl;
    std::vector<double> std_kl;
    double sigma = 0.0;          // least-squares fit of mean = sigma / sqrt(N)
    double fit_residual = 0.0;   // rms residual of the fit
};

/// Fresh hidden model + samples + NLL training per trial; averages the KL
/// divergence per sample size and fits sigma / sqrt(N_s) through the origin.
KlScanResult kl_scan(std::span<const std::size_t> sizes, const KlScanConfig& cfg);
void write_csv(const KlScanResult& r, std::ostream& os);

}  // namespace tnml
