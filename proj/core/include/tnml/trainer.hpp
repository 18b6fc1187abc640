#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tnml/mps.hpp"

namespace tnml {

/// Training set with every input already passed through the local feature
/// map: phi holds n_examples x n_sites x d values, row-major.
struct EncodedDataset {
    std::size_t n_examples = 0;
    std::size_t n_sites = 0;
    std::size_t d = 0;
    std::size_t n_labels = 0;
    std::vector<double> phi;
    std::vector<int> labels;

    std::span<const double> site_vec(std::size_t n, std::size_t j) const {
        return std::span<const double>(phi.data() + (n * n_sites + j) * d, d);
    }
    EncodedInput<double> example(std::size_t n) const;

    static EncodedDataset build(std::span<const double> inputs, std::size_t n_features,
                                std::span<const int> labels, const LocalFeatureMap& map,
                                std::size_t n_labels);
};

struct TrainConfig {
    double learning_rate = 1e-4;  // step on the summed bond gradient
    int sweeps = 3;
    TruncParams trunc;            // max m, relative cutoff, floor
    int steps_per_bond = 1;
    bool backtracking = true;
    std::uint64_t seed = 0;
    unsigned threads = 1;         // 0 = hardware concurrency
    bool deterministic_reduction = true;
};

/// Per-example left/right partial contractions ("projected inputs") around
/// the active bond. left(n) covers sites 0..bond-1, right(n) covers sites
/// bond+2..N-1; both are advanced one site at a time as the sweep moves.
class EnvironmentCache {
public:
    EnvironmentCache(const Mps<double>& model, const EncodedDataset& data,
                     std::size_t bond = 0, unsigned threads = 1);

    std::size_t bond() const { return bond_; }
    std::size_t n_examples() const { return data_->n_examples; }
    std::size_t left_dim() const { return left_[bond_].cols; }
    std::size_t right_dim() const { return right_[bond_ + 2].cols; }
    std::span<const double> left(std::size_t n) const {
        const auto& s = left_[bond_];
        return std::span<const double>(s.v.data() + n * s.cols, s.cols);
    }
    std::span<const double> right(std::size_t n) const {
        const auto& s = right_[bond_ + 2];
        return std::span<const double>(s.v.data() + n * s.cols, s.cols);
    }

    /// Move the active bond one step. Rightward consumes the freshly updated
    /// site at the old bond; leftward the one right of it. Boundary moves
    /// are rejected.
    void advance(const Mps<double>& model, Direction dir);

private:
    struct Slab {
        std::size_t cols = 0;
        std::vector<double> v;
    };
    void build_left_(const Mps<double>& model, std::size_t boundary);
    void build_right_(const Mps<double>& model, std::size_t boundary);

    std::vector<Slab> left_;   // left_[k]: projection of sites 0..k-1
    std::vector<Slab> right_;  // right_[k]: projection of sites k..N-1
    std::size_t bond_ = 0;
    const EncodedDataset* data_ = nullptr;
    unsigned threads_ = 1;
};

/// C = 1/2 sum_n sum_l (f^l(x_n) - delta^l_{L_n})^2 via full evaluation.
double quadratic_cost(const Mps<double>& model, const EncodedDataset& data);

/// Scores of one example from the bond tensor and its projections; agrees
/// with evaluate() on the full model to machine precision.
std::vector<double> local_scores(const Tensor<double>& bond, std::span<const double> left,
                                 std::span<const double> right,
                                 std::span<const double> phi_j,
                                 std::span<const double> phi_j1);

/// Reference gradient: delta_B = sum_n (delta^l_{L_n} - f^l(x_n)) Phi~_n,
/// with the same index structure as the bond tensor.
Tensor<double> bond_gradient(const Tensor<double>& bond, const EncodedDataset& data,
                             const EnvironmentCache& cache);

/// B <- B + learning_rate * delta_b, then SVD split moving the label along
/// `dir` under cfg.trunc. Returns the new bond dimension.
std::size_t update_and_split(Mps<double>& model, std::size_t j,
                             const Tensor<double>& delta_b, const TrainConfig& cfg,
                             Direction dir);

struct BondRecord {
    std::size_t bond = 0;
    Direction dir = Direction::right;
    std::size_t new_bond_dim = 0;
    double grad_norm = 0.0;
    std::uint64_t flops = 0;  // nominal operation count for the bond visit
    int backtrack_halvings = 0;
};

struct SweepStats {
    int sweep = 0;
    double cost = 0.0;
    double train_error = 0.0;
    std::vector<std::size_t> bond_dims;
    double seconds = 0.0;
    std::uint64_t flops = 0;
};

struct SweepReport {
    std::vector<SweepStats> sweeps;
    /// One JSON object per sweep: {sweep, cost, train_error, bond_dims, seconds}.
    void write_jsonl(std::ostream& os) const;
};

/// DMRG-style two-site sweeping optimizer of the quadratic cost. One sweep is
/// a full left-to-right then right-to-left pass; the label index rides the
/// non-unitary SVD factor so it always sits on the active bond. Gradient
/// accumulation over examples is chunked; with deterministic_reduction the
/// chunk boundaries and reduction order are fixed regardless of thread count.
class SweepTrainer {
public:
    SweepTrainer(Mps<double> model, const EncodedDataset& data, TrainConfig cfg);

    SweepStats run_sweep();
    SweepReport train();

    const Mps<double>& model() const { return model_; }
    Mps<double> take_model() { return std::move(model_); }
    const EnvironmentCache& cache() const { return cache_; }
    const std::vector<BondRecord>& bond_records() const { return records_; }

private:
    struct PassResult {
        double cost = 0.0;
        double error_rate = 0.0;
    };
    void build_uv_(std::size_t j);
    PassResult scores_pass_(const Tensor<double>& bond, bool fill_residuals);
    Tensor<double> gradient_pass_(const Tensor<double>& bond);
    void optimize_bond_(std::size_t j, Direction dir);

    Mps<double> model_;
    const EncodedDataset& data_;
    TrainConfig cfg_;
    EnvironmentCache cache_;
    int sweeps_done_ = 0;
    std::vector<BondRecord> records_;
    std::uint64_t sweep_flops_ = 0;
    // Per-bond scratch, rebuilt at each bond: u = L (x) phi_j, v = phi_j1 (x) R,
    // z = residuals.
    std::vector<double> u_slab_, v_slab_, z_slab_;
    std::size_t u_cols_ = 0, v_cols_ = 0;
};

}  // namespace tnml
