#include "tnml/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace tnml {

namespace {

constexpr std::size_t kChunk = 4096;  // fixed partition for deterministic reduction

unsigned resolve_threads(unsigned hint) {
    if (hint != 0) return hint;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

// Run fn(chunk_index, begin, end) over fixed chunks of [0, n). Chunk
// boundaries do not depend on the thread count, so any per-chunk partial
// results can be reduced in index order for bit-stable output.
template <typename Fn>
void for_chunks(std::size_t n, unsigned threads, Fn&& fn) {
    const std::size_t n_chunks = (n + kChunk - 1) / kChunk;
    const std::size_t use =
        std::min<std::size_t>(resolve_threads(threads), n_chunks ? n_chunks : 1);
    if (use <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c)
            fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(use);
    for (std::size_t t = 0; t < use; ++t)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= n_chunks) return;
                fn(c, c * kChunk, std::min(n, (c + 1) * kChunk));
            }
        });
    for (auto& th : pool) th.join();
}

std::size_t n_chunks_of(std::size_t n) { return (n + kChunk - 1) / kChunk; }

}  // namespace

EncodedInput<double> EncodedDataset::example(std::size_t n) const {
    EncodedInput<double> e;
    e.n_sites = n_sites;
    e.d = d;
    e.values.assign(phi.begin() + n * n_sites * d, phi.begin() + (n + 1) * n_sites * d);
    e.label = labels[n];
    return e;
}

EncodedDataset EncodedDataset::build(std::span<const double> inputs, std::size_t n_features,
                                     std::span<const int> labels,
                                     const LocalFeatureMap& map, std::size_t n_labels) {
    if (n_features == 0 || inputs.size() % n_features != 0)
        throw std::invalid_argument("encoded dataset: inputs not a multiple of n_features");
    const std::size_t n = inputs.size() / n_features;
    if (labels.size() != n)
        throw std::invalid_argument("encoded dataset: label count mismatch");
    EncodedDataset ds;
    ds.n_examples = n;
    ds.n_sites = n_features;
    ds.d = map.dim();
    ds.n_labels = n_labels;
    ds.labels.assign(labels.begin(), labels.end());
    for (int l : ds.labels)
        if (l < 0 || static_cast<std::size_t>(l) >= n_labels)
            throw std::invalid_argument("encoded dataset: label out of range");
    ds.phi.resize(n * n_features * ds.d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n_features; ++j)
            map.eval(inputs[i * n_features + j],
                     std::span<double>(ds.phi.data() + (i * n_features + j) * ds.d, ds.d));
    return ds;
}

// ---------------------------------------------------------------------------
// EnvironmentCache

EnvironmentCache::EnvironmentCache(const Mps<double>& model, const EncodedDataset& data,
                                   std::size_t bond, unsigned threads)
    : bond_(bond), data_(&data), threads_(threads) {
    const std::size_t n_sites = model.n_sites();
    if (n_sites < 2) throw std::invalid_argument("environment cache needs at least 2 sites");
    if (bond + 2 > n_sites)
        throw std::invalid_argument("environment cache: bond out of range");
    if (data.n_sites != n_sites || data.d != model.local_dim())
        throw std::invalid_argument("environment cache: dataset does not match model");
    left_.resize(n_sites + 1);
    right_.resize(n_sites + 1);

    left_[0].cols = 1;
    left_[0].v.assign(data.n_examples, 1.0);
    for (std::size_t k = 1; k <= bond_; ++k) build_left_(model, k);

    right_[n_sites].cols = 1;
    right_[n_sites].v.assign(data.n_examples, 1.0);
    for (std::size_t k = n_sites; k-- > bond_ + 2;) build_right_(model, k);
}

void EnvironmentCache::build_left_(const Mps<double>& model, std::size_t boundary) {
    const auto& a = model.site(boundary - 1);
    if (a.order() != 3)
        throw std::invalid_argument(
            "environment cache: cannot project through the label-carrying site");
    const std::size_t ml = a.shape()[0], d = a.shape()[1], mr = a.shape()[2];
    const Slab& in = left_[boundary - 1];
    Slab& out = left_[boundary];
    out.cols = mr;
    out.v.assign(data_->n_examples * mr, 0.0);
    const double* ad = a.data();
    for_chunks(data_->n_examples, threads_, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t n = b; n < e; ++n) {
            const double* lin = in.v.data() + n * ml;
            double* lout = out.v.data() + n * mr;
            auto phi = data_->site_vec(n, boundary - 1);
            for (std::size_t ai = 0; ai < ml; ++ai)
                for (std::size_t s = 0; s < d; ++s) {
                    const double w = lin[ai] * phi[s];
                    const double* row = ad + (ai * d + s) * mr;
                    for (std::size_t bb = 0; bb < mr; ++bb) lout[bb] += w * row[bb];
                }
        }
    });
}

void EnvironmentCache::build_right_(const Mps<double>& model, std::size_t boundary) {
    const auto& a = model.site(boundary);
    if (a.order() != 3)
        throw std::invalid_argument(
            "environment cache: cannot project through the label-carrying site");
    const std::size_t ml = a.shape()[0], d = a.shape()[1], mr = a.shape()[2];
    const Slab& in = right_[boundary + 1];
    Slab& out = right_[boundary];
    out.cols = ml;
    out.v.assign(data_->n_examples * ml, 0.0);
    const double* ad = a.data();
    for_chunks(data_->n_examples, threads_, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t n = b; n < e; ++n) {
            const double* rin = in.v.data() + n * mr;
            double* rout = out.v.data() + n * ml;
            auto phi = data_->site_vec(n, boundary);
            for (std::size_t ai = 0; ai < ml; ++ai) {
                double acc = 0.0;
                for (std::size_t s = 0; s < d; ++s) {
                    const double* row = ad + (ai * d + s) * mr;
                    double partial = 0.0;
                    for (std::size_t bb = 0; bb < mr; ++bb) partial += row[bb] * rin[bb];
                    acc += phi[s] * partial;
                }
                rout[ai] = acc;
            }
        }
    });
}

void EnvironmentCache::advance(const Mps<double>& model, Direction dir) {
    const std::size_t n_sites = model.n_sites();
    if (dir == Direction::right) {
        if (bond_ + 2 >= n_sites)
            throw std::out_of_range("environment cache: cannot advance right at the boundary");
        build_left_(model, bond_ + 1);
        right_[bond_ + 2] = Slab{};
        ++bond_;
    } else {
        if (bond_ == 0)
            throw std::out_of_range("environment cache: cannot advance left at the boundary");
        build_right_(model, bond_ + 1);
        left_[bond_] = Slab{};
        --bond_;
    }
}

// ---------------------------------------------------------------------------
// Spec-level operations

double quadratic_cost(const Mps<double>& model, const EncodedDataset& data) {
    if (data.n_labels != model.n_labels())
        throw std::invalid_argument("quadratic_cost: label count mismatch");
    double cost = 0.0;
    for (std::size_t n = 0; n < data.n_examples; ++n) {
        const auto f = evaluate(model, data.example(n));
        for (std::size_t l = 0; l < f.size(); ++l) {
            const double target = (static_cast<int>(l) == data.labels[n]) ? 1.0 : 0.0;
            const double r = f[l] - target;
            cost += 0.5 * r * r;
        }
    }
    return cost;
}

std::vector<double> local_scores(const Tensor<double>& bond, std::span<const double> left,
                                 std::span<const double> right,
                                 std::span<const double> phi_j,
                                 std::span<const double> phi_j1) {
    const std::size_t ml = bond.shape()[0], d = bond.shape()[1], d2 = bond.shape()[2],
                      mr = bond.shape()[3], nl = bond.shape()[4];
    if (left.size() != ml || right.size() != mr || phi_j.size() != d || phi_j1.size() != d2)
        throw std::invalid_argument("local_scores: projection extents do not match the bond");
    std::vector<double> f(nl, 0.0);
    const double* bd = bond.data();
    for (std::size_t a = 0; a < ml; ++a)
        for (std::size_t s = 0; s < d; ++s) {
            const double w = left[a] * phi_j[s];
            for (std::size_t t = 0; t < d2; ++t) {
                const double wt = w * phi_j1[t];
                for (std::size_t b = 0; b < mr; ++b) {
                    const double c = wt * right[b];
                    const double* cell = bd + (((a * d + s) * d2 + t) * mr + b) * nl;
                    for (std::size_t l = 0; l < nl; ++l) f[l] += c * cell[l];
                }
            }
        }
    return f;
}

Tensor<double> bond_gradient(const Tensor<double>& bond, const EncodedDataset& data,
                             const EnvironmentCache& cache) {
    const std::size_t j = cache.bond();
    if (cache.left_dim() != bond.shape()[0] || cache.right_dim() != bond.shape()[3])
        throw std::invalid_argument("bond_gradient: cache is not at this bond");
    Tensor<double> grad(bond.shape());
    const std::size_t ml = bond.shape()[0], d = bond.shape()[1], d2 = bond.shape()[2],
                      mr = bond.shape()[3], nl = bond.shape()[4];
    double* gd = grad.data();
    for (std::size_t n = 0; n < data.n_examples; ++n) {
        const auto l_env = cache.left(n);
        const auto r_env = cache.right(n);
        const auto f =
            local_scores(bond, l_env, r_env, data.site_vec(n, j), data.site_vec(n, j + 1));
        std::vector<double> z(nl);
        for (std::size_t l = 0; l < nl; ++l)
            z[l] = ((static_cast<int>(l) == data.labels[n]) ? 1.0 : 0.0) - f[l];
        const auto phi_j = data.site_vec(n, j);
        const auto phi_j1 = data.site_vec(n, j + 1);
        for (std::size_t a = 0; a < ml; ++a)
            for (std::size_t s = 0; s < d; ++s) {
                const double w = l_env[a] * phi_j[s];
                for (std::size_t t = 0; t < d2; ++t) {
                    const double wt = w * phi_j1[t];
                    for (std::size_t b = 0; b < mr; ++b) {
                        const double c = wt * r_env[b];
                        double* cell = gd + (((a * d + s) * d2 + t) * mr + b) * nl;
                        for (std::size_t l = 0; l < nl; ++l) cell[l] += c * z[l];
                    }
                }
            }
    }
    return grad;
}

std::size_t update_and_split(Mps<double>& model, std::size_t j,
                             const Tensor<double>& delta_b, const TrainConfig& cfg,
                             Direction dir) {
    Tensor<double> b = merge_bond(model, j);
    if (cfg.learning_rate != 0.0) axpy(b, cfg.learning_rate, delta_b);
    auto sp = split_bond(b, dir, cfg.trunc);
    const std::size_t new_m = sp.new_bond;
    model.set_bond_sites(j, std::move(sp.left_site), std::move(sp.right_site),
                         dir == Direction::right ? j + 1 : j);
    return new_m;
}

// ---------------------------------------------------------------------------
// SweepTrainer

SweepTrainer::SweepTrainer(Mps<double> model, const EncodedDataset& data, TrainConfig cfg)
    : model_([&] {
          // Gauge preparation: label to site 0 with every other site
          // right-orthogonal, so projections through the wings are isometric.
          move_label(model, model.n_sites() - 1);
          move_label(model, 0);
          return std::move(model);
      }()),
      data_(data), cfg_(cfg), cache_(model_, data_, 0, cfg.threads) {
    if (data_.n_labels != model_.n_labels())
        throw std::invalid_argument("trainer: dataset labels do not match the model");
    if (cfg_.learning_rate < 0)
        throw std::invalid_argument("trainer: learning rate must be nonnegative");
    if (cfg_.sweeps < 0 || cfg_.steps_per_bond < 1)
        throw std::invalid_argument("trainer: invalid sweep configuration");
}

void SweepTrainer::build_uv_(std::size_t j) {
    const std::size_t n = data_.n_examples;
    const std::size_t d = data_.d;
    const std::size_t ml = cache_.left_dim();
    const std::size_t mr = cache_.right_dim();
    u_cols_ = ml * d;
    v_cols_ = d * mr;
    u_slab_.resize(n * u_cols_);
    v_slab_.resize(n * v_cols_);
    for_chunks(n, cfg_.threads, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            const auto l_env = cache_.left(i);
            const auto r_env = cache_.right(i);
            const auto phi_j = data_.site_vec(i, j);
            const auto phi_j1 = data_.site_vec(i, j + 1);
            double* u = u_slab_.data() + i * u_cols_;
            double* v = v_slab_.data() + i * v_cols_;
            for (std::size_t a = 0; a < ml; ++a)
                for (std::size_t s = 0; s < d; ++s) u[a * d + s] = l_env[a] * phi_j[s];
            for (std::size_t s = 0; s < d; ++s)
                for (std::size_t b2 = 0; b2 < mr; ++b2)
                    v[s * mr + b2] = phi_j1[s] * r_env[b2];
        }
    });
    sweep_flops_ += 2 * n * (u_cols_ + v_cols_);
}

SweepTrainer::PassResult SweepTrainer::scores_pass_(const Tensor<double>& bond,
                                                    bool fill_residuals) {
    const std::size_t n = data_.n_examples;
    const std::size_t nl = data_.n_labels;
    const std::size_t p_dim = u_cols_, q_dim = v_cols_;
    if (fill_residuals) z_slab_.resize(n * nl);
    const double* bd = bond.data();
    const std::size_t nc = n_chunks_of(n);
    std::vector<double> chunk_cost(nc, 0.0);
    std::vector<std::size_t> chunk_err(nc, 0);
    for_chunks(n, cfg_.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        double cost = 0.0;
        std::size_t errors = 0;
        std::vector<double> f(nl);
        for (std::size_t i = b; i < e; ++i) {
            const double* u = u_slab_.data() + i * p_dim;
            const double* v = v_slab_.data() + i * q_dim;
            std::fill(f.begin(), f.end(), 0.0);
            for (std::size_t p = 0; p < p_dim; ++p) {
                const double up = u[p];
                if (up == 0.0) continue;
                const double* brow = bd + p * q_dim * nl;
                for (std::size_t q = 0; q < q_dim; ++q) {
                    const double c2 = up * v[q];
                    const double* cell = brow + q * nl;
                    for (std::size_t l = 0; l < nl; ++l) f[l] += c2 * cell[l];
                }
            }
            const int label = data_.labels[i];
            std::size_t best = 0;
            for (std::size_t l = 0; l < nl; ++l) {
                const double target = (static_cast<int>(l) == label) ? 1.0 : 0.0;
                const double r = f[l] - target;
                cost += 0.5 * r * r;
                if (std::abs(f[l]) > std::abs(f[best])) best = l;
                if (fill_residuals) z_slab_[i * nl + l] = -r;
            }
            if (static_cast<int>(best) != label) ++errors;
        }
        chunk_cost[c] = cost;
        chunk_err[c] = errors;
    });
    PassResult out;
    std::size_t errors = 0;
    for (std::size_t c = 0; c < nc; ++c) {
        out.cost += chunk_cost[c];
        errors += chunk_err[c];
    }
    out.error_rate = n ? static_cast<double>(errors) / static_cast<double>(n) : 0.0;
    sweep_flops_ += 2 * n * p_dim * q_dim * nl;
    return out;
}

Tensor<double> SweepTrainer::gradient_pass_(const Tensor<double>& bond) {
    const std::size_t n = data_.n_examples;
    const std::size_t nl = data_.n_labels;
    const std::size_t p_dim = u_cols_, q_dim = v_cols_;
    const std::size_t vol = p_dim * q_dim * nl;
    const std::size_t nc = n_chunks_of(n);
    std::vector<std::vector<double>> partial(nc);
    for_chunks(n, cfg_.threads, [&](std::size_t c, std::size_t b, std::size_t e) {
        auto& g = partial[c];
        g.assign(vol, 0.0);
        for (std::size_t i = b; i < e; ++i) {
            const double* u = u_slab_.data() + i * p_dim;
            const double* v = v_slab_.data() + i * q_dim;
            const double* z = z_slab_.data() + i * nl;
            for (std::size_t p = 0; p < p_dim; ++p) {
                const double up = u[p];
                if (up == 0.0) continue;
                double* grow = g.data() + p * q_dim * nl;
                for (std::size_t q = 0; q < q_dim; ++q) {
                    const double c2 = up * v[q];
                    double* cell = grow + q * nl;
                    for (std::size_t l = 0; l < nl; ++l) cell[l] += c2 * z[l];
                }
            }
        }
    });
    Tensor<double> grad(bond.shape());
    double* gd = grad.data();
    for (std::size_t c = 0; c < nc; ++c)
        for (std::size_t i = 0; i < vol; ++i) gd[i] += partial[c][i];
    sweep_flops_ += 2 * n * vol;
    return grad;
}

void SweepTrainer::optimize_bond_(std::size_t j, Direction dir) {
    BondRecord rec;
    rec.bond = j;
    rec.dir = dir;
    const std::uint64_t flops_before = sweep_flops_;

    Tensor<double> bond = merge_bond(model_, j);
    build_uv_(j);
    for (int step = 0; step < cfg_.steps_per_bond; ++step) {
        const PassResult before = scores_pass_(bond, /*fill_residuals=*/true);
        Tensor<double> grad = gradient_pass_(bond);
        rec.grad_norm = frobenius_norm(grad);

        double alpha = cfg_.learning_rate;
        Tensor<double> candidate = bond;
        axpy(candidate, alpha, grad);
        if (cfg_.backtracking) {
            int halvings = 0;
            while (halvings < 10 && scores_pass_(candidate, false).cost > before.cost) {
                alpha *= 0.5;
                ++halvings;
                candidate = bond;
                axpy(candidate, alpha, grad);
            }
            if (halvings == 10 && scores_pass_(candidate, false).cost > before.cost)
                candidate = bond;  // keep the bond rather than increase the cost
            rec.backtrack_halvings = halvings;
        }
        bond = std::move(candidate);
    }

    {
        const std::size_t rows = cache_.left_dim() * data_.d;
        const std::size_t cols = data_.d * cache_.right_dim() * data_.n_labels;
        sweep_flops_ +=
            14 * std::min(rows, cols) * std::min(rows, cols) * std::max(rows, cols);
    }
    auto sp = split_bond(bond, dir, cfg_.trunc);
    rec.new_bond_dim = sp.new_bond;
    model_.set_bond_sites(j, std::move(sp.left_site), std::move(sp.right_site),
                          dir == Direction::right ? j + 1 : j);
    rec.flops = sweep_flops_ - flops_before;
    records_.push_back(rec);
}

SweepStats SweepTrainer::run_sweep() {
    const auto t0 = std::chrono::steady_clock::now();
    records_.clear();
    sweep_flops_ = 0;
    const std::size_t n_bonds = model_.n_sites() - 1;

    for (std::size_t j = 0; j < n_bonds; ++j) {
        optimize_bond_(j, Direction::right);
        if (j + 1 < n_bonds) {
            cache_.advance(model_, Direction::right);
            sweep_flops_ += 2 * data_.n_examples * data_.d * cache_.left_dim();
        }
    }
    for (std::size_t j = n_bonds; j-- > 0;) {
        optimize_bond_(j, Direction::left);
        if (j > 0) {
            cache_.advance(model_, Direction::left);
            sweep_flops_ += 2 * data_.n_examples * data_.d * cache_.right_dim();
        }
    }

    // Post-sweep report: bond 0 is coherent, so local scores are the exact
    // decision-function values for the updated model.
    Tensor<double> bond = merge_bond(model_, 0);
    build_uv_(0);
    const PassResult final_pass = scores_pass_(bond, false);

    SweepStats stats;
    stats.sweep = ++sweeps_done_;
    stats.cost = final_pass.cost;
    stats.train_error = final_pass.error_rate;
    stats.bond_dims = model_.bond_dims();
    stats.flops = sweep_flops_;
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
}

SweepReport SweepTrainer::train() {
    SweepReport report;
    for (int s = 0; s < cfg_.sweeps; ++s) report.sweeps.push_back(run_sweep());
    return report;
}

void SweepReport::write_jsonl(std::ostream& os) const {
    os.precision(17);
    for (const auto& s : sweeps) {
        os << "{\"sweep\":" << s.sweep << ",\"cost\":" << s.cost
           << ",\"train_error\":" << s.train_error << ",\"bond_dims\":[";
        for (std::size_t i = 0; i < s.bond_dims.size(); ++i) {
            if (i) os << ',';
            os << s.bond_dims[i];
        }
        os << "],\"seconds\":" << s.seconds << "}\n";
    }
}

}  // namespace tnml
