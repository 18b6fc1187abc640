#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "tnml/feature_map.hpp"
#include "tnml/svd.hpp"
#include "tnml/tensor.hpp"

namespace tnml {

enum class Direction { left, right };

/// Matrix product state parameterizing a multi-class weight tensor W^l.
///
/// Site j is stored as an order-3 tensor with index order
/// (left bond, physical s_j, right bond); boundary bonds have extent 1.
/// Exactly one site additionally carries the label index of extent
/// n_labels as a trailing fourth index.
///
/// Immutable for evaluation; mutation (label moves, training updates)
/// requires exclusive access.
template <typename T>
class Mps {
public:
    Mps(std::vector<Tensor<T>> sites, std::size_t label_site, std::size_t n_labels,
        FeatureKind map_kind);

    /// Entries i.i.d. uniform in [-0.5, 0.5] (deterministic under seed), bond
    /// dimensions min(max_bond, d^j, d^(N-j)), label on site 0, then globally
    /// rescaled so that the represented W has unit Frobenius norm.
    static Mps random(std::size_t n_sites, std::size_t d, std::size_t n_labels,
                      std::size_t max_bond, std::uint64_t seed,
                      FeatureKind map_kind = FeatureKind::half_angle);

    std::size_t n_sites() const { return sites_.size(); }
    std::size_t local_dim() const { return d_; }
    std::size_t n_labels() const { return n_labels_; }
    std::size_t label_site() const { return label_site_; }
    FeatureKind map_kind() const { return map_kind_; }

    const Tensor<T>& site(std::size_t j) const { return sites_[j]; }
    std::vector<std::size_t> bond_dims() const;  // N-1 entries
    std::size_t bond_dim(std::size_t j) const { return sites_[j].shape()[2]; }

    /// Frobenius norm of the represented W, via transfer contraction with
    /// per-site rescaling (never materializes W, stable for large N).
    double norm() const;
    void scale_norm(double target);

    /// Replace the two sites at bond j; `label_to` names which of the two now
    /// carries the label index. Used by label moves and training updates.
    void set_bond_sites(std::size_t j, Tensor<T> left, Tensor<T> right,
                        std::size_t label_to);

    void validate() const;

private:
    std::vector<Tensor<T>> sites_;
    std::size_t label_site_ = 0;
    std::size_t d_ = 0;
    std::size_t n_labels_ = 0;
    FeatureKind map_kind_ = FeatureKind::half_angle;
};

/// Scores f^l(x) = W^l . Phi(x) by transfer contraction from both chain ends
/// toward the label site; cost O(N d m^2), never materializes d^N objects.
template <typename T>
std::vector<T> evaluate(const Mps<T>& model, const EncodedInput<T>& input);

/// argmax over |f^l|; ties broken toward the lowest label index.
template <typename T>
int predict(const Mps<T>& model, const EncodedInput<T>& input);

/// Move the label index to `target` through a sequence of full-rank
/// neighbor-merge SVD splits; the represented W is unchanged.
template <typename T>
void move_label(Mps<T>& model, std::size_t target);

/// Bond-canonical decomposition: left-orthogonal sites 0..core_pos-1, a core
/// tensor C of shape (m_left, n_labels, m_right) carrying the label on the
/// bond just left of site core_pos, and right-orthogonal sites core_pos..N-1.
template <typename T>
struct CanonicalMps {
    std::vector<Tensor<T>> sites;  // order-3, no label index
    Tensor<T> core;                // (m_left, n_labels, m_right)
    std::size_t core_pos = 0;      // number of left-orthogonal sites
    std::size_t d = 0;
    std::size_t n_labels = 0;
    FeatureKind map_kind = FeatureKind::half_angle;
};

template <typename T>
CanonicalMps<T> canonicalize(const Mps<T>& model, std::size_t core_pos);

/// Reduced feature matrix Phi~(x) of shape (m_left, m_right): the projection
/// of Phi(x) through the orthogonal wings. evaluate == sum_l C^l . Phi~.
template <typename T>
Tensor<T> reduced_features(const CanonicalMps<T>& canonical, const EncodedInput<T>& input);

template <typename T>
std::vector<T> evaluate(const CanonicalMps<T>& canonical, const EncodedInput<T>& input);

/// Test oracle: the explicit order-(N+1) tensor with index order
/// (s_1, ..., s_N, l). Guarded to d^N * n_labels <= 2^24.
template <typename T>
Tensor<T> to_full_tensor(const Mps<T>& model);

/// Merge sites j and j+1 of the model into the order-5 bond tensor
/// (left bond, s_j, s_{j+1}, right bond, l). The label must sit on j or j+1.
template <typename T>
Tensor<T> merge_bond(const Mps<T>& model, std::size_t j);

/// Split an order-5 bond tensor back into two sites with an SVD, moving the
/// label one site along `dir`: rightward splits rows (m_l, s_j) against
/// columns (l, m_r, s_j+1); leftward is the mirror image. Returns the new
/// bond dimension; the orthogonal factor is the departing site.
template <typename T>
struct BondSplit {
    Tensor<T> left_site;
    Tensor<T> right_site;
    std::size_t new_bond = 0;
    double discarded_weight = 0.0;
};
template <typename T>
BondSplit<T> split_bond(const Tensor<T>& bond, Direction dir, const TruncParams& trunc);

/// Model file I/O (format: magic "MPSC", version, scalar kind, dims, map
/// kind, then per site the bond extents and the row-major payload).
/// Round trips are bitwise exact.
template <typename T>
void save_mps(const Mps<T>& model, const std::filesystem::path& path);
template <typename T>
Mps<T> load_mps(const std::filesystem::path& path);

/// Scalar kind byte of a model file without loading it (0 real, 1 complex).
std::uint8_t mps_file_scalar_kind(const std::filesystem::path& path);

/// Singular-value spectrum at every bond (N-1 entries, each descending),
/// obtained by sweeping the canonical core across the chain. The sum of
/// squared values at any bond equals ||W||^2.
template <typename T>
std::vector<std::vector<double>> bond_spectra(const Mps<T>& model);

}  // namespace tnml
