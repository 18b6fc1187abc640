#include "tnml/mps.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace tnml {

namespace {

constexpr char kMagic[4] = {'M', 'P', 'S', 'C'};
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::size_t kFullTensorGuard = std::size_t{1} << 24;

std::size_t pow_sat(std::size_t base, std::size_t exp, std::size_t cap) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (r >= cap / base + 1) return cap;
        r *= base;
        if (r >= cap) return cap;
    }
    return r;
}

TruncParams lossless_trunc() {
    return TruncParams{};  // max_rank unbounded, cutoff 0, min_rank 1
}

template <typename T>
void scale_last_axis(Tensor<T>& t, const std::vector<double>& s) {
    const std::size_t k = t.shape().back();
    const std::size_t rows = t.size() / k;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < k; ++j) t[i * k + j] *= T(s[j]);
}

template <typename T>
void scale_first_axis(Tensor<T>& t, const std::vector<double>& s) {
    const std::size_t k = t.shape().front();
    const std::size_t block = t.size() / k;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < block; ++j) t[i * block + j] *= T(s[i]);
}

}  // namespace

template <typename T>
Mps<T>::Mps(std::vector<Tensor<T>> sites, std::size_t label_site, std::size_t n_labels,
            FeatureKind map_kind)
    : sites_(std::move(sites)), label_site_(label_site), n_labels_(n_labels),
      map_kind_(map_kind) {
    if (sites_.empty()) throw std::invalid_argument("mps: no sites");
    d_ = sites_[0].shape().at(1);
    validate();
}

template <typename T>
void Mps<T>::validate() const {
    const std::size_t n = sites_.size();
    if (label_site_ >= n) throw std::invalid_argument("mps: label site out of range");
    if (n_labels_ < 1) throw std::invalid_argument("mps: need at least one label");
    for (std::size_t j = 0; j < n; ++j) {
        const auto& a = sites_[j];
        const std::size_t want_order = (j == label_site_) ? 4 : 3;
        if (a.order() != want_order)
            throw std::invalid_argument("mps: site has wrong order");
        if (a.shape()[1] != d_)
            throw std::invalid_argument("mps: inconsistent local dimension");
        if (j == label_site_ && a.shape()[3] != n_labels_)
            throw std::invalid_argument("mps: label extent mismatch");
        if (j > 0 && a.shape()[0] != sites_[j - 1].shape()[2])
            throw std::invalid_argument("mps: bond extents do not chain");
        if (!a.finite()) throw std::invalid_argument("mps: non-finite site values");
    }
    if (sites_.front().shape()[0] != 1 || sites_.back().shape()[2] != 1)
        throw std::invalid_argument("mps: boundary bonds must have extent 1");
}

template <typename T>
Mps<T> Mps<T>::random(std::size_t n_sites, std::size_t d, std::size_t n_labels,
                      std::size_t max_bond, std::uint64_t seed, FeatureKind map_kind) {
    if (n_sites < 1 || d < 2 || n_labels < 1 || max_bond < 1)
        throw std::invalid_argument("mps: invalid dimensions");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    auto draw = [&]() -> T {
        if constexpr (std::is_same_v<T, double>)
            return dist(rng);
        else
            return T{dist(rng), dist(rng)};
    };

    std::vector<std::size_t> bonds(n_sites > 0 ? n_sites - 1 : 0);
    for (std::size_t j = 0; j + 1 < n_sites; ++j)
        bonds[j] = std::min({max_bond, pow_sat(d, j + 1, max_bond),
                             pow_sat(d, n_sites - 1 - j, max_bond)});

    std::vector<Tensor<T>> sites;
    sites.reserve(n_sites);
    for (std::size_t j = 0; j < n_sites; ++j) {
        const std::size_t ml = (j == 0) ? 1 : bonds[j - 1];
        const std::size_t mr = (j + 1 == n_sites) ? 1 : bonds[j];
        std::vector<std::size_t> shape{ml, d, mr};
        if (j == 0) shape.push_back(n_labels);
        Tensor<T> a(shape);
        for (auto& v : a.values()) v = draw();
        sites.push_back(std::move(a));
    }
    Mps<T> m(std::move(sites), 0, n_labels, map_kind);
    m.scale_norm(1.0);
    return m;
}

template <typename T>
std::vector<std::size_t> Mps<T>::bond_dims() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j + 1 < sites_.size(); ++j) out.push_back(sites_[j].shape()[2]);
    return out;
}

namespace {

// log of ||W||^2 via the transfer contraction, rescaling per site.
template <typename T>
double log_norm2(const std::vector<Tensor<T>>& sites) {
    Tensor<T> rho({1, 1}, {T{1.0}});
    double acc = 0.0;
    for (const auto& a : sites) {
        Tensor<T> x = contract(rho, a, {{1, 0}});  // (bar, s, b [, l])
        std::vector<std::pair<std::size_t, std::size_t>> pairs{{0, 0}, {1, 1}};
        if (a.order() == 4) pairs.push_back({3, 3});
        Tensor<T> next = contract(conjugate(a), x,
                                  std::span<const std::pair<std::size_t, std::size_t>>(pairs));
        const double f = frobenius_norm(next);
        if (f == 0.0) return -std::numeric_limits<double>::infinity();
        scale(next, T(1.0 / f));
        acc += std::log(f);
        rho = std::move(next);
    }
    return acc + std::log(std::abs(rho[0]));
}

}  // namespace

template <typename T>
double Mps<T>::norm() const {
    const double l2 = log_norm2(sites_);
    return std::isinf(l2) ? 0.0 : std::exp(0.5 * l2);
}

template <typename T>
void Mps<T>::scale_norm(double target) {
    if (target <= 0) throw std::invalid_argument("mps: norm target must be positive");
    const double l2 = log_norm2(sites_);
    if (std::isinf(l2)) throw std::runtime_error("mps: cannot normalize a zero model");
    const double per_site =
        std::exp((std::log(target) - 0.5 * l2) / static_cast<double>(sites_.size()));
    for (auto& a : sites_) scale(a, T(per_site));
}

template <typename T>
void Mps<T>::set_bond_sites(std::size_t j, Tensor<T> left, Tensor<T> right,
                            std::size_t label_to) {
    if (j + 1 >= sites_.size()) throw std::invalid_argument("mps: bond out of range");
    if (label_to != j && label_to != j + 1)
        throw std::invalid_argument("mps: label must land on a bond site");
    if (left.shape()[2] != right.shape()[0])
        throw std::invalid_argument("mps: split sites do not chain");
    sites_[j] = std::move(left);
    sites_[j + 1] = std::move(right);
    label_site_ = label_to;
}

template <typename T>
std::vector<T> evaluate(const Mps<T>& model, const EncodedInput<T>& input) {
    if (input.d != model.local_dim() || input.n_sites != model.n_sites())
        throw std::invalid_argument("evaluate: encoded input does not match model");
    const std::size_t n = model.n_sites();
    const std::size_t d = model.local_dim();
    const std::size_t lsite = model.label_site();

    std::vector<T> lvec{T{1.0}}, tmp;
    for (std::size_t j = 0; j < lsite; ++j) {
        const auto& a = model.site(j);
        const std::size_t ml = a.shape()[0], mr = a.shape()[2];
        const T* ad = a.data();
        auto phi = input.site(j);
        tmp.assign(mr, T{});
        for (std::size_t ai = 0; ai < ml; ++ai)
            for (std::size_t s = 0; s < d; ++s) {
                const T w = lvec[ai] * phi[s];
                const T* row = ad + (ai * d + s) * mr;
                for (std::size_t b = 0; b < mr; ++b) tmp[b] += w * row[b];
            }
        lvec.swap(tmp);
    }

    std::vector<T> rvec{T{1.0}};
    for (std::size_t j = n; j-- > lsite + 1;) {
        const auto& a = model.site(j);
        const std::size_t ml = a.shape()[0], mr = a.shape()[2];
        const T* ad = a.data();
        auto phi = input.site(j);
        tmp.assign(ml, T{});
        for (std::size_t ai = 0; ai < ml; ++ai) {
            T acc{};
            for (std::size_t s = 0; s < d; ++s) {
                const T* row = ad + (ai * d + s) * mr;
                T partial{};
                for (std::size_t b = 0; b < mr; ++b) partial += row[b] * rvec[b];
                acc += phi[s] * partial;
            }
            tmp[ai] = acc;
        }
        rvec.swap(tmp);
    }

    const auto& a = model.site(lsite);
    const std::size_t ml = a.shape()[0], mr = a.shape()[2], nl = a.shape()[3];
    const T* ad = a.data();
    auto phi = input.site(lsite);
    std::vector<T> scores(nl, T{});
    for (std::size_t ai = 0; ai < ml; ++ai)
        for (std::size_t s = 0; s < d; ++s) {
            const T w = lvec[ai] * phi[s];
            for (std::size_t b = 0; b < mr; ++b) {
                const T c = w * rvec[b];
                const T* cell = ad + ((ai * d + s) * mr + b) * nl;
                for (std::size_t l = 0; l < nl; ++l) scores[l] += c * cell[l];
            }
        }
    return scores;
}

template <typename T>
int predict(const Mps<T>& model, const EncodedInput<T>& input) {
    const auto scores = evaluate(model, input);
    std::size_t best = 0;
    for (std::size_t l = 1; l < scores.size(); ++l)
        if (std::abs(scores[l]) > std::abs(scores[best])) best = l;
    return static_cast<int>(best);
}

template <typename T>
Tensor<T> merge_bond(const Mps<T>& model, std::size_t j) {
    if (j + 1 >= model.n_sites()) throw std::invalid_argument("merge_bond: bond out of range");
    const std::size_t lsite = model.label_site();
    if (lsite != j && lsite != j + 1)
        throw std::invalid_argument("merge_bond: label index not on the active bond");
    Tensor<T> b = contract(model.site(j), model.site(j + 1), {{2, 0}});
    if (lsite == j) return permute(b, {0, 1, 3, 4, 2});  // (ml, s, l, s', mr) -> order-5
    return b;                                            // already (ml, s, s', mr, l)
}

template <typename T>
BondSplit<T> split_bond(const Tensor<T>& bond, Direction dir, const TruncParams& trunc) {
    if (bond.order() != 5) throw std::invalid_argument("split_bond: expected an order-5 tensor");
    BondSplit<T> out;
    if (dir == Direction::right) {
        auto r = svd(bond, {0, 1}, {4, 3, 2}, trunc);
        scale_first_axis(r.V, r.S);
        out.left_site = std::move(r.U);               // (ml, s, k)
        out.right_site = permute(r.V, {0, 3, 2, 1});  // (k, l, mr, s') -> (k, s', mr, l)
        out.new_bond = r.kept_rank;
        out.discarded_weight = r.discarded_weight;
    } else {
        auto r = svd(bond, {0, 1, 4}, {2, 3}, trunc);
        scale_last_axis(r.U, r.S);
        out.left_site = permute(r.U, {0, 1, 3, 2});  // (ml, s, l, k) -> (ml, s, k, l)
        out.right_site = std::move(r.V);             // (k, s', mr)
        out.new_bond = r.kept_rank;
        out.discarded_weight = r.discarded_weight;
    }
    return out;
}

template <typename T>
void move_label(Mps<T>& model, std::size_t target) {
    if (target >= model.n_sites()) throw std::invalid_argument("move_label: target out of range");
    while (model.label_site() < target) {
        const std::size_t j = model.label_site();
        auto sp = split_bond(merge_bond(model, j), Direction::right, lossless_trunc());
        model.set_bond_sites(j, std::move(sp.left_site), std::move(sp.right_site), j + 1);
    }
    while (model.label_site() > target) {
        const std::size_t j = model.label_site() - 1;
        auto sp = split_bond(merge_bond(model, j), Direction::left, lossless_trunc());
        model.set_bond_sites(j, std::move(sp.left_site), std::move(sp.right_site), j);
    }
}

template <typename T>
CanonicalMps<T> canonicalize(const Mps<T>& model, std::size_t core_pos) {
    if (core_pos >= model.n_sites())
        throw std::invalid_argument("canonicalize: core position out of range");
    Mps<T> m = model;
    move_label(m, core_pos);
    const std::size_t n = m.n_sites();

    std::vector<Tensor<T>> sites;
    sites.reserve(n);
    for (std::size_t j = 0; j < n; ++j) sites.push_back(m.site(j));

    // Left-orthogonalize sites 0..core_pos-1, pushing the non-unitary part right.
    for (std::size_t j = 0; j < core_pos; ++j) {
        auto r = svd(sites[j], {0, 1}, {2}, lossless_trunc());
        scale_first_axis(r.V, r.S);
        sites[j] = std::move(r.U);
        sites[j + 1] = contract(r.V, sites[j + 1], {{1, 0}});  // (k, s, mr [, l])
    }
    // Right-orthogonalize sites N-1..core_pos+1, pushing left.
    for (std::size_t j = n; j-- > core_pos + 1;) {
        auto r = svd(sites[j], {0}, {1, 2}, lossless_trunc());
        scale_last_axis(r.U, r.S);
        sites[j] = std::move(r.V);  // (k, s, mr)
        Tensor<T> prev = contract(sites[j - 1], r.U, {{2, 0}});
        if (j - 1 == core_pos)
            prev = permute(prev, {0, 1, 3, 2});  // (ml, s, l, k) -> (ml, s, k, l)
        sites[j - 1] = std::move(prev);
    }
    // Extract the bond core from the site at core_pos.
    auto r = svd(sites[core_pos], {0, 3}, {1, 2}, lossless_trunc());
    scale_last_axis(r.U, r.S);

    CanonicalMps<T> canon;
    canon.core = std::move(r.U);  // (m_left, n_labels, m_right)
    sites[core_pos] = std::move(r.V);
    canon.sites = std::move(sites);
    canon.core_pos = core_pos;
    canon.d = m.local_dim();
    canon.n_labels = m.n_labels();
    canon.map_kind = m.map_kind();
    return canon;
}

template <typename T>
Tensor<T> reduced_features(const CanonicalMps<T>& canonical, const EncodedInput<T>& input) {
    if (input.d != canonical.d || input.n_sites != canonical.sites.size())
        throw std::invalid_argument("reduced_features: input does not match model");
    const std::size_t d = canonical.d;
    std::vector<T> lvec{T{1.0}}, rvec{T{1.0}}, tmp;
    for (std::size_t j = 0; j < canonical.core_pos; ++j) {
        const auto& a = canonical.sites[j];
        const std::size_t ml = a.shape()[0], mr = a.shape()[2];
        auto phi = input.site(j);
        tmp.assign(mr, T{});
        for (std::size_t ai = 0; ai < ml; ++ai)
            for (std::size_t s = 0; s < d; ++s) {
                const T w = lvec[ai] * phi[s];
                const T* row = a.data() + (ai * d + s) * mr;
                for (std::size_t b = 0; b < mr; ++b) tmp[b] += w * row[b];
            }
        lvec.swap(tmp);
    }
    for (std::size_t j = canonical.sites.size(); j-- > canonical.core_pos;) {
        const auto& a = canonical.sites[j];
        const std::size_t ml = a.shape()[0], mr = a.shape()[2];
        auto phi = input.site(j);
        tmp.assign(ml, T{});
        for (std::size_t ai = 0; ai < ml; ++ai) {
            T acc{};
            for (std::size_t s = 0; s < d; ++s) {
                const T* row = a.data() + (ai * d + s) * mr;
                T partial{};
                for (std::size_t b = 0; b < mr; ++b) partial += row[b] * rvec[b];
                acc += phi[s] * partial;
            }
            tmp[ai] = acc;
        }
        rvec.swap(tmp);
    }
    Tensor<T> phi_red({lvec.size(), rvec.size()});
    for (std::size_t a = 0; a < lvec.size(); ++a)
        for (std::size_t b = 0; b < rvec.size(); ++b)
            phi_red.at({a, b}) = lvec[a] * rvec[b];
    return phi_red;
}

template <typename T>
std::vector<T> evaluate(const CanonicalMps<T>& canonical, const EncodedInput<T>& input) {
    Tensor<T> phi_red = reduced_features(canonical, input);
    const auto& c = canonical.core;
    const std::size_t nl = canonical.n_labels;
    std::vector<T> scores(nl, T{});
    const std::size_t a_dim = c.shape()[0], b_dim = c.shape()[2];
    for (std::size_t a = 0; a < a_dim; ++a)
        for (std::size_t l = 0; l < nl; ++l)
            for (std::size_t b = 0; b < b_dim; ++b)
                scores[l] += c.at({a, l, b}) * phi_red.at({a, b});
    return scores;
}

template <typename T>
Tensor<T> to_full_tensor(const Mps<T>& model) {
    const std::size_t n = model.n_sites();
    const std::size_t total =
        pow_sat(model.local_dim(), n, kFullTensorGuard) * model.n_labels();
    if (total > kFullTensorGuard)
        throw std::invalid_argument("to_full_tensor: d^N * n_labels exceeds the size guard");

    Tensor<T> acc = model.site(0);
    std::size_t bond_axis = 2;
    std::size_t label_axis = 3;
    bool have_label = model.label_site() == 0;
    for (std::size_t j = 1; j < n; ++j) {
        const auto& a = model.site(j);
        const std::size_t old_order = acc.order();
        acc = contract(acc, a, {{bond_axis, 0}});
        if (have_label && label_axis > bond_axis) --label_axis;
        bond_axis = old_order;  // the site's right bond lands after acc's free axes
        if (a.order() == 4) {
            have_label = true;
            label_axis = bond_axis + 1;
        }
    }
    // Axes: 0 is the left boundary (extent 1), the s_j in order, the label,
    // and the right boundary. Move the unit extents last and reshape away.
    std::vector<std::size_t> perm;
    for (std::size_t ax = 1; ax < acc.order(); ++ax)
        if (ax != bond_axis && ax != label_axis) perm.push_back(ax);
    perm.push_back(label_axis);
    perm.push_back(0);
    perm.push_back(bond_axis);
    acc = permute(acc, std::span<const std::size_t>(perm));
    std::vector<std::size_t> shape(n, model.local_dim());
    shape.push_back(model.n_labels());
    return reshape(acc, std::move(shape));
}

template <typename T>
std::vector<std::vector<double>> bond_spectra(const Mps<T>& model) {
    const std::size_t n = model.n_sites();
    std::vector<std::vector<double>> spectra;
    if (n < 2) return spectra;
    spectra.reserve(n - 1);
    auto canon = canonicalize(model, 0);
    Tensor<T> core = std::move(canon.core);  // (a, l, b)
    for (std::size_t k = 0; k + 1 < n; ++k) {
        Tensor<T> t = contract(core, canon.sites[k], {{2, 0}});  // (a, l, s, c)
        auto r = svd(t, {0, 2}, {1, 3}, TruncParams{});
        spectra.push_back(r.S);
        scale_first_axis(r.V, r.S);
        core = std::move(r.V);  // (rank, l, c)
    }
    return spectra;
}

template std::vector<std::vector<double>> bond_spectra(const Mps<double>&);
template std::vector<std::vector<double>> bond_spectra(const Mps<cplx>&);

// ---------------------------------------------------------------------------
// Model file I/O. Little-endian; payload row-major in site index order
// (left bond, s, right bond) with the label index trailing on the label site.

namespace {

void put_bytes(std::ofstream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    put_bytes(os, b, 4);
}

void put_u8(std::ofstream& os, std::uint8_t v) { put_bytes(os, &v, 1); }

void put_f64(std::ofstream& os, double v) {
    const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    put_bytes(os, b, 8);
}

struct Reader {
    std::ifstream is;
    explicit Reader(const std::filesystem::path& p) : is(p, std::ios::binary) {
        if (!is) throw std::runtime_error("mps file: cannot open " + p.string());
    }
    void bytes(void* p, std::size_t n) {
        is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (is.gcount() != static_cast<std::streamsize>(n))
            throw std::runtime_error("mps file: truncated");
    }
    std::uint32_t u32() {
        unsigned char b[4];
        bytes(b, 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) |
               (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::uint8_t u8() {
        unsigned char b;
        bytes(&b, 1);
        return b;
    }
    double f64() {
        unsigned char b[8];
        bytes(b, 8);
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return std::bit_cast<double>(u);
    }
    bool at_eof() {
        is.peek();
        return is.eof();
    }
};

template <typename T>
constexpr std::uint8_t scalar_kind_byte() {
    return std::is_same_v<T, double> ? 0 : 1;
}

}  // namespace

template <typename T>
void save_mps(const Mps<T>& model, const std::filesystem::path& path) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("mps file: cannot open " + tmp.string());
        put_bytes(os, kMagic, 4);
        put_u32(os, kFormatVersion);
        put_u8(os, scalar_kind_byte<T>());
        put_u32(os, static_cast<std::uint32_t>(model.n_sites()));
        put_u32(os, static_cast<std::uint32_t>(model.local_dim()));
        put_u32(os, static_cast<std::uint32_t>(model.n_labels()));
        put_u32(os, static_cast<std::uint32_t>(model.label_site()));
        put_u8(os, static_cast<std::uint8_t>(model.map_kind()));
        for (std::size_t j = 0; j < model.n_sites(); ++j) {
            const auto& a = model.site(j);
            put_u32(os, static_cast<std::uint32_t>(a.shape()[0]));
            put_u32(os, static_cast<std::uint32_t>(a.shape()[2]));
            for (const T& v : a.values()) {
                if constexpr (std::is_same_v<T, double>) {
                    put_f64(os, v);
                } else {
                    put_f64(os, v.real());
                    put_f64(os, v.imag());
                }
            }
        }
        if (!os) throw std::runtime_error("mps file: write failed");
    }
    std::filesystem::rename(tmp, path);
}

std::uint8_t mps_file_scalar_kind(const std::filesystem::path& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("mps file: bad magic");
    (void)r.u32();
    return r.u8();
}

template <typename T>
Mps<T> load_mps(const std::filesystem::path& path) {
    Reader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("mps file: bad magic");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw std::runtime_error("mps file: unsupported format version " +
                                 std::to_string(version));
    const std::uint8_t kind = r.u8();
    if (kind != scalar_kind_byte<T>())
        throw std::runtime_error("mps file: scalar kind mismatch");
    const std::uint32_t n = r.u32();
    const std::uint32_t d = r.u32();
    const std::uint32_t nl = r.u32();
    const std::uint32_t label_site = r.u32();
    const std::uint8_t map_kind = r.u8();
    if (map_kind > 3) throw std::runtime_error("mps file: unknown feature map kind");
    if (n == 0 || d < 2 || nl == 0 || label_site >= n)
        throw std::runtime_error("mps file: invalid header dimensions");

    std::vector<Tensor<T>> sites;
    sites.reserve(n);
    for (std::uint32_t j = 0; j < n; ++j) {
        const std::uint32_t ml = r.u32();
        const std::uint32_t mr = r.u32();
        if (ml == 0 || mr == 0) throw std::runtime_error("mps file: zero bond extent");
        std::vector<std::size_t> shape{ml, d, mr};
        if (j == label_site) shape.push_back(nl);
        Tensor<T> a(shape);
        for (auto& v : a.values()) {
            if constexpr (std::is_same_v<T, double>) {
                v = r.f64();
            } else {
                const double re = r.f64();
                const double im = r.f64();
                v = T{re, im};
            }
        }
        if (!a.finite()) throw std::runtime_error("mps file: non-finite payload");
        sites.push_back(std::move(a));
    }
    if (!r.at_eof()) throw std::runtime_error("mps file: trailing bytes");
    try {
        return Mps<T>(std::move(sites), label_site, nl, static_cast<FeatureKind>(map_kind));
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("mps file: ") + e.what());
    }
}

template class Mps<double>;
template class Mps<cplx>;

template std::vector<double> evaluate(const Mps<double>&, const EncodedInput<double>&);
template std::vector<cplx> evaluate(const Mps<cplx>&, const EncodedInput<cplx>&);
template int predict(const Mps<double>&, const EncodedInput<double>&);
template int predict(const Mps<cplx>&, const EncodedInput<cplx>&);
template void move_label(Mps<double>&, std::size_t);
template void move_label(Mps<cplx>&, std::size_t);
template CanonicalMps<double> canonicalize(const Mps<double>&, std::size_t);
template CanonicalMps<cplx> canonicalize(const Mps<cplx>&, std::size_t);
template Tensor<double> reduced_features(const CanonicalMps<double>&,
                                         const EncodedInput<double>&);
template Tensor<cplx> reduced_features(const CanonicalMps<cplx>&, const EncodedInput<cplx>&);
template std::vector<double> evaluate(const CanonicalMps<double>&,
                                      const EncodedInput<double>&);
template std::vector<cplx> evaluate(const CanonicalMps<cplx>&, const EncodedInput<cplx>&);
template Tensor<double> to_full_tensor(const Mps<double>&);
template Tensor<cplx> to_full_tensor(const Mps<cplx>&);
template Tensor<double> merge_bond(const Mps<double>&, std::size_t);
template Tensor<cplx> merge_bond(const Mps<cplx>&, std::size_t);
template BondSplit<double> split_bond(const Tensor<double>&, Direction, const TruncParams&);
template BondSplit<cplx> split_bond(const Tensor<cplx>&, Direction, const TruncParams&);
template void save_mps(const Mps<double>&, const std::filesystem::path&);
template void save_mps(const Mps<cplx>&, const std::filesystem::path&);
template Mps<double> load_mps(const std::filesystem::path&);
template Mps<cplx> load_mps(const std::filesystem::path&);

}  // namespace tnml
