#include "qssep/freeprob.hpp"

#include "qssep/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <unordered_map>

namespace qssep {

int SetPartition::num_blocks() const {
    int m = 0;
    for (int i = 0; i < n; ++i) m = std::max(m, label[i] + 1);
    return m;
}

std::vector<std::vector<int>> SetPartition::blocks() const {
    std::vector<std::vector<int>> out(num_blocks());
    for (int i = 0; i < n; ++i) out[label[i]].push_back(i);
    return out;
}

std::vector<std::uint32_t> SetPartition::block_masks() const {
    std::vector<std::uint32_t> out(num_blocks(), 0u);
    for (int i = 0; i < n; ++i) out[label[i]] |= 1u << i;
    return out;
}

SetPartition SetPartition::from_blocks(int n, const std::vector<std::vector<int>>& blocks) {
    if (n < 0 || n > kMaxPartitionSize) throw SizeLimitError("partition size " + std::to_string(n) + " exceeds 12");
    std::array<int, kMaxPartitionSize> raw{};
    raw.fill(-1);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        require(!blocks[b].empty(), "empty block");
        for (int e : blocks[b]) {
            require(e >= 0 && e < n, "block element out of range");
            require(raw[e] < 0, "element in two blocks");
            raw[e] = static_cast<int>(b);
        }
    }
    SetPartition p;
    p.n = n;
    std::vector<int> relabel(blocks.size(), -1);
    int next = 0;
    for (int i = 0; i < n; ++i) {
        require(raw[i] >= 0, "element not covered by any block");
        if (relabel[raw[i]] < 0) relabel[raw[i]] = next++;
        p.label[i] = static_cast<std::uint8_t>(relabel[raw[i]]);
    }
    return p;
}

bool SetPartition::operator==(const SetPartition& o) const {
    if (n != o.n) return false;
    for (int i = 0; i < n; ++i)
        if (label[i] != o.label[i]) return false;
    return true;
}

bool is_noncrossing(const SetPartition& p) {
    // a < b < c < d with a,c in one block and b,d in another
    for (int a = 0; a < p.n; ++a)
        for (int b = a + 1; b < p.n; ++b) {
            if (p.label[b] == p.label[a]) continue;
            for (int c = b + 1; c < p.n; ++c) {
                if (p.label[c] != p.label[a]) continue;
                for (int d = c + 1; d < p.n; ++d)
                    if (p.label[d] == p.label[b]) return false;
            }
        }
    return true;
}

namespace {

void check_size(int n) {
    if (n < 0) throw InvalidArgument("negative partition size");
    if (n > kMaxPartitionSize)
        throw SizeLimitError("partition enumeration limited to n <= 12, got " + std::to_string(n));
}

struct Enumerator {
    int n;
    bool nc;
    const std::function<void(const SetPartition&)>& fn;
    SetPartition cur;
    std::array<int, kMaxPartitionSize> last{};
    std::array<bool, kMaxPartitionSize> closed{};

    void rec(int i, int nblocks) {
        if (i == n) {
            fn(cur);
            return;
        }
        for (int b = 0; b < nblocks; ++b) {
            if (nc && closed[b]) continue;
            std::array<bool, kMaxPartitionSize> saved = closed;
            if (nc) // blocks strictly inside the new chord can never grow again
                for (int j = last[b] + 1; j < i; ++j) closed[cur.label[j]] = true;
            const int saved_last = last[b];
            cur.label[i] = static_cast<std::uint8_t>(b);
            last[b] = i;
            rec(i + 1, nblocks);
            last[b] = saved_last;
            closed = saved;
        }
        cur.label[i] = static_cast<std::uint8_t>(nblocks);
        last[nblocks] = i;
        closed[nblocks] = false;
        rec(i + 1, nblocks + 1);
    }
};

} // namespace

void for_each_partition(int n, bool noncrossing_only, const std::function<void(const SetPartition&)>& fn) {
    check_size(n);
    Enumerator e{n, noncrossing_only, fn, {}, {}, {}};
    e.cur.n = n;
    e.rec(0, 0);
}

std::vector<SetPartition> enumerate_partitions(int n, bool noncrossing_only) {
    check_size(n);
    std::vector<SetPartition> out;
    out.reserve(static_cast<std::size_t>(noncrossing_only ? catalan(n) : bell(n)));
    for_each_partition(n, noncrossing_only, [&](const SetPartition& p) { out.push_back(p); });
    return out;
}

SetPartition kreweras_complement(const SetPartition& p) {
    check_size(p.n);
    if (!is_noncrossing(p)) throw DomainError("Kreweras complement requires a non-crossing partition");
    const int n = p.n;
    // pi as a permutation: each block is a cycle in increasing order
    std::array<int, kMaxPartitionSize> perm{}, inv{};
    for (const auto& B : p.blocks())
        for (std::size_t k = 0; k < B.size(); ++k) perm[B[k]] = B[(k + 1) % B.size()];
    for (int i = 0; i < n; ++i) inv[perm[i]] = i;
    std::array<int, kMaxPartitionSize> kp{};
    for (int i = 0; i < n; ++i) kp[i] = inv[(i + 1) % n];
    std::vector<std::vector<int>> blocks;
    std::array<bool, kMaxPartitionSize> seen{};
    for (int i = 0; i < n; ++i) {
        if (seen[i]) continue;
        std::vector<int> B;
        for (int j = i; !seen[j]; j = kp[j]) {
            seen[j] = true;
            B.push_back(j);
        }
        std::sort(B.begin(), B.end());
        blocks.push_back(B);
    }
    return SetPartition::from_blocks(n, blocks);
}

long long catalan(int n) {
    require(n >= 0 && n <= 30, "catalan argument out of range");
    long long c = 1;
    for (int k = 0; k < n; ++k) c = c * 2 * (2 * k + 1) / (k + 2);
    return c;
}

long long bell(int n) {
    require(n >= 0 && n <= 25, "bell argument out of range");
    std::vector<long long> row{1};
    for (int i = 0; i < n; ++i) {
        std::vector<long long> next{row.back()};
        for (long long v : row) next.push_back(next.back() + v);
        row = next;
    }
    return row.front();
}

double nc_moebius(const SetPartition& p) {
    double mu = 1.0;
    for (const auto& B : kreweras_complement(p).blocks()) {
        const int m = static_cast<int>(B.size());
        mu *= ((m - 1) % 2 ? -1.0 : 1.0) * static_cast<double>(catalan(m - 1));
    }
    return mu;
}

namespace {

struct MoebiusTerm {
    std::vector<std::uint32_t> masks;
    double coeff;
};

const std::vector<MoebiusTerm>& moebius_terms(int k) {
    static std::mutex mu;
    static std::map<int, std::vector<MoebiusTerm>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(k);
    if (it != cache.end()) return it->second;
    std::vector<MoebiusTerm> terms;
    for_each_partition(k, true, [&](const SetPartition& p) { terms.push_back({p.block_masks(), nc_moebius(p)}); });
    return cache.emplace(k, std::move(terms)).first->second;
}

const std::vector<std::vector<std::uint32_t>>& partition_masks(int k, bool nc) {
    static std::mutex mu;
    static std::map<std::pair<int, bool>, std::vector<std::vector<std::uint32_t>>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(k, nc);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    std::vector<std::vector<std::uint32_t>> out;
    for_each_partition(k, nc, [&](const SetPartition& p) { out.push_back(p.block_masks()); });
    return cache.emplace(key, std::move(out)).first->second;
}

void check_arity(std::size_t k) {
    if (k == 0) throw InvalidArgument("cumulant of an empty tuple");
    if (k > static_cast<std::size_t>(kMaxCumulantArity))
        throw SizeLimitError("cumulant arity limited to 10, got " + std::to_string(k));
}

// phi of every sub-tuple, indexed by the bitmask of positions
template <class T>
std::vector<T> subset_moments(const BasicMomentFunctional<T>& phi, std::span<const int> idx) {
    const int k = static_cast<int>(idx.size());
    std::vector<T> out(std::size_t{1} << k, T(1));
    std::vector<int> sub;
    for (std::uint32_t S = 1; S < (1u << k); ++S) {
        sub.clear();
        for (int i = 0; i < k; ++i)
            if (S & (1u << i)) sub.push_back(idx[i]);
        out[S] = phi(sub);
    }
    return out;
}

template <class T>
T classical_impl(const BasicMomentFunctional<T>& phi, std::span<const int> idx) {
    check_arity(idx.size());
    const int k = static_cast<int>(idx.size());
    const auto mom = subset_moments(phi, idx);
    std::vector<double> weight(k + 1, 0.0);
    double f = 1.0;
    for (int b = 1; b <= k; ++b) {
        weight[b] = ((b - 1) % 2 ? -1.0 : 1.0) * f; // (-1)^{b-1} (b-1)!
        f *= b;
    }
    T sum(0);
    for (const auto& masks : partition_masks(k, false)) {
        T prod(1);
        for (auto m : masks) prod *= mom[m];
        sum += weight[masks.size()] * prod;
    }
    return sum;
}

template <class T>
T free_impl(const BasicMomentFunctional<T>& phi, std::span<const int> idx) {
    check_arity(idx.size());
    const int k = static_cast<int>(idx.size());
    const auto mom = subset_moments(phi, idx);
    std::vector<T> kappa(std::size_t{1} << k, T(0));
    std::vector<bool> done(kappa.size(), false);
    // kappa(S) = phi(S) - sum over non-maximal NC partitions of S of prod kappa(B)
    std::function<T(std::uint32_t)> rec = [&](std::uint32_t S) -> T {
        if (done[S]) return kappa[S];
        const int m = std::popcount(S);
        std::array<int, kMaxCumulantArity> pos{};
        for (int i = 0, c = 0; i < k; ++i)
            if (S & (1u << i)) pos[c++] = i;
        T value = mom[S];
        for (const auto& masks : partition_masks(m, true)) {
            if (masks.size() == 1) continue;
            T prod(1);
            for (auto bm : masks) {
                std::uint32_t sub = 0;
                for (int j = 0; j < m; ++j)
                    if (bm & (1u << j)) sub |= 1u << pos[j];
                prod *= rec(sub);
            }
            value -= prod;
        }
        kappa[S] = value;
        done[S] = true;
        return value;
    };
    return rec((1u << k) - 1);
}

} // namespace

double classical_cumulant(const MomentFunctional& phi, std::span<const int> indices) {
    return classical_impl<double>(phi, indices);
}

std::complex<double> classical_cumulant(const ComplexMomentFunctional& phi, std::span<const int> indices) {
    return classical_impl<std::complex<double>>(phi, indices);
}

double free_cumulant(const MomentFunctional& phi, std::span<const int> indices) {
    return free_impl<double>(phi, indices);
}

std::complex<double> free_cumulant(const ComplexMomentFunctional& phi, std::span<const int> indices) {
    return free_impl<std::complex<double>>(phi, indices);
}

double free_cumulant_moebius(const MomentFunctional& phi, std::span<const int> indices) {
    check_arity(indices.size());
    const auto mom = subset_moments(phi, indices);
    double sum = 0.0;
    for (const auto& t : moebius_terms(static_cast<int>(indices.size()))) {
        double prod = t.coeff;
        for (auto m : t.masks) prod *= mom[m];
        sum += prod;
    }
    return sum;
}


std::vector<double> classical_cumulants_from_moments(const std::vector<double>& m) {
    // kappa_n = m_n - sum_{k=1}^{n-1} C(n-1, k-1) kappa_k m_{n-k}
    const int n = static_cast<int>(m.size()) - 1;
    std::vector<double> kappa(std::max(n + 1, 1), 0.0);
    for (int q = 1; q <= n; ++q) {
        double acc = m[q];
        double binom = 1.0;
        for (int k = 1; k < q; ++k) {
            acc -= binom * kappa[k] * m[q - k];
            binom = binom * (q - k) / k;
        }
        kappa[q] = acc;
    }
    return kappa;
}

double indicator_free_cumulant(std::span<const double> x) {
    check_arity(x.size());
    for (double v : x)
        if (!(v >= 0.0 && v <= 1.0)) throw DomainError("indicator positions must lie in [0,1]");
    const int k = static_cast<int>(x.size());
    std::array<double, std::size_t{1} << kMaxCumulantArity> mins{};
    for (std::uint32_t S = 1; S < (1u << k); ++S) {
        const int low = std::countr_zero(S);
        const std::uint32_t rest = S & (S - 1);
        mins[S] = rest ? std::min(x[low], mins[rest]) : x[low];
    }
    double sum = 0.0;
    for (const auto& t : moebius_terms(k)) {
        double prod = t.coeff;
        for (auto m : t.masks) prod *= mins[m];
        sum += prod;
    }
    return sum;
}

LocalCumulant constant_cumulants(std::vector<double> kappa) {
    return [kappa = std::move(kappa)](std::span<const double> x) {
        const std::size_t p = x.size();
        if (p >= kappa.size()) throw SizeLimitError("no cumulant of order " + std::to_string(p));
        return kappa[p];
    };
}

double loop_moment_density(const LocalCumulant& g, const std::vector<std::function<double(double)>>& psi, int M,
                           double max_points) {
    const int p = static_cast<int>(psi.size());
    require(p >= 1, "need at least one test function");
    if (p > 8) throw SizeLimitError("loop moments limited to p <= 8");
    require(M >= 1, "grid size must be positive");
    double total = 0.0;
    for_each_partition(p, true, [&](const SetPartition& pi) {
        const SetPartition K = kreweras_complement(pi);
        const int d = K.num_blocks();
        int Md = M;
        while (Md > 1 && std::pow(static_cast<double>(Md), d) > max_points) --Md;
        const auto blocks = pi.blocks();
        std::vector<int> digit(d, 0);
        std::vector<double> y(d), x(p), xb;
        const double w = std::pow(1.0 / Md, d);
        double acc = 0.0;
        while (true) {
            for (int a = 0; a < d; ++a) y[a] = (digit[a] + 0.5) / Md;
            double v = 1.0;
            for (int j = 0; j < p; ++j) {
                x[j] = y[K.label[j]];
                v *= psi[j](x[j]);
            }
            if (v != 0.0) {
                for (const auto& B : blocks) {
                    xb.clear();
                    for (int j : B) xb.push_back(x[j]);
                    v *= g(xb);
                }
                acc += v;
            }
            int a = 0;
            while (a < d && ++digit[a] == Md) digit[a++] = 0;
            if (a == d) break;
        }
        total += acc * w;
    });
    return total;
}

} // namespace qssep
