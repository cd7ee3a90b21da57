#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace qssep {

inline constexpr int kMaxPartitionSize = 12;
inline constexpr int kMaxCumulantArity = 10;

/// Set partition of {0, ..., n-1} stored as a restricted growth string:
/// label[i] is the block of i, blocks numbered in order of their smallest element.
struct SetPartition {
    int n = 0;
    std::array<std::uint8_t, kMaxPartitionSize> label{};

    int num_blocks() const;
    /// Blocks with sorted elements, ordered by smallest element.
    std::vector<std::vector<int>> blocks() const;
    /// Bitmask of each block, same order as blocks().
    std::vector<std::uint32_t> block_masks() const;

    static SetPartition from_blocks(int n, const std::vector<std::vector<int>>& blocks);

    bool operator==(const SetPartition& o) const;
};

bool is_noncrossing(const SetPartition& p);

/// All partitions of an n-set (n <= 12), or only the non-crossing ones.
std::vector<SetPartition> enumerate_partitions(int n, bool noncrossing_only);

/// Visitor form; avoids materialising Bell(n) partitions.
void for_each_partition(int n, bool noncrossing_only, const std::function<void(const SetPartition&)>& fn);

/// Kreweras complement K(pi) for non-crossing pi. Element j of K(pi) sits
/// between j and j+1 on the circle; as permutations K(pi) = pi^{-1} gamma.
SetPartition kreweras_complement(const SetPartition& p);

/// Moebius function mu(pi, 1_n) on NC(n).
double nc_moebius(const SetPartition& p);

long long catalan(int n);
long long bell(int n);

/// phi(a_{i_1} ... a_{i_k}) for an index tuple.
template <class T>
using BasicMomentFunctional = std::function<T(std::span<const int>)>;
using MomentFunctional = BasicMomentFunctional<double>;
using ComplexMomentFunctional = BasicMomentFunctional<std::complex<double>>;

/// kappa_k(a_{i_1}, ..., a_{i_k}) through the full partition lattice.
double classical_cumulant(const MomentFunctional& phi, std::span<const int> indices);
std::complex<double> classical_cumulant(const ComplexMomentFunctional& phi, std::span<const int> indices);

/// Free cumulant by the NC-lattice recursion, memoised on sub-tuples.
double free_cumulant(const MomentFunctional& phi, std::span<const int> indices);
std::complex<double> free_cumulant(const ComplexMomentFunctional& phi, std::span<const int> indices);

/// Same quantity as a Moebius sum over NC(k); used in tight loops.
double free_cumulant_moebius(const MomentFunctional& phi, std::span<const int> indices);

std::vector<double> classical_cumulants_from_moments(const std::vector<double>& m);

/// g_p(x_1, ..., x_p): free cumulant of indicators I_x = 1_{[0,x]} under
/// phi(I_{x_1} ... I_{x_k}) = min x. Arguments in cyclic order, p <= 10.
double indicator_free_cumulant(std::span<const double> x);

/// Local cumulant g_p evaluated at a tuple (p = size of the tuple).
using LocalCumulant = std::function<double(std::span<const double>)>;

/// Constant g_p = kappa[p] (kappa[0] unused).
LocalCumulant constant_cumulants(std::vector<double> kappa);

/// int T_p(x) prod_j psi_j(x_j) dx, summed over pi in NC(p) with g_pi and
/// the delta constraints of K(pi). Midpoint rule with M points per free
/// variable; terms whose grid would exceed max_points use a coarser grid.
double loop_moment_density(const LocalCumulant& g, const std::vector<std::function<double(double)>>& psi,
                           int M = 200, double max_points = 2e8);

/// Free cumulants kappa_1..kappa_n of a single variable from moments m_1..m_n
/// (m[0] is treated as 1), and the inverse map. No arity limit.
template <class T>
inline std::vector<T> free_cumulants_from_moments(const std::vector<T>& m) {
    // m_n = sum_{s=1}^n kappa_s [z^{n-s}] M(z)^s with M(z) = sum_j m_j z^j, m_0 = 1
    const int n = static_cast<int>(m.size()) - 1;
    std::vector<T> kappa(n + 1, T(0));
    if (n < 1) return kappa;
    std::vector<T> mm(m);
    mm[0] = T(1);
    // pw[s][j] = [z^j] M(z)^s
    std::vector<std::vector<T>> pw(n + 1, std::vector<T>(n + 1, T(0)));
    pw[0][0] = T(1);
    for (int s = 1; s <= n; ++s)
        for (int j = 0; j <= n; ++j) {
            T acc(0);
            for (int i = 0; i <= j; ++i) acc += mm[i] * pw[s - 1][j - i];
            pw[s][j] = acc;
        }
    for (int q = 1; q <= n; ++q) {
        T acc = mm[q];
        for (int s = 1; s < q; ++s) acc -= kappa[s] * pw[s][q - s];
        kappa[q] = acc; // the s = q coefficient is [z^0] M^q = 1
    }
    return kappa;
}

template <class T>
inline std::vector<T> moments_from_free_cumulants(const std::vector<T>& kappa) {
    const int n = static_cast<int>(kappa.size()) - 1;
    std::vector<T> m(n + 1, T(0));
    if (n < 0) return m;
    m[0] = T(1);
    for (int q = 1; q <= n; ++q) {
        // powers of the partial moment series; only m_0..m_{q-1} enter
        std::vector<T> pw(q + 1, T(0)), nxt(q + 1);
        pw[0] = T(1);
        T acc(0);
        for (int s = 1; s <= q; ++s) {
            for (int j = 0; j <= q; ++j) {
                T a(0);
                for (int i = 0; i <= j && i < q; ++i) a += m[i] * pw[j - i];
                nxt[j] = a;
            }
            pw = nxt;
            acc += kappa[s] * pw[q - s];
        }
        m[q] = acc;
    }
    return m;
}

} // namespace qssep
