#pragma once

#include "qssep/gmatrix_sde.hpp"
#include "qssep/types.hpp"

#include <span>
#include <utility>

namespace qssep {

// Fock space of N <= 4 sites. Basis vectors are occupation bitstrings with
// site 1 as the most significant bit: basis index s has n_k = (s >> (N-k)) & 1.
// Site arguments are 1-based.

inline constexpr int kMaxFockSites = 4;

int fock_sites(Eigen::Index dim);

/// c_k = Z x ... x Z x c x 1 x ... x 1 with Z = diag(1,-1), c = [[0,1],[0,0]].
CMatrix jordan_wigner_annihilator(int N, int k);
CMatrix number_operator(int N, int k);

/// dH = sum_j c_{j+1}^dag c_j dW_j + h.c. (periodic adds c_1^dag c_N dW_N).
/// Its one-particle block is the transpose of increment_matrix().
CMatrix hamiltonian_increment_full(int N, const EdgeNoise& noise, Topology topology);

/// e^{-i dH} rho e^{i dH}.
CMatrix evolve_density(const CMatrix& rho, const CMatrix& dH);

/// (alpha L_site^+ + beta L_site^-)(rho) dt with
/// L^+ rho = c^dag rho c - {c c^dag, rho}/2 and L^- rho = c rho c^dag - {c^dag c, rho}/2.
CMatrix boundary_dissipator(const CMatrix& rho, int site, double alpha, double beta, double dt);

/// exp(dt L_bdry) rho for both chain ends (Taylor series to roundoff).
CMatrix boundary_semigroup(const CMatrix& rho, const ChainConfig& cfg, double dt);

/// Noise-averaged generator: bulk hopping terms in both directions plus the
/// boundary terms of an open chain.
CMatrix averaged_lindbladian(const CMatrix& rho, const ChainConfig& cfg);

/// Explicit midpoint step of d rho = L(rho) dt.
CMatrix averaged_lindblad_step(const CMatrix& rho, double dt, const ChainConfig& cfg);

/// Matrix of the averaged generator acting on diagonal density matrices,
/// column s = diagonal of L(|s><s|).
RMatrix lindbladian_on_diagonal(const ChainConfig& cfg);

/// Open-chain step used for coupling: exact unitary then exact boundary semigroup.
CMatrix fock_open_step(const CMatrix& rho, const EdgeNoise& noise, const ChainConfig& cfg);

/// exp(-sum c_i^dag M_ij c_j) / Z.
CMatrix quadratic_state(const CMatrix& M);

/// G(i,j) = Tr(rho c_i^dag c_j).
CMatrix two_point_matrix(const CMatrix& rho);

CMatrix basis_state(int N, std::span<const int> occupations);

/// (Tr(rho n_{j1} ... n_{jk}), det[G(j_a, j_b)]) for distinct 1-based sites.
std::pair<double, double> wick_check(const CMatrix& rho, std::span<const int> sites);

/// (Tr(rho exp(sum c^dag A c)), det[I + G^T (e^A - I)]) for Hermitian A.
std::pair<cplx, cplx> exponential_trace_check(const CMatrix& rho, const CMatrix& A);

/// Tr(rho exp(sum_j h_j n_j)).
double exp_number_expectation(const CMatrix& rho, std::span<const double> h);

/// Throws InvalidArgument unless rho is Hermitian with unit trace and no
/// eigenvalue below -tol.
void validate_density(const CMatrix& rho, double tol = 1e-10);

struct CouplingResult {
    double max_diff = 0.0; // max over steps and entries of |G_fock - G_sde|
    CMatrix G_fock;        // at time T
    CMatrix G_sde;
    long steps = 0;
};

/// Drives the Fock density matrix and the one-particle G equation with one
/// noise path of trajectory `traj` (the G side sees the negated increments),
/// starting from the basis state with the given occupations.
CouplingResult fock_g_coupling(const ChainConfig& cfg, std::span<const int> occupations, double T,
                               std::uint64_t traj = 0);

} // namespace qssep
