#include "qssep/fock_oracle.hpp"

#include "qssep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qssep {

namespace {

void check_sites(int N) {
    require(N >= 1, "need at least one site");
    if (N > kMaxFockSites) throw SizeLimitError("Fock oracle limited to N <= 4, got " + std::to_string(N));
}

int occ(int s, int N, int k) { return (s >> (N - k)) & 1; }

CMatrix hermitian_exp(const CMatrix& H, cplx factor) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(H);
    CVector d(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = std::exp(factor * es.eigenvalues()(i));
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

CMatrix anticomm(const CMatrix& A, const CMatrix& B) { return A * B + B * A; }

CMatrix one_body(int N, const CMatrix& A) {
    const int dim = 1 << N;
    CMatrix out = CMatrix::Zero(dim, dim);
    for (int i = 1; i <= N; ++i) {
        const CMatrix ci = jordan_wigner_annihilator(N, i);
        for (int j = 1; j <= N; ++j)
            if (A(i - 1, j - 1) != 0.0) out += A(i - 1, j - 1) * ci.adjoint() * jordan_wigner_annihilator(N, j);
    }
    return out;
}

} // namespace

int fock_sites(Eigen::Index dim) {
    int N = 0;
    while ((Eigen::Index{1} << N) < dim) ++N;
    require((Eigen::Index{1} << N) == dim && N >= 1, "dimension is not a power of two");
    check_sites(N);
    return N;
}

CMatrix jordan_wigner_annihilator(int N, int k) {
    check_sites(N);
    require(k >= 1 && k <= N, "site index out of range");
    const int dim = 1 << N;
    CMatrix c = CMatrix::Zero(dim, dim);
    for (int s = 0; s < dim; ++s) {
        if (!occ(s, N, k)) continue;
        int parity = 0;
        for (int j = 1; j < k; ++j) parity += occ(s, N, j);
        const int t = s & ~(1 << (N - k));
        c(t, s) = (parity % 2) ? -1.0 : 1.0;
    }
    return c;
}

CMatrix number_operator(int N, int k) {
    check_sites(N);
    require(k >= 1 && k <= N, "site index out of range");
    const int dim = 1 << N;
    CMatrix n = CMatrix::Zero(dim, dim);
    for (int s = 0; s < dim; ++s) n(s, s) = occ(s, N, k);
    return n;
}

CMatrix hamiltonian_increment_full(int N, const EdgeNoise& noise, Topology topology) {
    check_sites(N);
    const int E = topology == Topology::Periodic ? N : N - 1;
    require(static_cast<int>(noise.dW.size()) == E, "noise has wrong number of edges");
    const int dim = 1 << N;
    CMatrix dH = CMatrix::Zero(dim, dim);
    for (int j = 1; j <= E; ++j) {
        const int a = j, b = j % N + 1; // term c_b^dag c_a dW_j
        const CMatrix hop = jordan_wigner_annihilator(N, b).adjoint() * jordan_wigner_annihilator(N, a);
        dH += noise.dW[j - 1] * hop;
        dH += std::conj(noise.dW[j - 1]) * hop.adjoint();
    }
    return dH;
}

CMatrix evolve_density(const CMatrix& rho, const CMatrix& dH) {
    require(rho.rows() == dH.rows() && rho.cols() == dH.cols(), "dimension mismatch");
    require(is_hermitian(dH, 1e-12), "dH must be Hermitian");
    const CMatrix U = hermitian_exp(dH, cplx(0.0, -1.0));
    return U * rho * U.adjoint();
}

CMatrix boundary_dissipator(const CMatrix& rho, int site, double alpha, double beta, double dt) {
    const int N = fock_sites(rho.rows());
    require(site == 1 || site == N, "boundary dissipator acts on site 1 or N");
    require(alpha >= 0 && beta >= 0, "rates must be non-negative");
    const CMatrix c = jordan_wigner_annihilator(N, site);
    const CMatrix cd = c.adjoint();
    CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
    if (alpha != 0.0) out += alpha * (cd * rho * c - 0.5 * anticomm(c * cd, rho));
    if (beta != 0.0) out += beta * (c * rho * cd - 0.5 * anticomm(cd * c, rho));
    return out * dt;
}

namespace {
CMatrix boundary_generator(const CMatrix& rho, const ChainConfig& cfg, double dt) {
    const int N = fock_sites(rho.rows());
    CMatrix out = boundary_dissipator(rho, 1, cfg.alpha1, cfg.beta1, dt);
    out += boundary_dissipator(rho, N, cfg.alphaN, cfg.betaN, dt);
    return out;
}
} // namespace

CMatrix boundary_semigroup(const CMatrix& rho, const ChainConfig& cfg, double dt) {
    CMatrix out = rho;
    if (cfg.topology != Topology::Open) return out;
    CMatrix term = rho;
    for (int k = 1; k <= 60; ++k) {
        term = boundary_generator(term, cfg, dt) / static_cast<double>(k);
        out += term;
        if (term.cwiseAbs().maxCoeff() < 1e-18) break;
    }
    return out;
}

CMatrix averaged_lindbladian(const CMatrix& rho, const ChainConfig& cfg) {
    const int N = fock_sites(rho.rows());
    require(N == cfg.N, "density matrix does not match chain size");
    const int E = cfg.topology == Topology::Periodic ? N : N - 1;
    CMatrix out = CMatrix::Zero(rho.rows(), rho.cols());
    for (int j = 1; j <= E; ++j) {
        const int a = j, b = j % N + 1;
        const CMatrix l = jordan_wigner_annihilator(N, b).adjoint() * jordan_wigner_annihilator(N, a);
        const CMatrix ld = l.adjoint();
        out += l * rho * ld - 0.5 * anticomm(ld * l, rho);
        out += ld * rho * l - 0.5 * anticomm(l * ld, rho);
    }
    if (cfg.topology == Topology::Open) out += boundary_generator(rho, cfg, 1.0);
    return out;
}

CMatrix averaged_lindblad_step(const CMatrix& rho, double dt, const ChainConfig& cfg) {
    require(dt > 0.0, "dt must be positive");
    const CMatrix half = rho + 0.5 * dt * averaged_lindbladian(rho, cfg);
    return rho + dt * averaged_lindbladian(half, cfg);
}

RMatrix lindbladian_on_diagonal(const ChainConfig& cfg) {
    check_sites(cfg.N);
    const int dim = 1 << cfg.N;
    RMatrix L = RMatrix::Zero(dim, dim);
    for (int s = 0; s < dim; ++s) {
        CMatrix rho = CMatrix::Zero(dim, dim);
        rho(s, s) = 1.0;
        const CMatrix out = averaged_lindbladian(rho, cfg);
        for (int t = 0; t < dim; ++t) L(t, s) = out(t, t).real();
    }
    return L;
}

CMatrix fock_open_step(const CMatrix& rho, const EdgeNoise& noise, const ChainConfig& cfg) {
    const int N = fock_sites(rho.rows());
    CMatrix out = evolve_density(rho, hamiltonian_increment_full(N, noise, cfg.topology));
    return boundary_semigroup(out, cfg, noise.dt);
}

CMatrix quadratic_state(const CMatrix& M) {
    require(M.rows() == M.cols(), "M must be square");
    const int N = static_cast<int>(M.rows());
    check_sites(N);
    require(is_hermitian(M, 1e-12), "M must be Hermitian");
    CMatrix rho = hermitian_exp(one_body(N, M), cplx(-1.0, 0.0));
    return rho / rho.trace();
}

CMatrix two_point_matrix(const CMatrix& rho) {
    const int N = fock_sites(rho.rows());
    CMatrix G(N, N);
    for (int i = 1; i <= N; ++i) {
        const CMatrix ci = jordan_wigner_annihilator(N, i);
        for (int j = 1; j <= N; ++j) G(i - 1, j - 1) = (rho * ci.adjoint() * jordan_wigner_annihilator(N, j)).trace();
    }
    return G;
}

CMatrix basis_state(int N, std::span<const int> occupations) {
    check_sites(N);
    require(static_cast<int>(occupations.size()) == N, "need one occupation per site");
    int s = 0;
    for (int k = 1; k <= N; ++k) {
        require(occupations[k - 1] == 0 || occupations[k - 1] == 1, "occupations must be 0 or 1");
        s |= occupations[k - 1] << (N - k);
    }
    CMatrix rho = CMatrix::Zero(1 << N, 1 << N);
    rho(s, s) = 1.0;
    return rho;
}

std::pair<double, double> wick_check(const CMatrix& rho, std::span<const int> sites) {
    const int N = fock_sites(rho.rows());
    const int k = static_cast<int>(sites.size());
    require(k >= 1, "need at least one site");
    for (int a = 0; a < k; ++a) {
        require(sites[a] >= 1 && sites[a] <= N, "site index out of range");
        for (int b = a + 1; b < k; ++b) require(sites[a] != sites[b], "sites must be distinct");
    }
    CMatrix prod = CMatrix::Identity(rho.rows(), rho.cols());
    for (int j : sites) prod = prod * number_operator(N, j);
    const double direct = (rho * prod).trace().real();
    const CMatrix G = two_point_matrix(rho);
    CMatrix sub(k, k);
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) sub(a, b) = G(sites[a] - 1, sites[b] - 1);
    return {direct, sub.determinant().real()};
}

std::pair<cplx, cplx> exponential_trace_check(const CMatrix& rho, const CMatrix& A) {
    const int N = fock_sites(rho.rows());
    require(A.rows() == N && A.cols() == N, "A must be N x N");
    require(is_hermitian(A, 1e-12), "A must be Hermitian");
    const cplx direct = (rho * hermitian_exp(one_body(N, A), cplx(1.0, 0.0))).trace();
    const CMatrix eA = hermitian_exp(A, cplx(1.0, 0.0));
    const CMatrix G = two_point_matrix(rho);
    const CMatrix I = CMatrix::Identity(N, N);
    return {direct, (I + G.transpose() * (eA - I)).determinant()};
}

double exp_number_expectation(const CMatrix& rho, std::span<const double> h) {
    const int N = fock_sites(rho.rows());
    require(static_cast<int>(h.size()) == N, "need one field value per site");
    double sum = 0.0;
    for (int s = 0; s < (1 << N); ++s) {
        double e = 0.0;
        for (int k = 1; k <= N; ++k) e += h[k - 1] * occ(s, N, k);
        sum += rho(s, s).real() * std::exp(e);
    }
    return sum;
}

void validate_density(const CMatrix& rho, double tol) {
    fock_sites(rho.rows());
    require(rho.rows() == rho.cols(), "density matrix must be square");
    require(rho.allFinite(), "density matrix has non-finite entries");
    require(is_hermitian(rho, tol), "density matrix is not Hermitian");
    require(std::abs(rho.trace() - cplx(1.0, 0.0)) <= tol, "density matrix trace differs from 1");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
    require(es.eigenvalues().minCoeff() >= -tol, "density matrix has a negative eigenvalue");
}

CouplingResult fock_g_coupling(const ChainConfig& cfg, std::span<const int> occupations, double T,
                               std::uint64_t traj) {
    cfg.validate();
    require(cfg.N <= kMaxFockSites, "Fock coupling limited to N <= " + std::to_string(kMaxFockSites));
    require(static_cast<int>(occupations.size()) == cfg.N, "one occupation per site");
    require(T >= 0, "T must be non-negative");
    CouplingResult r;
    CMatrix rho = basis_state(cfg.N, occupations);
    r.G_sde = two_point_matrix(rho);
    ChainNoise source(cfg, traj);
    r.steps = std::lround(T / cfg.dt);
    for (long s = 0; s < r.steps; ++s) {
        EdgeNoise w = source.next();
        rho = cfg.topology == Topology::Open ? fock_open_step(rho, w, cfg)
                                             : evolve_density(rho, hamiltonian_increment_full(cfg.N, w, cfg.topology));
        for (auto& x : w.dW) x = -x;
        const CMatrix dh = increment_matrix(w, cfg.topology, cfg.N);
        r.G_sde = cfg.topology == Topology::Open ? step_open(r.G_sde, dh, cfg) : step_unitary(r.G_sde, dh);
        r.max_diff = std::max(r.max_diff, (two_point_matrix(rho) - r.G_sde).cwiseAbs().maxCoeff());
    }
    r.G_fock = two_point_matrix(rho);
    return r;
}

} // namespace qssep
