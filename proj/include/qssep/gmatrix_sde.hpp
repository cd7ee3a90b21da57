#pragma once

#include "qssep/rng.hpp"
#include "qssep/types.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace qssep {

enum class Topology { Periodic, Closed, Open };

Topology parse_topology(std::string_view name);
std::string to_string(Topology t);

struct ChainConfig {
    int N = 2;
    Topology topology = Topology::Closed;
    double alpha1 = 0.0;
    double beta1 = 0.0;
    double alphaN = 0.0;
    double betaN = 0.0;
    double dt = 1e-3;
    std::uint64_t seed = 0;

    int num_edges() const;
    bool has_boundaries() const { return topology == Topology::Open; }
    /// Reservoir densities alpha/(alpha+beta); 0 when both rates vanish.
    double n_a() const;
    double n_b() const;
    void validate() const;
};

/// One Ito increment per edge. Edge j < N-1 couples sites j, j+1 (0-based);
/// the periodic chain has an extra edge N-1 coupling site N-1 and site 0.
struct EdgeNoise {
    std::vector<cplx> dW;
    double dt = 0.0;
};

/// Independent counter-based Gaussian stream per (trajectory, edge).
class ChainNoise {
public:
    ChainNoise(const ChainConfig& cfg, std::uint64_t trajectory);
    EdgeNoise next();

private:
    std::vector<NormalStream> streams_;
    double dt_;
};

/// dW_j = (xi1 + i xi2) sqrt(dt/2), so E|dW|^2 = dt and E dW^2 = 0.
EdgeNoise sample_noise(const ChainConfig& cfg, ChainNoise& source);

/// Sum of two consecutive increments (same Brownian path at step 2 dt).
EdgeNoise combine(const EdgeNoise& first, const EdgeNoise& second);

/// dh with dW_j on the superdiagonal, conj(dW_j) below it. Periodic corner:
/// dh(0,N-1) = conj(dW_{N-1}), dh(N-1,0) = dW_{N-1}.
CMatrix increment_matrix(const EdgeNoise& noise, Topology topology, int N);

/// exp(-i dh) G exp(i dh) through a Hermitian eigendecomposition of dh.
CMatrix step_unitary(const CMatrix& G, const CMatrix& dh);

/// Lie splitting: exact unitary, Euler boundary update, Hermitian projection.
CMatrix step_open(const CMatrix& G, const CMatrix& dh, const ChainConfig& cfg);

/// Euler step of the boundary dissipation alone (in place).
void apply_boundary(CMatrix& G, const ChainConfig& cfg, double dt);

/// Reusable stepper. Chains without a cycle are gauged to a real tridiagonal
/// generator whose exponential is summed to roundoff; periodic chains use step_unitary.
class GStepper {
public:
    explicit GStepper(const ChainConfig& cfg);
    void unitary(CMatrix& G, const EdgeNoise& noise);
    void step(CMatrix& G, const EdgeNoise& noise);
    const ChainConfig& config() const { return cfg_; }

private:
    ChainConfig cfg_;
    RVector diag_, sub_, tp_;
    CMatrix U_, tmp_, work_;
    RMatrix C_, S_, cur_, nxt_;
    std::vector<cplx> phase_;
};

/// Open chain: diag(n_a + (i/N)(n_b - n_a)), i = 1..N.
/// Closed and periodic chains: the projector diag(0,...,0,1,...,1) at half filling.
CMatrix default_initial_state(const ChainConfig& cfg);

struct Trajectory {
    std::vector<double> times;
    std::vector<CMatrix> snapshots;
};

/// Integrates to time T and records G at the requested (sorted) times.
/// Throws NumericalBlowup when a diagonal entry leaves [-0.5, 1.5] or is not finite.
Trajectory run_trajectory(const ChainConfig& cfg, const CMatrix& G0, double T,
                          const std::vector<double>& snapshot_times, std::uint64_t trajectory = 0);

/// N=2 closed chain coordinates: D = G11 - G22, R + iI = G12.
struct N2State {
    double D = 0.0;
    double R = 0.0;
    double I = 0.0;
    double invariant() const { return D * D + 4.0 * (R * R + I * I); }
};

N2State n2_from_matrix(const CMatrix& G);

/// Euler-Maruyama step of the reduced N=2 system driven by real increments
/// dB1, dB2 (variance dt each); dW of the full chain is (dB1 + i dB2)/sqrt(2).
N2State n2_reduced_step(const N2State& s, double dB1, double dB2, double dt);

bool is_hermitian(const CMatrix& A, double tol = 1e-12);

} // namespace qssep
