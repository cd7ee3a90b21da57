#include "qssep/gmatrix_sde.hpp"

#include "qssep/errors.hpp"

#include <algorithm>
#include <cmath>

namespace qssep {

Topology parse_topology(std::string_view name) {
    if (name == "periodic") return Topology::Periodic;
    if (name == "closed") return Topology::Closed;
    if (name == "open") return Topology::Open;
    throw InvalidArgument("unknown topology '" + std::string(name) + "'");
}

std::string to_string(Topology t) {
    switch (t) {
    case Topology::Periodic: return "periodic";
    case Topology::Closed: return "closed";
    case Topology::Open: return "open";
    }
    return "?";
}

int ChainConfig::num_edges() const { return topology == Topology::Periodic ? N : N - 1; }

double ChainConfig::n_a() const { return alpha1 + beta1 > 0 ? alpha1 / (alpha1 + beta1) : 0.0; }
double ChainConfig::n_b() const { return alphaN + betaN > 0 ? alphaN / (alphaN + betaN) : 0.0; }

void ChainConfig::validate() const {
    require(N >= 2, "chain needs N >= 2");
    require(topology != Topology::Periodic || N >= 3, "periodic chain needs N >= 3");
    require(dt > 0.0 && std::isfinite(dt), "dt must be positive");
    require(alpha1 >= 0 && beta1 >= 0 && alphaN >= 0 && betaN >= 0, "boundary rates must be non-negative");
    if (topology == Topology::Open) {
        require(dt <= 1e-2, "open chain requires dt <= 1e-2");
    } else {
        require(alpha1 == 0 && beta1 == 0 && alphaN == 0 && betaN == 0,
                "boundary rates are only allowed on the open chain");
    }
}

ChainNoise::ChainNoise(const ChainConfig& cfg, std::uint64_t trajectory) : dt_(cfg.dt) {
    const int E = cfg.num_edges();
    streams_.reserve(E);
    for (int e = 0; e < E; ++e) streams_.emplace_back(CounterRng(cfg.seed, trajectory, static_cast<std::uint64_t>(e)));
}

EdgeNoise ChainNoise::next() {
    EdgeNoise out;
    out.dt = dt_;
    out.dW.resize(streams_.size());
    const double s = std::sqrt(0.5 * dt_);
    for (std::size_t e = 0; e < streams_.size(); ++e) {
        const double x = streams_[e]();
        const double y = streams_[e]();
        out.dW[e] = cplx(x * s, y * s);
    }
    return out;
}

EdgeNoise sample_noise(const ChainConfig& cfg, ChainNoise& source) {
    EdgeNoise n = source.next();
    require(static_cast<int>(n.dW.size()) == cfg.num_edges(), "noise source does not match chain");
    return n;
}

EdgeNoise combine(const EdgeNoise& first, const EdgeNoise& second) {
    require(first.dW.size() == second.dW.size(), "edge counts differ");
    EdgeNoise out;
    out.dt = first.dt + second.dt;
    out.dW.resize(first.dW.size());
    for (std::size_t e = 0; e < first.dW.size(); ++e) out.dW[e] = first.dW[e] + second.dW[e];
    return out;
}

CMatrix increment_matrix(const EdgeNoise& noise, Topology topology, int N) {
    const int E = topology == Topology::Periodic ? N : N - 1;
    require(static_cast<int>(noise.dW.size()) == E, "noise has wrong number of edges");
    CMatrix dh = CMatrix::Zero(N, N);
    for (int j = 0; j < N - 1; ++j) {
        dh(j, j + 1) = noise.dW[j];
        dh(j + 1, j) = std::conj(noise.dW[j]);
    }
    if (topology == Topology::Periodic) {
        dh(0, N - 1) += std::conj(noise.dW[N - 1]);
        dh(N - 1, 0) += noise.dW[N - 1];
    }
    return dh;
}

bool is_hermitian(const CMatrix& A, double tol) {
    if (A.rows() != A.cols()) return false;
    return (A - A.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, A.cwiseAbs().maxCoeff());
}

CMatrix step_unitary(const CMatrix& G, const CMatrix& dh) {
    require(G.rows() == dh.rows() && G.cols() == dh.cols() && G.rows() == G.cols(), "shape mismatch");
    require(is_hermitian(dh, 1e-12), "dh must be Hermitian");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(dh);
    const RVector& lam = es.eigenvalues();
    const CMatrix& V = es.eigenvectors();
    CVector ph(lam.size());
    for (Eigen::Index k = 0; k < lam.size(); ++k) ph(k) = std::polar(1.0, -lam(k));
    const CMatrix U = V * ph.asDiagonal() * V.adjoint();
    return U * G * U.adjoint();
}

void apply_boundary(CMatrix& G, const ChainConfig& cfg, double dt) {
    const int N = static_cast<int>(G.rows());
    const double g1 = 0.5 * (cfg.alpha1 + cfg.beta1) * dt;
    const double gN = 0.5 * (cfg.alphaN + cfg.betaN) * dt;
    if (g1 == 0.0 && gN == 0.0 && cfg.alpha1 == 0.0 && cfg.alphaN == 0.0) return;
    auto f = [&](int i) { return (i == 0 ? g1 : 0.0) + (i == N - 1 ? gN : 0.0); };
    for (int j = 0; j < N; ++j) {
        G(0, j) *= 1.0 - f(0) - f(j);
        G(N - 1, j) *= 1.0 - f(N - 1) - f(j);
    }
    for (int i = 1; i < N - 1; ++i) {
        G(i, 0) *= 1.0 - f(0);
        G(i, N - 1) *= 1.0 - f(N - 1);
    }
    G(0, 0) += cfg.alpha1 * dt;
    G(N - 1, N - 1) += cfg.alphaN * dt;
}

CMatrix step_open(const CMatrix& G, const CMatrix& dh, const ChainConfig& cfg) {
    require(cfg.topology == Topology::Open, "step_open needs an open chain");
    CMatrix out = step_unitary(G, dh);
    apply_boundary(out, cfg, cfg.dt);
    return 0.5 * (out + out.adjoint());
}

namespace {

// exp(-i T) = C - i S for real symmetric tridiagonal T with zero diagonal and
// off-diagonal t. Taylor series on T / 2^s, summed to roundoff, then s squarings.
// cur and nxt carry one zero row of padding on each side.
void tridiagonal_expm(const RVector& t, CMatrix& E, CMatrix& work, RMatrix& C, RMatrix& S, RMatrix& cur,
                      RMatrix& nxt, RVector& tp) {
    const int N = static_cast<int>(t.size()) + 1;
    tp.setZero(N + 1);
    tp.segment(1, N - 1) = t;
    double bound = 0.0;
    for (int a = 0; a < N; ++a) bound = std::max(bound, tp(a) + tp(a + 1));
    int s = 0;
    while (bound > 0.5) {
        bound *= 0.5;
        ++s;
    }
    tp *= std::ldexp(1.0, -s);
    C.setIdentity(N, N);
    S.setZero(N, N);
    cur.setZero(N + 2, N);
    nxt.setZero(N + 2, N);
    for (int b = 0; b < N; ++b) cur(b + 1, b) = 1.0;
    double term = 1.0;
    for (int k = 1; k <= 40; ++k) {
        const int band = std::min(k, N - 1);
        const double f = 1.0 / k;
        // (-i)^k: odd powers go to S with sign +,-; even powers to C with sign -,+
        const double sg = (k % 4 == 1 || k % 4 == 0) ? 1.0 : -1.0;
        RMatrix& acc = (k % 2 == 0) ? C : S;
        for (int b = 0; b < N; ++b) {
            const int lo = std::max(0, b - band), hi = std::min(N - 1, b + band);
            const double* cp = cur.col(b).data();
            double* np = nxt.col(b).data();
            double* ap = acc.col(b).data();
            for (int a = lo; a <= hi; ++a) {
                const double v = f * (tp(a) * cp[a] + tp(a + 1) * cp[a + 2]);
                np[a + 1] = v;
                ap[a] += sg * v;
            }
        }
        cur.swap(nxt);
        term *= bound / k;
        if (term < 1e-18) break;
    }
    E.real() = C;
    E.imag() = -S;
    for (int i = 0; i < s; ++i) {
        work.noalias() = E * E;
        E.swap(work);
    }
}

} // namespace

GStepper::GStepper(const ChainConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int N = cfg_.N;
    diag_ = RVector::Zero(N);
    sub_ = RVector::Zero(N - 1);
    U_.resize(N, N);
    tmp_.resize(N, N);
    work_.resize(N, N);
    cur_.resize(N, N);
    nxt_.resize(N, N);
    phase_.assign(N, cplx(1.0, 0.0));
}

void GStepper::unitary(CMatrix& G, const EdgeNoise& noise) {
    const int N = cfg_.N;
    if (cfg_.topology == Topology::Periodic) {
        G = step_unitary(G, increment_matrix(noise, cfg_.topology, N));
        return;
    }
    // dh = P T P^dagger with T real tridiagonal, T(j,j+1) = |dW_j|
    phase_[0] = 1.0;
    for (int j = 0; j < N - 1; ++j) {
        const double r = std::abs(noise.dW[j]);
        sub_(j) = r;
        phase_[j + 1] = r > 0 ? phase_[j] * std::conj(noise.dW[j]) / r : phase_[j];
    }
    tridiagonal_expm(sub_, U_, work_, C_, S_, cur_, nxt_, tp_);
    for (int b = 0; b < N; ++b)
        for (int a = 0; a < N; ++a) U_(a, b) *= phase_[a] * std::conj(phase_[b]);
    tmp_.noalias() = U_ * G;
    G.noalias() = tmp_ * U_.adjoint();
}

void GStepper::step(CMatrix& G, const EdgeNoise& noise) {
    unitary(G, noise);
    if (cfg_.topology == Topology::Open) {
        apply_boundary(G, cfg_, noise.dt);
        tmp_ = 0.5 * (G + G.adjoint());
        G.swap(tmp_);
    }
}

CMatrix default_initial_state(const ChainConfig& cfg) {
    cfg.validate();
    const int N = cfg.N;
    CMatrix G = CMatrix::Zero(N, N);
    if (cfg.topology == Topology::Open) {
        const double na = cfg.n_a(), nb = cfg.n_b();
        for (int i = 1; i <= N; ++i) G(i - 1, i - 1) = na + (static_cast<double>(i) / N) * (nb - na);
    } else {
        for (int i = N / 2; i < N; ++i) G(i, i) = 1.0;
    }
    return G;
}

namespace {
void check_finite(const CMatrix& G, double t) {
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
        const double d = G(i, i).real();
        if (!std::isfinite(d) || d < -0.5 || d > 1.5)
            throw NumericalBlowup("G diagonal left the physical range at t=" + std::to_string(t));
    }
}
} // namespace

Trajectory run_trajectory(const ChainConfig& cfg, const CMatrix& G0, double T,
                          const std::vector<double>& snapshot_times, std::uint64_t trajectory) {
    cfg.validate();
    require(G0.rows() == cfg.N && G0.cols() == cfg.N, "G0 has wrong size");
    require(is_hermitian(G0, 1e-10), "G0 must be Hermitian");
    require(std::is_sorted(snapshot_times.begin(), snapshot_times.end()), "snapshot times must be sorted");
    require(T >= 0, "T must be non-negative");
    Trajectory out;
    GStepper stepper(cfg);
    ChainNoise noise(cfg, trajectory);
    CMatrix G = G0;
    const long steps = std::lround(T / cfg.dt);
    std::size_t next = 0;
    auto record = [&](long n) {
        const double t = n * cfg.dt;
        while (next < snapshot_times.size() && snapshot_times[next] <= t + 0.5 * cfg.dt) {
            out.times.push_back(t);
            out.snapshots.push_back(G);
            ++next;
        }
    };
    record(0);
    for (long n = 1; n <= steps; ++n) {
        stepper.step(G, noise.next());
        check_finite(G, n * cfg.dt);
        record(n);
    }
    return out;
}

N2State n2_from_matrix(const CMatrix& G) {
    require(G.rows() == 2 && G.cols() == 2, "expected a 2x2 matrix");
    return {G(0, 0).real() - G(1, 1).real(), G(0, 1).real(), G(0, 1).imag()};
}

N2State n2_reduced_step(const N2State& s, double dB1, double dB2, double dt) {
    static const double r2 = std::sqrt(2.0);
    N2State o;
    o.D = s.D - 2.0 * s.D * dt + 2.0 * r2 * (s.R * dB2 - s.I * dB1);
    o.R = s.R - s.D * dB2 / r2 - s.R * dt;
    o.I = s.I + s.D * dB1 / r2 - s.I * dt;
    return o;
}

} // namespace qssep
