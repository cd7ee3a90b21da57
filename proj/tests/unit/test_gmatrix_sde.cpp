#include "doctest.h"

#include "qssep/errors.hpp"
#include "qssep/gmatrix_sde.hpp"
#include "qssep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace qssep;

namespace {

ChainConfig chain(int N, Topology t, double dt = 1e-3) {
    ChainConfig c;
    c.N = N;
    c.topology = t;
    c.dt = dt;
    return c;
}

CMatrix random_hermitian(int n, std::uint64_t seed) {
    NormalStream g(CounterRng(seed, 1));
    CMatrix A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = cplx(g(), g());
    return 0.5 * (A + A.adjoint());
}

// random physical G: U diag(lambda) U^dag with lambda in [0,1]
CMatrix random_physical(int n, std::uint64_t seed) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(random_hermitian(n, seed));
    CounterRng u(seed, 2);
    RVector lam(n);
    for (int i = 0; i < n; ++i) lam(i) = u.uniform();
    return es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

RVector spectrum(const CMatrix& G) { return Eigen::SelfAdjointEigenSolver<CMatrix>(G, Eigen::EigenvaluesOnly).eigenvalues(); }

double max_abs(const CMatrix& A) { return A.cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("configuration validation") {
    CHECK(parse_topology("open") == Topology::Open);
    CHECK(parse_topology("periodic") == Topology::Periodic);
    CHECK(to_string(Topology::Closed) == "closed");
    CHECK_THROWS_AS(parse_topology("ring"), InvalidArgument);
    ChainConfig c = chain(4, Topology::Open, 2e-2);
    c.alpha1 = 1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    c.dt = 1e-2;
    CHECK_NOTHROW(c.validate());
    c.beta1 = -1;
    CHECK_THROWS_AS(c.validate(), InvalidArgument);
    CHECK_THROWS_AS(chain(1, Topology::Closed).validate(), InvalidArgument);
    ChainConfig cl = chain(4, Topology::Closed);
    cl.alpha1 = 1;
    CHECK_THROWS_AS(cl.validate(), InvalidArgument);
    ChainConfig op = chain(5, Topology::Open);
    op.alpha1 = 1;
    op.beta1 = 3;
    op.alphaN = 2;
    CHECK(op.n_a() == doctest::Approx(0.25));
    CHECK(op.n_b() == doctest::Approx(1.0));
    CHECK(op.num_edges() == 4);
    CHECK(chain(5, Topology::Periodic).num_edges() == 5);
}

TEST_CASE("noise moments") {
    const ChainConfig c = chain(3, Topology::Closed, 0.01);
    ChainNoise src(c, 7);
    const int draws = 500000;
    double s2 = 0, s4 = 0;
    cplx sq = 0;
    double sq_re2 = 0, sq_im2 = 0;
    for (int k = 0; k < draws; ++k) {
        const EdgeNoise n = src.next();
        for (cplx w : n.dW) {
            const double a = std::norm(w) / c.dt;
            s2 += a;
            s4 += a * a;
            const cplx b = w * w / c.dt;
            sq += b;
            sq_re2 += b.real() * b.real();
            sq_im2 += b.imag() * b.imag();
        }
    }
    const double M = 2.0 * draws;
    const double m = s2 / M, se = std::sqrt((s4 / M - m * m) / M);
    CHECK(std::abs(m - 1.0) < 3 * se);
    CHECK(std::abs(sq.real() / M) < 3 * std::sqrt(sq_re2 / M / M));
    CHECK(std::abs(sq.imag() / M) < 3 * std::sqrt(sq_im2 / M / M));

    ChainNoise a(c, 3), b(c, 3), other(c, 4);
    for (int k = 0; k < 10; ++k) {
        const EdgeNoise x = a.next(), y = b.next(), z = other.next();
        CHECK(x.dW == y.dW);
        CHECK(x.dW != z.dW);
    }
}

TEST_CASE("combined increments") {
    const EdgeNoise a{{cplx(1, 2), cplx(0, -1)}, 0.1}, b{{cplx(3, 0), cplx(1, 1)}, 0.1};
    const EdgeNoise c = combine(a, b);
    CHECK(c.dt == doctest::Approx(0.2));
    CHECK(c.dW[0] == cplx(4, 2));
    CHECK(c.dW[1] == cplx(1, 0));
}

TEST_CASE("increment matrix") {
    const cplx e(0.2, 0.1);
    const CMatrix dh = increment_matrix(EdgeNoise{{e, e}, 1e-3}, Topology::Closed, 3);
    CMatrix ref = CMatrix::Zero(3, 3);
    ref(0, 1) = ref(1, 2) = e;
    ref(1, 0) = ref(2, 1) = std::conj(e);
    CHECK(max_abs(dh - ref) == 0.0);

    const cplx w(-0.4, 0.3);
    const CMatrix dp = increment_matrix(EdgeNoise{{e, e, w}, 1e-3}, Topology::Periodic, 3);
    ref(0, 2) = std::conj(w);
    ref(2, 0) = w;
    CHECK(max_abs(dp - ref) == 0.0);
    CHECK(is_hermitian(dp, 0.0));
    CHECK_THROWS_AS(increment_matrix(EdgeNoise{{e, e}, 1e-3}, Topology::Periodic, 3), InvalidArgument);
}

TEST_CASE("unitary step") {
    const CMatrix G = random_physical(5, 3);
    CHECK(max_abs(step_unitary(G, CMatrix::Zero(5, 5)) - G) < 1e-15);
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        const CMatrix out = step_unitary(G, random_hermitian(5, seed));
        CHECK(is_hermitian(out, 1e-13));
        CHECK((spectrum(out) - spectrum(G)).cwiseAbs().maxCoeff() < 1e-12);
    }
    CMatrix bad = random_hermitian(5, 20);
    bad(0, 1) += 1.0;
    CHECK_THROWS_AS(step_unitary(G, bad), InvalidArgument);
}

TEST_CASE("stepper agrees with the eigendecomposition step") {
    for (Topology t : {Topology::Closed, Topology::Periodic, Topology::Open}) {
        for (int N : {2, 3, 8, 20}) {
            if (t == Topology::Periodic && N < 3) continue;
            ChainConfig c = chain(N, t, 1e-2);
            if (t == Topology::Open) {
                c.alpha1 = 0.7;
                c.beta1 = 0.2;
                c.alphaN = 0.1;
                c.betaN = 1.3;
            }
            GStepper stepper(c);
            ChainNoise src(c, 1);
            CMatrix G = random_physical(N, N), H = G;
            for (int k = 0; k < 50; ++k) {
                const EdgeNoise n = src.next();
                stepper.step(G, n);
                const CMatrix dh = increment_matrix(n, t, N);
                H = t == Topology::Open ? step_open(H, dh, c) : step_unitary(H, dh);
            }
            CHECK(max_abs(G - H) < 1e-12);
        }
    }
}

TEST_CASE("open step") {
    ChainConfig c = chain(4, Topology::Open, 1e-3);
    c.alpha1 = 1.0;
    const CMatrix G = step_open(CMatrix::Zero(4, 4), CMatrix::Zero(4, 4), c);
    CHECK(G(0, 0).real() == doctest::Approx(1e-3).epsilon(1e-6));
    CHECK(std::abs(G(1, 1)) == 0.0);

    // boundary decay of off-diagonal entries
    CMatrix F = CMatrix::Constant(4, 4, cplx(0.1, 0.0));
    ChainConfig d = chain(4, Topology::Open, 1e-2);
    d.alpha1 = 1.0;
    d.beta1 = 1.0;
    d.alphaN = 0.5;
    d.betaN = 0.5;
    apply_boundary(F, d, d.dt);
    CHECK(F(0, 1).real() == doctest::Approx(0.1 * (1 - 1e-2)));
    CHECK(F(0, 3).real() == doctest::Approx(0.1 * (1 - 1.5e-2)));
    CHECK(F(1, 2).real() == doctest::Approx(0.1));
    CHECK(F(0, 0).real() == doctest::Approx(0.1 + 1e-2 * (1 * 0.9 - 1 * 0.1)));
    CHECK(F(3, 3).real() == doctest::Approx(0.1 + 1e-2 * (0.5 * 0.9 - 0.5 * 0.1)));

    // zero rates: only the unitary part
    const ChainConfig z = chain(4, Topology::Open, 1e-2);
    const CMatrix P = random_physical(4, 8), dh = random_hermitian(4, 9) * 0.1;
    CHECK(max_abs(step_open(P, dh, z) - step_unitary(P, dh)) < 1e-14);
    CHECK_THROWS_AS(step_open(P, dh, chain(4, Topology::Closed)), InvalidArgument);
}

TEST_CASE("trajectories") {
    const ChainConfig c = chain(6, Topology::Closed, 1e-2);
    const CMatrix G0 = random_physical(6, 30);
    const Trajectory zero = run_trajectory(c, G0, 0.0, {0.0});
    REQUIRE(zero.snapshots.size() == 1);
    CHECK(max_abs(zero.snapshots[0] - G0) == 0.0);

    const Trajectory a = run_trajectory(c, G0, 100.0, {10.0, 50.0, 100.0}, 3);
    const Trajectory b = run_trajectory(c, G0, 100.0, {10.0, 50.0, 100.0}, 3);
    REQUIRE(a.snapshots.size() == 3);
    CHECK(a.times[1] == doctest::Approx(50.0));
    for (std::size_t k = 0; k < 3; ++k) CHECK(max_abs(a.snapshots[k] - b.snapshots[k]) == 0.0);
    const CMatrix& GT = a.snapshots.back();
    CHECK(std::abs(GT.trace() - G0.trace()) < 1e-9);
    CHECK((spectrum(GT) - spectrum(G0)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(is_hermitian(GT, 1e-9));

    const ChainConfig p = chain(5, Topology::Periodic, 1e-2);
    const CMatrix P0 = random_physical(5, 31);
    const CMatrix PT = run_trajectory(p, P0, 100.0, {100.0}).snapshots.back();
    CHECK((spectrum(PT) - spectrum(P0)).cwiseAbs().maxCoeff() < 1e-10);

    CHECK_THROWS_AS(run_trajectory(c, CMatrix::Identity(6, 6) * 5.0, 1.0, {}), NumericalBlowup);
    CHECK_THROWS_AS(run_trajectory(c, CMatrix::Identity(5, 5), 1.0, {}), InvalidArgument);
}

TEST_CASE("open chain stays physical") {
    ChainConfig c = chain(10, Topology::Open, 1e-2);
    c.alpha1 = 1.0;
    c.betaN = 1.0;
    const CMatrix G0 = default_initial_state(c);
    CHECK(G0(0, 0).real() == doctest::Approx(1.0 - 0.1));
    CHECK(G0(9, 9).real() == doctest::Approx(0.0));
    const Trajectory tr = run_trajectory(c, G0, 200.0, {50.0, 100.0, 150.0, 200.0}, 2);
    for (const CMatrix& G : tr.snapshots) {
        CHECK(is_hermitian(G, 1e-9));
        const RVector s = spectrum(G);
        CHECK(s.minCoeff() > -1e-6);
        CHECK(s.maxCoeff() < 1 + 1e-6);
    }
    const CMatrix H = default_initial_state(chain(4, Topology::Closed));
    CHECK(H(0, 0) == cplx(0.0));
    CHECK(H(3, 3) == cplx(1.0));
}

TEST_CASE("N=2 reduced coordinates") {
    CMatrix G(2, 2);
    G << 0.8, cplx(0.1, -0.2), cplx(0.1, 0.2), 0.3;
    const N2State s = n2_from_matrix(G);
    CHECK(s.D == doctest::Approx(0.5));
    CHECK(s.R == doctest::Approx(0.1));
    CHECK(s.I == doctest::Approx(-0.2));
    CHECK(s.invariant() == doctest::Approx(0.25 + 4 * 0.05));

    const N2State zero = n2_reduced_step({0, 0, 0}, 0.0, 0.0, 0.1);
    CHECK(zero.D == 0.0);
    CHECK(zero.R == 0.0);
    CHECK(zero.I == 0.0);

    // one exact step against one Euler step on the same increment: the gap is O(dt)
    // while the increment itself is O(sqrt(dt))
    const double dt = 1e-4;
    NormalStream g(CounterRng(77));
    double worst = 0.0, typical = 0.0;
    for (int k = 0; k < 200; ++k) {
        const double b1 = g() * std::sqrt(dt), b2 = g() * std::sqrt(dt);
        const cplx w = cplx(b1, b2) / std::sqrt(2.0);
        const CMatrix out = step_unitary(G, increment_matrix(EdgeNoise{{w}, dt}, Topology::Closed, 2));
        const N2State e = n2_from_matrix(out);
        const N2State r = n2_reduced_step(s, b1, b2, dt);
        worst = std::max({worst, std::abs(e.D - r.D), std::abs(e.R - r.R), std::abs(e.I - r.I)});
        typical = std::max(typical, std::abs(e.D - s.D));
    }
    CHECK(worst < 10 * dt);
    CHECK(typical > 100 * dt);
}

TEST_CASE("Hermiticity check") {
    CMatrix A = random_hermitian(3, 1);
    CHECK(is_hermitian(A));
    A(0, 2) += 1e-6;
    CHECK_FALSE(is_hermitian(A));
    CHECK_FALSE(is_hermitian(CMatrix::Zero(2, 3)));
}
