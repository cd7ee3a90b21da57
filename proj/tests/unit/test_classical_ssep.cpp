#include "doctest.h"

#include "qssep/classical_ssep.hpp"
#include "qssep/errors.hpp"
#include "qssep/fock_oracle.hpp"
#include "qssep/rng.hpp"
#include "oracles/moment_hierarchy.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <bit>
#include <cmath>
#include <numeric>
#include <vector>

using namespace qssep;

namespace {

SsepRates random_rates(CounterRng& rng) {
    return {rng.uniform() * 2, rng.uniform() * 2, rng.uniform() * 2, rng.uniform() * 2};
}

// Exact open-SSEP profile: rho_i = (n_a (N + b - i) + n_b (i - 1 + a)) / (N - 1 + a + b),
// a = 1/(alpha1 + beta1), b = 1/(alphaN + betaN).
double exact_profile(int N, const SsepRates& r, int i) {
    const double a = 1 / (r.alpha1 + r.beta1), b = 1 / (r.alphaN + r.betaN);
    const double na = r.alpha1 * a, nb = r.alphaN * b;
    return (na * (N + b - i) + nb * (i - 1 + a)) / (N - 1 + a + b);
}

} // namespace

TEST_CASE("generator structure") {
    const SsepGenerator g2 = build_generator(2, {});
    const RMatrix Q = RMatrix(g2.Q);
    // |01> = 1, |10> = 2
    CHECK(Q(1, 2) == 1.0);
    CHECK(Q(2, 1) == 1.0);
    CHECK(Q(1, 1) == -1.0);
    CHECK(Q(0, 0) == 0.0);
    CHECK(Q(3, 3) == 0.0);
    CHECK(g2.Q.nonZeros() == 6);

    CounterRng rng(5);
    for (int N = 1; N <= 8; ++N) {
        const RMatrix M = RMatrix(build_generator(N, random_rates(rng)).Q);
        CHECK(M.colwise().sum().cwiseAbs().maxCoeff() < 1e-14);
        for (int i = 0; i < M.rows(); ++i)
            for (int j = 0; j < M.cols(); ++j)
                if (i != j) CHECK(M(i, j) >= 0.0);
    }
    CHECK_THROWS_AS(build_generator(13, {1, 1, 1, 1}), SizeLimitError);
    CHECK_THROWS_AS(build_generator(3, {-1, 1, 1, 1}), InvalidArgument);
}

TEST_CASE("stationary law at equal reservoir densities is Bernoulli(1/2)") {
    for (int N : {1, 4, 7, 11}) {
        const RVector p = stationary_distribution(build_generator(N, {1, 1, 1, 1}));
        CHECK(std::abs(p.sum() - 1.0) < 1e-14);
        CHECK((p.array() - std::ldexp(1.0, -N)).abs().maxCoeff() < 1e-12);
    }
    const RVector p = stationary_distribution(build_generator(5, {0.3, 0.7, 3.0, 7.0}));
    // equal densities 0.3 at both ends: product Bernoulli(0.3)
    for (std::uint32_t s = 0; s < 32; ++s) {
        const int k = std::popcount(s);
        CHECK(p(s) == doctest::Approx(std::pow(0.3, k) * std::pow(0.7, 5 - k)).epsilon(1e-10));
    }
}

TEST_CASE("stationary profile and covariance") {
    CounterRng rng(17);
    for (int N : {2, 5, 9, 12}) {
        const SsepRates r = random_rates(rng);
        const RVector p = stationary_distribution(build_generator(N, r));
        CHECK(p.minCoeff() >= 0.0);
        CHECK(std::abs(p.sum() - 1.0) < 1e-14);
        const RVector prof = occupation_profile(p, N);
        for (int i = 1; i <= N; ++i) CHECK(std::abs(prof(i - 1) - exact_profile(N, r, i)) < 1e-9);
    }
    const SsepRates r{1, 0, 0, 1};
    const RVector p = stationary_distribution(build_generator(6, r));
    const RMatrix C = occupation_covariance(p, 6);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            if (i != j) CHECK(C(i, j) < 0.0);
    const RVector prof = occupation_profile(p, 6);
    for (int i = 1; i <= 6; ++i) CHECK(prof(i - 1) == doctest::Approx((7.0 - i) / 7.0).epsilon(1e-12));
}

TEST_CASE("reducible chains are rejected") {
    CHECK_THROWS_AS(stationary_distribution(build_generator(4, {})), DegeneracyError);
    CHECK_THROWS_AS(stationary_distribution(build_generator(1, {})), DegeneracyError);
    // injection only: the full configuration absorbs every path
    const RVector p = stationary_distribution(build_generator(4, {1, 0, 0, 0}));
    CHECK(p(15) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cumulant generating function") {
    const SsepGenerator g = build_generator(6, {1, 0.2, 0.1, 2});
    const std::vector<double> zero(6, 0.0);
    CHECK(std::abs(cgf_exact(g, zero)) < 1e-14);

    // single site fed by both reservoirs
    const SsepRates r{0.7, 0.4, 0.3, 1.1};
    const double n = (r.alpha1 + r.alphaN) / (r.alpha1 + r.beta1 + r.alphaN + r.betaN);
    for (double h : {-2.0, -0.3, 0.5, 1.7}) {
        const double v = cgf_exact(build_generator(1, r), std::vector<double>{h});
        CHECK(v == doctest::Approx(std::log(1 - n + n * std::exp(h))).epsilon(1e-13));
    }

    const RVector p = stationary_distribution(g);
    CounterRng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> h1(6), h2(6), hm(6);
        for (int k = 0; k < 6; ++k) {
            h1[k] = 4 * rng.uniform() - 2;
            h2[k] = 4 * rng.uniform() - 2;
        }
        const double lam = rng.uniform();
        for (int k = 0; k < 6; ++k) hm[k] = lam * h1[k] + (1 - lam) * h2[k];
        CHECK(cgf_of(p, 6, hm) <= lam * cgf_of(p, 6, h1) + (1 - lam) * cgf_of(p, 6, h2) + 1e-13);
        std::vector<double> up(h1.begin(), h1.end());
        up[trial % 6] += 0.5;
        CHECK(cgf_of(p, 6, up) >= cgf_of(p, 6, h1));
    }
    // large fields do not overflow
    const std::vector<double> big(6, 800.0);
    CHECK(std::isfinite(cgf_of(p, 6, big)));
    CHECK_THROWS_AS(cgf_of(p, 6, std::vector<double>(5, 0.0)), InvalidArgument);
}

TEST_CASE("master equation propagation") {
    const SsepGenerator g = build_generator(4, {1.0, 0.3, 0.2, 0.8});
    RVector p0 = RVector::Zero(16);
    p0(5) = 1.0;
    const RMatrix Q = RMatrix(g.Q);
    for (double t : {0.0, 0.3, 2.0, 17.0}) {
        const RVector p = propagate(g, p0, t);
        const RVector ref = (Q * t).exp() * p0;
        CHECK((p - ref).cwiseAbs().maxCoeff() < 1e-12);
        CHECK(std::abs(p.sum() - 1.0) < 1e-12);
    }
    const RVector far = propagate(g, p0, 400.0);
    CHECK((far - stationary_distribution(g)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK_THROWS_AS(propagate(g, p0, -1.0), InvalidArgument);
}

TEST_CASE("Gillespie without reservoirs conserves particles") {
    std::vector<int> init(40, 0);
    for (int i = 0; i < 40; i += 3) init[i] = 1;
    const int n0 = std::accumulate(init.begin(), init.end(), 0);
    GillespieSimulator sim(40, {}, 9, init);
    long changes = 0;
    sim.advance(200.0, {}, [&](const SsepEvent&) { ++changes; });
    CHECK(changes > 1000);
    CHECK(std::accumulate(sim.state().begin(), sim.state().end(), 0) == n0);

    const SsepTrajectory a = gillespie_run(20, {1, 0.5, 0.2, 1}, 50.0, 4);
    const SsepTrajectory b = gillespie_run(20, {1, 0.5, 0.2, 1}, 50.0, 4);
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t k = 0; k < a.events.size(); ++k) {
        CHECK(a.events[k].t == b.events[k].t);
        CHECK(a.events[k].site == b.events[k].site);
    }
    // replaying the events reproduces the final state
    std::vector<int> s = a.initial;
    for (const auto& e : a.events) s[e.site - 1] = e.occupancy;
    CHECK(s == a.final_state);
    CHECK_THROWS_AS(gillespie_run(10001, {}, 1.0, 1), SizeLimitError);
}

TEST_CASE("Gillespie stationary statistics match the exact law") {
    const int N = 6;
    const SsepRates r{1.0, 0.2, 0.3, 1.5};
    const RVector p = stationary_distribution(build_generator(N, r));
    const RVector prof = occupation_profile(p, N);
    const RMatrix cov = occupation_covariance(p, N);

    GillespieSimulator sim(N, r, 2024);
    sim.advance(200.0);
    const int batches = 200;
    const double len = 500.0;
    RMatrix means(batches, N);
    std::vector<double> c13(batches);
    for (int b = 0; b < batches; ++b) {
        RVector acc = RVector::Zero(N);
        double m13 = 0.0;
        sim.advance(sim.time() + len, [&](double t0, double t1, const std::vector<int>& n) {
            for (int i = 0; i < N; ++i) acc(i) += n[i] * (t1 - t0);
            m13 += n[0] * n[2] * (t1 - t0);
        });
        means.row(b) = acc.transpose() / len;
        c13[b] = m13 / len;
    }
    for (int i = 0; i < N; ++i) {
        const double m = means.col(i).mean();
        const double se = std::sqrt((means.col(i).array() - m).square().sum() / (batches - 1) / batches);
        CHECK(std::abs(m - prof(i)) < 3 * se);
    }
    double mc = 0.0;
    for (double v : c13) mc += v;
    mc /= batches;
    const double cov13 = mc - means.col(0).mean() * means.col(2).mean();
    CHECK(cov13 < 0.0);
    CHECK(cov(0, 2) < 0.0);
}

TEST_CASE("noise-averaged quantum evolution matches the SSEP master equation") {
    // open chain, N = 3, t = 1
    ChainConfig cfg;
    cfg.N = 3;
    cfg.topology = Topology::Open;
    cfg.alpha1 = 1.0;
    cfg.betaN = 1.0;
    cfg.dt = 1e-2;
    const std::vector<int> occ{0, 1, 0};
    const std::vector<double> h{0.4, -0.3, 0.7};
    const int paths = 6000;
    const long steps = std::lround(1.0 / cfg.dt);
    double sum = 0.0, sum2 = 0.0;
    for (int k = 0; k < paths; ++k) {
        ChainNoise noise(cfg, k);
        CMatrix rho = basis_state(3, occ);
        for (long s = 0; s < steps; ++s) rho = fock_open_step(rho, noise.next(), cfg);
        const double v = exp_number_expectation(rho, h);
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / paths;
    const double se = std::sqrt((sum2 / paths - mean * mean) / (paths - 1));

    const SsepGenerator g = build_generator(3, {1.0, 0.0, 0.0, 1.0});
    RVector p0 = RVector::Zero(8);
    p0(2) = 1.0;
    const double exact = std::exp(cgf_of(propagate(g, p0, 1.0), 3, h));
    MESSAGE("quantum " << mean << " +- " << se << ", classical " << exact);
    CHECK(std::abs(mean - exact) < 3 * se);
}

TEST_CASE("stationary G moments reproduce SSEP correlations") {
    ChainConfig cfg;
    cfg.N = 6;
    cfg.topology = Topology::Open;
    cfg.alpha1 = 0.7;
    cfg.beta1 = 0.4;
    cfg.alphaN = 0.2;
    cfg.betaN = 1.1;
    const oracle::MomentHierarchy mh(cfg, 3);
    const RVector p = stationary_distribution(build_generator(6, {0.7, 0.4, 0.2, 1.1}));
    const RVector prof = occupation_profile(p, 6);
    const RMatrix C = occupation_covariance(p, 6);
    for (int i = 1; i <= 6; ++i) CHECK(std::abs(mh.moment({{i, i}}).real() - prof(i - 1)) < 1e-12);
    for (int i = 1; i <= 6; ++i)
        for (int j = i + 1; j <= 6; ++j) {
            // Wick: <n_i n_j> = E det G_{ij}
            const double wick = (mh.moment({{i, i}, {j, j}}) - mh.moment({{i, j}, {j, i}})).real();
            CHECK(std::abs(wick - (C(i - 1, j - 1) + prof(i - 1) * prof(j - 1))) < 1e-12);
        }
    CHECK(std::abs(mh.moment({{1, 2}})) == 0.0);
    CHECK(std::abs(mh.moment({{1, 2}, {2, 3}})) == 0.0);
    const int s[3] = {2, 3, 5};
    const int perm[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {1, 0, 2}, {0, 2, 1}, {2, 1, 0}};
    cplx det = 0.0;
    for (int q = 0; q < 6; ++q)
        det += (q < 3 ? 1.0 : -1.0) *
               mh.moment({{s[0], s[perm[q][0]]}, {s[1], s[perm[q][1]]}, {s[2], s[perm[q][2]]}});
    double nnn = 0.0;
    for (int st = 0; st < 64; ++st)
        if (ssep_occupation(st, 6, 2) && ssep_occupation(st, 6, 3) && ssep_occupation(st, 6, 5)) nnn += p(st);
    CHECK(std::abs(det.real() - nnn) < 1e-12);
}
