#include "doctest.h"

#include "oracles/brute_force.hpp"
#include "qssep/errors.hpp"
#include "qssep/freeprob.hpp"
#include "qssep/rng.hpp"

#include <chrono>
#include <cmath>
#include <algorithm>
#include <map>
#include <memory>
#include <vector>

using namespace qssep;

namespace {

// arbitrary functional: a fixed random number per index tuple
MomentFunctional table_functional(std::uint64_t seed) {
    auto table = std::make_shared<std::map<std::vector<int>, double>>();
    return [table, seed](std::span<const int> idx) {
        std::vector<int> key(idx.begin(), idx.end());
        auto it = table->find(key);
        if (it != table->end()) return it->second;
        std::uint64_t h = seed;
        for (int i : key) h = splitmix64(h ^ static_cast<std::uint64_t>(i + 17));
        const double v = CounterRng(h).uniform() * 2.0 - 1.0;
        table->emplace(key, v);
        return v;
    };
}

double g2_poly(double x, double y) { return x * (1 - y); }
double g3_poly(double x, double y, double z) { return x * (1 - 2 * y) * (1 - z); }
double g4_poly_a(double x1, double x2, double x3, double x4) { return x1 * (1 - 3 * x2 - 2 * x3 + 5 * x2 * x3) * (1 - x4); }
double g4_poly_b(double x1, double x2, double x3, double x4) { return x1 * (1 - 4 * x2 - x3 + 5 * x2 * x3) * (1 - x4); }

} // namespace

TEST_CASE("partition counts") {
    const long long cat[] = {1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796, 58786, 208012};
    const long long bel[] = {1, 1, 2, 5, 15, 52, 203, 877, 4140, 21147, 115975, 678570, 4213597};
    for (int n = 1; n <= 10; ++n) {
        CHECK(enumerate_partitions(n, true).size() == static_cast<std::size_t>(cat[n]));
        CHECK(enumerate_partitions(n, false).size() == static_cast<std::size_t>(bel[n]));
        CHECK(catalan(n) == cat[n]);
        CHECK(bell(n) == bel[n]);
    }
    auto t0 = std::chrono::steady_clock::now();
    long long count = 0;
    for_each_partition(12, true, [&](const SetPartition&) { ++count; });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    CHECK(count == 208012);
    CHECK(secs < 1.0);
}

TEST_CASE("enumerated partitions are canonical and distinct") {
    for (int n = 1; n <= 7; ++n) {
        auto all = enumerate_partitions(n, false);
        std::size_t nc = 0;
        for (std::size_t i = 0; i < all.size(); ++i) {
            CHECK(all[i].label[0] == 0);
            if (is_noncrossing(all[i])) ++nc;
            for (std::size_t j = i + 1; j < std::min(all.size(), i + 20); ++j) CHECK_FALSE(all[i] == all[j]);
        }
        CHECK(nc == static_cast<std::size_t>(catalan(n)));
        for (const auto& p : enumerate_partitions(n, true)) CHECK(is_noncrossing(p));
    }
}

TEST_CASE("crossing detection") {
    auto p = SetPartition::from_blocks(4, {{0, 2}, {1, 3}});
    CHECK_FALSE(is_noncrossing(p));
    CHECK_THROWS_AS(kreweras_complement(p), DomainError);
    CHECK(is_noncrossing(SetPartition::from_blocks(4, {{0, 3}, {1, 2}})));
}

TEST_CASE("size limits") {
    CHECK_THROWS_AS(enumerate_partitions(13, true), SizeLimitError);
    std::vector<int> idx(11, 0);
    auto phi = table_functional(1);
    CHECK_THROWS_AS(free_cumulant(phi, idx), SizeLimitError);
    CHECK_THROWS_AS(classical_cumulant(phi, idx), SizeLimitError);
    std::vector<double> x(11, 0.5);
    CHECK_THROWS_AS(indicator_free_cumulant(x), SizeLimitError);
}

TEST_CASE("kreweras complement agrees with exhaustive search") {
    for (int n = 1; n <= 7; ++n)
        for (const auto& pi : enumerate_partitions(n, true)) {
            const auto K = kreweras_complement(pi);
            CHECK(K == oracle::kreweras_by_search(pi));
            CHECK(pi.num_blocks() + K.num_blocks() == n + 1);
            CHECK(is_noncrossing(K));
        }
}

TEST_CASE("kreweras examples and double complement") {
    CHECK(kreweras_complement(SetPartition::from_blocks(3, {{0, 1}, {2}})) ==
          SetPartition::from_blocks(3, {{0}, {1, 2}}));
    CHECK(kreweras_complement(SetPartition::from_blocks(2, {{0}, {1}})) == SetPartition::from_blocks(2, {{0, 1}}));
    for (int n = 1; n <= 9; ++n)
        for (const auto& pi : enumerate_partitions(n, true)) {
            const auto KK = kreweras_complement(kreweras_complement(pi));
            // K^2 = gamma^{-1} pi gamma: blocks shift by one step, i -> i-1
            std::vector<std::vector<int>> rot;
            for (auto B : pi.blocks()) {
                for (int& e : B) e = (e + n - 1) % n;
                rot.push_back(B);
            }
            CHECK(KK == SetPartition::from_blocks(n, rot));
        }
}

TEST_CASE("moebius function from kreweras matches lattice inversion") {
    for (int n = 1; n <= 5; ++n) {
        std::vector<SetPartition> order;
        const auto mu = oracle::nc_moebius_by_inversion(n, order);
        for (std::size_t i = 0; i < order.size(); ++i) CHECK(nc_moebius(order[i]) == doctest::Approx(mu[i]).epsilon(1e-12));
    }
}

TEST_CASE("free and classical cumulants coincide up to arity 3") {
    for (int f = 0; f < 100; ++f) {
        auto phi = table_functional(1000 + f);
        for (int k = 1; k <= 3; ++k) {
            std::vector<int> idx;
            for (int j = 0; j < k; ++j) idx.push_back((f * 7 + j * 3) % 5);
            CHECK(std::abs(free_cumulant(phi, idx) - classical_cumulant(phi, idx)) < 1e-12);
        }
    }
}

TEST_CASE("free cumulants invert the non-crossing moment expansion") {
    // random free cumulants of a tuple; moments from the NC expansion; recover them
    for (int n = 1; n <= 7; ++n) {
        CounterRng rng(77, n);
        std::vector<double> kap(std::size_t{1} << n);
        for (auto& v : kap) v = rng.uniform() - 0.5;
        auto mom_of = [&](std::uint32_t S) {
            std::vector<int> pos;
            for (int i = 0; i < n; ++i)
                if (S & (1u << i)) pos.push_back(i);
            double sum = 0.0;
            for_each_partition(static_cast<int>(pos.size()), true, [&](const SetPartition& p) {
                double prod = 1.0;
                for (auto m : p.block_masks()) {
                    std::uint32_t sub = 0;
                    for (std::size_t j = 0; j < pos.size(); ++j)
                        if (m & (1u << j)) sub |= 1u << pos[j];
                    prod *= kap[sub];
                }
                sum += prod;
            });
            return sum;
        };
        MomentFunctional phi = [&](std::span<const int> idx) {
            std::uint32_t S = 0;
            for (int i : idx) S |= 1u << i;
            return mom_of(S);
        };
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        const double full = kap[(1u << n) - 1];
        CHECK(free_cumulant(phi, idx) == doctest::Approx(full).epsilon(1e-10));
        CHECK(free_cumulant_moebius(phi, idx) == doctest::Approx(full).epsilon(1e-10));
    }
}

TEST_CASE("classical cumulants invert the full moment expansion") {
    for (int n = 1; n <= 6; ++n) {
        CounterRng rng(78, n);
        std::vector<double> kap(std::size_t{1} << n);
        for (auto& v : kap) v = rng.uniform() - 0.5;
        MomentFunctional phi = [&](std::span<const int> idx) {
            std::vector<int> pos(idx.begin(), idx.end());
            double sum = 0.0;
            for_each_partition(static_cast<int>(pos.size()), false, [&](const SetPartition& p) {
                double prod = 1.0;
                for (auto m : p.block_masks()) {
                    std::uint32_t sub = 0;
                    for (std::size_t j = 0; j < pos.size(); ++j)
                        if (m & (1u << j)) sub |= 1u << pos[j];
                    prod *= kap[sub];
                }
                sum += prod;
            });
            return sum;
        };
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        CHECK(classical_cumulant(phi, idx) == doctest::Approx(kap[(1u << n) - 1]).epsilon(1e-10));
    }
}

TEST_CASE("univariate free cumulants of known laws") {
    // Catalan moments (free Poisson, rate 1): every free cumulant is 1
    std::vector<double> m(13);
    for (int n = 0; n <= 12; ++n) m[n] = static_cast<double>(catalan(n));
    auto k = free_cumulants_from_moments(m);
    for (int n = 1; n <= 12; ++n) CHECK(k[n] == doctest::Approx(1.0).epsilon(1e-12));
    // semicircle: moments C_{n/2} for even n, only kappa_2 = 1
    std::vector<double> s(11, 0.0);
    for (int n = 0; n <= 10; n += 2) s[n] = static_cast<double>(catalan(n / 2));
    auto ks = free_cumulants_from_moments(s);
    CHECK(ks[2] == doctest::Approx(1.0));
    for (int n = 3; n <= 10; ++n) CHECK(std::abs(ks[n]) < 1e-12);
    auto back = moments_from_free_cumulants(k);
    for (int n = 1; n <= 12; ++n) CHECK(back[n] == doctest::Approx(m[n]).epsilon(1e-12));
}

TEST_CASE("univariate recursion matches the lattice recursion") {
    // Bernoulli(q): all moments equal q
    for (double q : {0.2, 0.5, 0.9}) {
        std::vector<double> m(11, q);
        auto k = free_cumulants_from_moments(m);
        MomentFunctional phi = [q](std::span<const int>) { return q; };
        for (int n = 1; n <= 10; ++n) {
            std::vector<int> idx(n, 0);
            CHECK(free_cumulant(phi, idx) == doctest::Approx(k[n]).epsilon(1e-10));
        }
        auto kc = classical_cumulants_from_moments(m);
        CHECK(kc[2] == doctest::Approx(q * (1 - q)));
        CHECK(kc[3] == doctest::Approx(q * (1 - q) * (1 - 2 * q)));
    }
}

TEST_CASE("indicator cumulants: worked values") {
    const double a[] = {0.25, 0.75};
    CHECK(indicator_free_cumulant(a) == doctest::Approx(0.0625).epsilon(1e-14));
    const double b[] = {0.1, 0.2, 0.3};
    CHECK(indicator_free_cumulant(b) == doctest::Approx(0.042).epsilon(1e-13));
    const double c[] = {0.1, 0.2, 0.3, 0.4};
    CHECK(indicator_free_cumulant(c) == doctest::Approx(0.006).epsilon(1e-12));
    const double d[] = {0.1, 0.3, 0.2, 0.4};
    CHECK(indicator_free_cumulant(d) == doctest::Approx(0.012).epsilon(1e-12));
    const double e[] = {0.3};
    CHECK(indicator_free_cumulant(e) == doctest::Approx(0.3));
    const double bad[] = {0.3, 1.2};
    CHECK_THROWS_AS(indicator_free_cumulant(bad), DomainError);
}

TEST_CASE("indicator cumulants match the low-order polynomials") {
    CounterRng rng(5);
    for (int t = 0; t < 100; ++t) {
        double x[4];
        for (double& v : x) v = rng.uniform();
        std::sort(x, x + 4);
        const double p2[] = {x[0], x[1]};
        CHECK(std::abs(indicator_free_cumulant(p2) - g2_poly(x[0], x[1])) < 1e-12);
        const double p3[] = {x[0], x[1], x[2]};
        CHECK(std::abs(indicator_free_cumulant(p3) - g3_poly(x[0], x[1], x[2])) < 1e-12);
        const double p4a[] = {x[0], x[1], x[2], x[3]};
        CHECK(std::abs(indicator_free_cumulant(p4a) - g4_poly_a(x[0], x[1], x[2], x[3])) < 1e-12);
        const double p4b[] = {x[0], x[2], x[1], x[3]};
        CHECK(std::abs(indicator_free_cumulant(p4b) - g4_poly_b(x[0], x[1], x[2], x[3])) < 1e-12);
    }
}

TEST_CASE("indicator cumulants: symmetries and multilinearity") {
    CounterRng rng(6);
    for (int t = 0; t < 50; ++t) {
        const int p = 2 + t % 5;
        std::vector<double> x(p);
        for (double& v : x) v = rng.uniform();
        const double g = indicator_free_cumulant(x);
        std::vector<double> rot(x.begin() + 1, x.end());
        rot.push_back(x[0]);
        CHECK(indicator_free_cumulant(rot) == doctest::Approx(g).epsilon(1e-12));
        std::vector<double> rev(x.rbegin(), x.rend());
        CHECK(indicator_free_cumulant(rev) == doctest::Approx(g).epsilon(1e-12));
        // degree one in x_0 while its order relative to the others is kept
        double lo = 0.0, hi = 1.0;
        for (int j = 1; j < p; ++j) {
            if (x[j] < x[0]) lo = std::max(lo, x[j]);
            else hi = std::min(hi, x[j]);
        }
        auto at = [&](double v) {
            auto y = x;
            y[0] = v;
            return indicator_free_cumulant(y);
        };
        const double u = lo + 0.25 * (hi - lo), w = lo + 0.75 * (hi - lo);
        CHECK(at(0.5 * (u + w)) == doctest::Approx(0.5 * (at(u) + at(w))).epsilon(1e-10));
    }
}

TEST_CASE("loop moment density") {
    auto g = [](std::span<const double> x) { return indicator_free_cumulant(x); };
    auto one = [](double) { return 1.0; };
    // p = 1: int x dx
    CHECK(loop_moment_density(g, {one}, 200) == doctest::Approx(0.5).epsilon(1e-12));
    // p = 2, psi = 1: int int (min - xy) + int x^2 = 1/12 + 1/3
    CHECK(loop_moment_density(g, {one, one}, 200) == doctest::Approx(5.0 / 12.0).epsilon(1e-4));
    // p = 2 with profiles, against a direct double sum
    auto f1 = [](double x) { return 1.0 + x; };
    auto f2 = [](double x) { return x * x; };
    const int M = 100;
    double direct = 0.0;
    for (int a = 0; a < M; ++a) {
        const double x = (a + 0.5) / M;
        direct += x * x * f1(x) * f2(x) / M;
        for (int b = 0; b < M; ++b) {
            const double y = (b + 0.5) / M;
            direct += (std::min(x, y) - x * y) * f1(x) * f2(y) / (M * M);
        }
    }
    CHECK(loop_moment_density(g, {f1, f2}, M) == doctest::Approx(direct).epsilon(1e-12));
    // constant cumulants: int T_2 = kappa_2 + kappa_1^2 for psi = 1
    auto gc = constant_cumulants({0.0, 0.3, 0.21, 0.084});
    CHECK(loop_moment_density(gc, {one, one}, 10) == doctest::Approx(0.21 + 0.09).epsilon(1e-12));
    // p = 3, psi = 1: sum over NC(3) of products of kappas equals the third moment
    CHECK(loop_moment_density(gc, {one, one, one}, 10) == doctest::Approx(0.084 + 3 * 0.3 * 0.21 + 0.027).epsilon(1e-12));
    CHECK_THROWS_AS(loop_moment_density(gc, std::vector<std::function<double(double)>>(9, one), 4), SizeLimitError);
}

TEST_CASE("loop moment density ignores crossing pairings") {
    // with g_2 only, p = 4: two non-crossing pairings, the crossing one absent
    auto g = constant_cumulants({0.0, 0.0, 1.0, 0.0, 0.0});
    auto one = [](double) { return 1.0; };
    CHECK(loop_moment_density(g, {one, one, one, one}, 8) == doctest::Approx(2.0).epsilon(1e-12));
}
