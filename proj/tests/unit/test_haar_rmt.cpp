#include "doctest.h"

#include "qssep/errors.hpp"
#include "qssep/freeprob.hpp"
#include "qssep/haar_rmt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

using namespace qssep;

namespace {

double arcsine_cdf(double x) {
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    return 2 / std::numbers::pi * std::asin(std::sqrt(x));
}

RVector bernoulli_diagonal(int N) {
    RVector D = RVector::Zero(N);
    for (int i = 0; i < N / 2; ++i) D(i) = 1.0;
    return D;
}

} // namespace

TEST_CASE("spectral measures") {
    const SpectralMeasure b = SpectralMeasure::bernoulli(0.5);
    CHECK(b.moment(1) == doctest::Approx(0.5));
    CHECK(b.moment(3) == doctest::Approx(0.5));
    const std::vector<double> k = b.free_cumulants(4);
    CHECK(k[1] == doctest::Approx(0.5));
    CHECK(k[2] == doctest::Approx(0.25));
    CHECK(std::abs(k[3]) < 1e-14);
    CHECK(k[4] == doctest::Approx(-1.0 / 16));
    CHECK(b.cdf(-0.1) == 0.0);
    CHECK(b.cdf(0.5) == doctest::Approx(0.5));
    CHECK(b.cdf(1.0) == doctest::Approx(1.0));
    SpectralMeasure bad{{0.0, 1.0}, {0.3, 0.3}};
    CHECK_THROWS_AS(bad.validate(), InvalidArgument);

    const Histogram h = Histogram::of({0.05, 0.15, 0.16, 0.95, 2.0}, 0.0, 1.0, 10);
    CHECK(h.mass[0] == doctest::Approx(0.2));
    CHECK(h.mass[1] == doctest::Approx(0.4));
    CHECK(h.mass[9] == doctest::Approx(0.2));
    CHECK(h.bin_left(3) == doctest::Approx(0.3));
}

TEST_CASE("Haar unitaries") {
    CounterRng rng(11, 1);
    for (int N : {1, 2, 5, 40}) {
        const CMatrix U = sample_haar_unitary(N, rng);
        CHECK((U.adjoint() * U - CMatrix::Identity(N, N)).norm() < 1e-12);
    }
    // |U_11|^2 is uniform on [0,1] for N = 2; E U = 0
    std::vector<double> w;
    cplx mean = 0.0;
    const int S = 10000;
    for (int s = 0; s < S; ++s) {
        const CMatrix U = sample_haar_unitary(2, rng);
        w.push_back(std::norm(U(0, 0)));
        mean += U(0, 1);
    }
    CHECK(kolmogorov_distance(w, [](double x) { return std::clamp(x, 0.0, 1.0); }) < 0.02);
    CHECK(std::abs(mean / double(S)) < 0.03);

    const RVector D = RVector::LinSpaced(30, -1.0, 2.0);
    const CMatrix M = orbit_sample(D, rng);
    CHECK((M - M.adjoint()).norm() < 1e-12);
    const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(M, Eigen::EigenvaluesOnly).eigenvalues();
    CHECK((ev - D).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(principal_submatrix_spectrum(M, 1.0).size() == 30);
    CHECK(principal_submatrix_spectrum(M, 0.5).size() == 15);
    CHECK_THROWS_AS(principal_submatrix_spectrum(M, 0.0), InvalidArgument);
}

TEST_CASE("free compression: Bernoulli half at ell = 1/2 is arcsine") {
    const CompressionResult r = free_compression_predict(SpectralMeasure::bernoulli(0.5), 0.5);
    CHECK(std::abs(r.mass - 1.0) < 1e-3);
    CHECK(r.max_residual < 1e-10);
    double worst = 0.0;
    for (double x = 0.05; x < 1.0; x += 0.05) worst = std::max(worst, std::abs(r.submatrix_cdf(x) - arcsine_cdf(x)));
    CHECK(worst < 0.01);
    // mean of mu_ell is kappa_1 / ell
    double m1 = 0.0;
    for (std::size_t i = 1; i < r.E.size(); ++i)
        m1 += 0.5 * (r.E[i] * r.density[i] + r.E[i - 1] * r.density[i - 1]) * (r.E[i] - r.E[i - 1]);
    CHECK(m1 / r.mass == doctest::Approx(1.0).epsilon(5e-3));

    CounterRng rng(12, 2);
    std::vector<double> ev;
    for (int s = 0; s < 4; ++s) {
        const RVector e = principal_submatrix_spectrum(orbit_sample(bernoulli_diagonal(400), rng), 0.5);
        ev.insert(ev.end(), e.data(), e.data() + e.size());
    }
    CHECK(kolmogorov_distance(ev, [&](double x) { return r.submatrix_cdf(x); }) < 0.05);
}

TEST_CASE("free compression: ell = 1 reproduces a smooth measure") {
    std::vector<double> atoms;
    for (int i = 0; i < 400; ++i) atoms.push_back((i + 0.5) / 400);
    const CompressionResult r = free_compression_predict(SpectralMeasure::uniform(atoms), 1.0);
    CHECK(std::abs(r.mass - 1.0) < 1e-3);
    for (double x : {0.2, 0.4, 0.5, 0.6, 0.8}) CHECK(std::abs(r.cdf_at(x) - x) < 0.01);
    // semicircle-like spreading under compression: variance of mu_ell is kappa_2 / ell
    const CompressionResult q = free_compression_predict(SpectralMeasure::uniform(atoms), 0.25);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t i = 1; i < q.E.size(); ++i) {
        const double dx = q.E[i] - q.E[i - 1];
        m1 += 0.5 * (q.E[i] * q.density[i] + q.E[i - 1] * q.density[i - 1]) * dx;
        m2 += 0.5 * (q.E[i] * q.E[i] * q.density[i] + q.E[i - 1] * q.E[i - 1] * q.density[i - 1]) * dx;
    }
    m1 /= q.mass;
    m2 /= q.mass;
    CHECK(m1 == doctest::Approx(0.5 / 0.25).epsilon(5e-3));
    CHECK(m2 - m1 * m1 == doctest::Approx(q.kappa[2] / 0.25).epsilon(2e-2));
    CHECK_THROWS_AS(free_compression_predict(SpectralMeasure::uniform(atoms), 0.0), InvalidArgument);
}

TEST_CASE("HCIZ rank-one series") {
    CounterRng rng(13, 3);
    const SpectralMeasure b = SpectralMeasure::bernoulli(0.5);
    const HcizResult z0 = hciz_series_check(b, 1.0, 0.0, 50, 100, rng);
    CHECK(std::abs(z0.monte_carlo) < 1e-15);
    CHECK(z0.series == 0.0);
    CHECK(z0.within_budget);

    const HcizResult r = hciz_series_check(b, 1.0, 0.5, 200, 4000, rng);
    CHECK(r.terms.size() == 6);
    CHECK(r.terms[0] == doctest::Approx(0.25));
    CHECK(r.terms[1] == doctest::Approx(0.25 * 0.25 / 2));
    CHECK(r.within_budget);
    CHECK(std::abs(r.monte_carlo - r.series) < 0.01);
    CHECK_THROWS_AS(hciz_series_check(b, 1.0, 20.0, 50, 100, rng), DomainError);
}

TEST_CASE("structured traces for a Haar orbit") {
    CounterRng rng(14, 4);
    const int N = 120;
    const RVector D = bernoulli_diagonal(N);
    std::vector<CMatrix> ens;
    for (int s = 0; s < 200; ++s) ens.push_back(orbit_sample(D, rng));
    const LocalCumulant g = constant_cumulants(SpectralMeasure::bernoulli(0.5).free_cumulants(4));
    auto psi1 = [](double x) { return 1 + x; };
    auto psi2 = [](double x) { return x * x; };

    const TraceCheck t1 = structured_trace_check(ens, {psi1}, g);
    CHECK(t1.prediction == doctest::Approx(0.75).epsilon(1e-4));
    CHECK(std::abs(t1.empirical - t1.prediction) < 1e-12 + 4 * t1.std_error);

    const TraceCheck t2 = structured_trace_check(ens, {psi1, psi2}, g);
    // kappa_2 int psi1 psi2 + kappa_1^2 int psi1 int psi2
    const double expect = 0.25 * (1.0 / 3 + 1.0 / 4) + 0.25 * 1.5 / 3;
    CHECK(t2.prediction == doctest::Approx(expect).epsilon(1e-3));
    CHECK(std::abs(t2.empirical - t2.prediction) < 4 * t2.std_error + 2.0 / N);
}
