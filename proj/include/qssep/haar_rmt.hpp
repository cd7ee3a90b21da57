#pragma once

#include "qssep/freeprob.hpp"
#include "qssep/rng.hpp"
#include "qssep/types.hpp"

#include <functional>
#include <vector>

namespace qssep {

/// Weighted atoms; weights sum to one.
struct SpectralMeasure {
    std::vector<double> atoms;
    std::vector<double> weights;

    static SpectralMeasure uniform(std::vector<double> atoms);
    /// p delta_1 + (1-p) delta_0.
    static SpectralMeasure bernoulli(double p);
    void validate() const;
    double moment(int k) const;
    /// Free cumulants kappa_1..kappa_P (index 0 unused).
    std::vector<double> free_cumulants(int P) const;
    double cdf(double x) const;
};

struct Histogram {
    double lo = 0.0, hi = 1.0;
    std::vector<double> mass; // per bin, sums to the fraction of values inside [lo, hi]

    static Histogram of(const std::vector<double>& values, double lo, double hi, int bins);
    double bin_left(int k) const { return lo + (hi - lo) * k / static_cast<double>(mass.size()); }
    double bin_right(int k) const { return bin_left(k + 1); }
};

/// QR of a complex Ginibre matrix with the phases of R moved into Q.
CMatrix sample_haar_unitary(int N, CounterRng& rng);

/// U^dag diag(D) U for Haar U.
CMatrix orbit_sample(const RVector& D, CounterRng& rng);

/// Eigenvalues of the leading round(ell N) x round(ell N) block, ascending.
RVector principal_submatrix_spectrum(const CMatrix& M, double ell);

/// Density and CDF of the free compression mu_ell (free cumulants kappa_k / ell)
/// on a uniform grid. Solves K_ell(w) = z through the subordination point u,
/// w = G_mu(u), z = (u - (1 - ell)/G_mu(u))/ell, by Newton continuation along the
/// grid, then extrapolates the Stieltjes-Perron density in eta.
struct CompressionResult {
    double ell = 1.0;
    std::vector<double> E;
    std::vector<double> density; // eta -> 0 extrapolation, clipped at zero
    std::vector<double> cdf;     // normalised
    std::vector<double> etas;
    std::vector<std::vector<double>> density_at_eta;
    std::vector<double> kappa; // kappa_1..kappa_P of mu (index 0 unused)
    double mass = 0.0;         // integral of the extrapolated density before normalisation
    double max_residual = 0.0; // max |K_ell(w) - z| over the accepted grid points
    int newton_iterations = 0;

    /// CDF of mu_ell at x (linear interpolation on the grid).
    double cdf_at(double x) const;
    /// CDF of the submatrix spectrum, whose eigenvalues are ell times mu_ell variables.
    double submatrix_cdf(double lambda) const { return cdf_at(lambda / ell); }
};

CompressionResult free_compression_predict(const SpectralMeasure& mu, double ell, int grid_points = 2001,
                                           std::vector<double> etas = {0.05, 0.025, 0.0125}, int P = 12);

/// Kolmogorov distance between the empirical law of `values` and a CDF.
double kolmogorov_distance(std::vector<double> values, const std::function<double(double)>& cdf);

struct HcizResult {
    double monte_carlo = 0.0;
    double monte_carlo_se = 0.0;
    double series = 0.0;
    std::vector<double> terms; // z^n a^n kappa_n / n, n = 1..order
    double truncation = 0.0;   // size of the last term
    double budget = 0.0;       // 3 se + truncation + 1/N finite-size allowance
    bool within_budget = false;
};

/// (1/N) log E exp(z N tr(A U^dag G0 U)) for rank-one A = a |e_1><e_1| against
/// sum_n z^n a^n kappa_n(mu0)/n. G0 = diag(mu0 atoms, repeated by weight).
/// Throws DomainError when |term_n| does not decay.
HcizResult hciz_series_check(const SpectralMeasure& mu0, double a, double z, int N, int samples, CounterRng& rng,
                             int order = 6);

struct TraceCheck {
    double empirical = 0.0;
    double std_error = 0.0;
    double prediction = 0.0;
    long samples = 0;
};

/// N^{-1} E tr(M D_1 ... M D_p) with D_j = diag(psi_j((i - 1/2)/N)) against
/// loop_moment_density(g, psi).
TraceCheck structured_trace_check(const std::vector<CMatrix>& ensemble,
                                  const std::vector<std::function<double(double)>>& psi, const LocalCumulant& g,
                                  int quadrature_points = 200);

} // namespace qssep
