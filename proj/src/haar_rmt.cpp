#include "qssep/haar_rmt.hpp"

#include "qssep/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace qssep {

SpectralMeasure SpectralMeasure::uniform(std::vector<double> atoms) {
    require(!atoms.empty(), "need at least one atom");
    SpectralMeasure m;
    m.weights.assign(atoms.size(), 1.0 / atoms.size());
    m.atoms = std::move(atoms);
    return m;
}

SpectralMeasure SpectralMeasure::bernoulli(double p) {
    require(p >= 0 && p <= 1, "Bernoulli parameter must lie in [0,1]");
    return {{0.0, 1.0}, {1 - p, p}};
}

void SpectralMeasure::validate() const {
    require(!atoms.empty() && atoms.size() == weights.size(), "atoms and weights must match");
    double s = 0.0;
    for (std::size_t k = 0; k < atoms.size(); ++k) {
        require(std::isfinite(atoms[k]), "atoms must be finite");
        require(weights[k] >= 0, "weights must be non-negative");
        s += weights[k];
    }
    require(std::abs(s - 1.0) < 1e-12, "weights must sum to 1");
}

double SpectralMeasure::moment(int k) const {
    double s = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) s += weights[j] * std::pow(atoms[j], k);
    return s;
}

std::vector<double> SpectralMeasure::free_cumulants(int P) const {
    std::vector<double> m(P + 1);
    m[0] = 1.0;
    for (int k = 1; k <= P; ++k) m[k] = moment(k);
    return free_cumulants_from_moments(m);
}

double SpectralMeasure::cdf(double x) const {
    double s = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j)
        if (atoms[j] <= x) s += weights[j];
    return s;
}

Histogram Histogram::of(const std::vector<double>& values, double lo, double hi, int bins) {
    require(hi > lo && bins >= 1, "bad histogram range");
    require(!values.empty(), "empty sample");
    Histogram h;
    h.lo = lo;
    h.hi = hi;
    h.mass.assign(bins, 0.0);
    const double w = 1.0 / values.size();
    for (double v : values) {
        if (v < lo || v > hi) continue;
        const int k = std::min(bins - 1, static_cast<int>((v - lo) / (hi - lo) * bins));
        h.mass[k] += w;
    }
    return h;
}

CMatrix sample_haar_unitary(int N, CounterRng& rng) {
    require(N >= 1, "N must be positive");
    std::normal_distribution<double> nd;
    CMatrix Z(N, N);
    for (int j = 0; j < N; ++j)
        for (int i = 0; i < N; ++i) {
            const double re = nd(rng), im = nd(rng);
            Z(i, j) = cplx(re, im) / std::numbers::sqrt2;
        }
    const Eigen::HouseholderQR<CMatrix> qr(Z);
    CMatrix Q = qr.householderQ();
    const CMatrix& R = qr.matrixQR();
    for (int j = 0; j < N; ++j) {
        const cplx r = R(j, j);
        const double a = std::abs(r);
        Q.col(j) *= a > 0 ? r / a : cplx(1.0);
    }
    return Q;
}

CMatrix orbit_sample(const RVector& D, CounterRng& rng) {
    const CMatrix U = sample_haar_unitary(static_cast<int>(D.size()), rng);
    CMatrix M = U.adjoint() * D.cast<cplx>().asDiagonal() * U;
    return 0.5 * (M + M.adjoint());
}

RVector principal_submatrix_spectrum(const CMatrix& M, double ell) {
    require(M.rows() == M.cols(), "matrix must be square");
    require(ell > 0 && ell <= 1, "fraction must lie in (0,1]");
    const int k = static_cast<int>(std::lround(ell * M.rows()));
    require(k >= 1, "submatrix would be empty");
    return Eigen::SelfAdjointEigenSolver<CMatrix>(M.topLeftCorner(k, k), Eigen::EigenvaluesOnly).eigenvalues();
}

namespace {

struct Cauchy {
    const SpectralMeasure& mu;
    void eval(cplx u, cplx& G, cplx& dG) const {
        G = 0.0;
        dG = 0.0;
        for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
            const cplx r = 1.0 / (u - mu.atoms[k]);
            G += mu.weights[k] * r;
            dG -= mu.weights[k] * r * r;
        }
    }
};

} // namespace

double CompressionResult::cdf_at(double x) const {
    if (E.empty()) return 0.0;
    if (x <= E.front()) return 0.0;
    if (x >= E.back()) return 1.0;
    const double h = (E.back() - E.front()) / (E.size() - 1);
    const std::size_t k = std::min(E.size() - 2, static_cast<std::size_t>((x - E.front()) / h));
    const double t = (x - E[k]) / h;
    return (1 - t) * cdf[k] + t * cdf[k + 1];
}

CompressionResult free_compression_predict(const SpectralMeasure& mu, double ell, int grid_points,
                                           std::vector<double> etas, int P) {
    mu.validate();
    require(ell > 0 && ell <= 1, "fraction must lie in (0,1]");
    require(grid_points >= 3, "need at least three grid points");
    require(etas.size() == 3, "eta extrapolation uses three values eta, eta/2, eta/4");
    for (double e : etas) require(e > 0, "eta must be positive");
    CompressionResult res;
    res.ell = ell;
    res.etas = etas;
    res.kappa = mu.free_cumulants(P);

    const auto [mn, mx] = std::minmax_element(mu.atoms.begin(), mu.atoms.end());
    const double lo0 = *mn / ell, hi0 = *mx / ell;
    const double pad = 0.5 * (hi0 - lo0) + 0.5;
    const double lo = lo0 - pad, hi = hi0 + pad;
    res.E.resize(grid_points);
    for (int k = 0; k < grid_points; ++k) res.E[k] = lo + (hi - lo) * k / (grid_points - 1.0);
    const double h = res.E[1] - res.E[0];

    const Cauchy cauchy{mu};
    const double m1 = mu.moment(1);
    std::vector<std::vector<double>> cum;
    for (double eta : etas) {
        std::vector<double> dens(grid_points);
        cplx u = cplx(res.E[0], eta) - (1 - ell) * m1 / ell;
        for (int k = 0; k < grid_points; ++k) {
            const cplx zeta(res.E[k], eta);
            auto F = [&](cplx v, cplx& dF, cplx& G) {
                cplx dG;
                cauchy.eval(v, G, dG);
                dF = 1.0 + (1 - ell) * dG / (G * G);
                return v - (1 - ell) / G - ell * zeta;
            };
            cplx G, dF;
            cplx f = F(u, dF, G);
            int it = 0;
            for (; it < 200 && std::abs(f) > 1e-13; ++it) {
                cplx step = f / dF;
                double t = 1.0;
                cplx trial, Gt, dFt, ft;
                for (int half = 0; half < 40; ++half) {
                    trial = u - t * step;
                    ft = F(trial, dFt, Gt);
                    if (trial.imag() > 0 && std::abs(ft) < std::abs(f)) break;
                    t *= 0.5;
                }
                u = trial;
                f = ft;
                dF = dFt;
                G = Gt;
            }
            res.newton_iterations = std::max(res.newton_iterations, it);
            const double resid = std::abs(f) / ell;
            if (!(resid < 1e-10) || G.imag() > 0) {
                std::ostringstream os;
                os << "free compression solve failed at z = " << res.E[k] << " + " << eta << "i (residual " << resid
                   << ")";
                throw ConvergenceError(os.str());
            }
            res.max_residual = std::max(res.max_residual, resid);
            dens[k] = -G.imag() / std::numbers::pi;
        }
        std::vector<double> c(grid_points, 0.0);
        for (int k = 1; k < grid_points; ++k) c[k] = c[k - 1] + 0.5 * h * (dens[k] + dens[k - 1]);
        res.density_at_eta.push_back(std::move(dens));
        cum.push_back(std::move(c));
    }
    // rho(eta) ~ rho + c1 eta + c2 eta^2; etas[1] = etas[0]/2, etas[2] = etas[0]/4
    auto rich = [](double a, double b, double c) { return (8 * c - 6 * b + a) / 3; };
    res.density.resize(grid_points);
    res.cdf.resize(grid_points);
    for (int k = 0; k < grid_points; ++k) {
        res.density[k] =
            std::max(0.0, rich(res.density_at_eta[0][k], res.density_at_eta[1][k], res.density_at_eta[2][k]));
        res.cdf[k] = rich(cum[0][k], cum[1][k], cum[2][k]);
    }
    res.mass = res.cdf.back();
    double run = 0.0;
    for (double& c : res.cdf) {
        run = std::clamp(std::max(run, c), 0.0, res.mass);
        c = run / res.mass;
    }
    return res;
}

double kolmogorov_distance(std::vector<double> values, const std::function<double(double)>& cdf) {
    require(!values.empty(), "empty sample");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double F = cdf(values[k]);
        d = std::max({d, (k + 1) / n - F, F - k / n});
    }
    return d;
}

HcizResult hciz_series_check(const SpectralMeasure& mu0, double a, double z, int N, int samples, CounterRng& rng,
                             int order) {
    mu0.validate();
    require(N >= 2 && samples >= 2, "need N >= 2 and at least two samples");
    require(order >= 1 && order <= kMaxCumulantArity, "series order out of range");
    HcizResult r;
    const std::vector<double> kappa = mu0.free_cumulants(order);
    double tmax = 0.0;
    for (int n = 1; n <= order; ++n) {
        const double t = std::pow(z * a, n) * kappa[n] / n;
        r.terms.push_back(t);
        r.series += t;
        tmax = std::max(tmax, std::abs(t));
    }
    r.truncation = std::abs(r.terms.back());
    if (tmax > 0) {
        const double tail = std::max(std::abs(r.terms[order - 1]), order >= 2 ? std::abs(r.terms[order - 2]) : 0.0);
        if (order >= 3 && tail > 0.5 * tmax)
            throw DomainError("HCIZ series terms do not decay; reduce |z a|");
    }

    // diagonal of G0 with atom multiplicities round(w N)
    std::vector<double> D;
    for (std::size_t k = 0; k < mu0.atoms.size(); ++k) {
        const int cnt = k + 1 == mu0.atoms.size() ? N - static_cast<int>(D.size())
                                                  : static_cast<int>(std::lround(mu0.weights[k] * N));
        for (int j = 0; j < cnt && static_cast<int>(D.size()) < N; ++j) D.push_back(mu0.atoms[k]);
    }
    std::normal_distribution<double> nd;
    // e_1^dag U^dag G0 U e_1 = sum_k D_k |u_k|^2 with u a uniform unit vector
    std::vector<double> x(samples);
    for (int s = 0; s < samples; ++s) {
        double num = 0.0, den = 0.0;
        for (int k = 0; k < N; ++k) {
            const double re = nd(rng), im = nd(rng);
            const double w = re * re + im * im;
            num += D[k] * w;
            den += w;
        }
        x[s] = z * a * N * num / den;
    }
    const double shift = *std::max_element(x.begin(), x.end());
    double s1 = 0.0, s2 = 0.0;
    for (double v : x) {
        const double e = std::exp(v - shift);
        s1 += e;
        s2 += e * e;
    }
    const double mean = s1 / samples;
    const double var = std::max(0.0, s2 / samples - mean * mean);
    r.monte_carlo = (std::log(mean) + shift) / N;
    r.monte_carlo_se = std::sqrt(var / (samples - 1)) / mean / N;
    r.budget = 3 * r.monte_carlo_se + r.truncation + (z == 0.0 ? 0.0 : 1.0 / N);
    r.within_budget = std::abs(r.monte_carlo - r.series) <= r.budget;
    return r;
}

TraceCheck structured_trace_check(const std::vector<CMatrix>& ensemble,
                                  const std::vector<std::function<double(double)>>& psi, const LocalCumulant& g,
                                  int quadrature_points) {
    require(ensemble.size() >= 2, "need at least two samples");
    require(!psi.empty(), "need at least one test function");
    const int N = static_cast<int>(ensemble.front().rows());
    const int p = static_cast<int>(psi.size());
    std::vector<RVector> d(p, RVector(N));
    for (int j = 0; j < p; ++j)
        for (int i = 0; i < N; ++i) d[j](i) = psi[j]((i + 0.5) / N);
    double s1 = 0.0, s2 = 0.0;
    for (const CMatrix& M : ensemble) {
        require(M.rows() == N && M.cols() == N, "ensemble matrices differ in size");
        CMatrix P = M * d[0].cast<cplx>().asDiagonal();
        for (int j = 1; j < p; ++j) P = (P * M) * d[j].cast<cplx>().asDiagonal();
        const double v = P.trace().real() / N;
        s1 += v;
        s2 += v * v;
    }
    TraceCheck t;
    t.samples = static_cast<long>(ensemble.size());
    t.empirical = s1 / t.samples;
    t.std_error = std::sqrt(std::max(0.0, s2 / t.samples - t.empirical * t.empirical) / (t.samples - 1));
    t.prediction = loop_moment_density(g, psi, quadrature_points);
    return t;
}

} // namespace qssep
