#pragma once

#include "qssep/grid.hpp"

#include <memory>
#include <vector>

namespace qssep {

inline constexpr int kMaxSeriesOrder = 8;

/// Truncated free-cumulant functional of a grid function a together with its
/// functional derivative (a grid function: M times the partial derivative in a_m).
class SeriesFunctional {
public:
    virtual ~SeriesFunctional() = default;
    virtual double value(const GridFunction& a) const = 0;
    virtual GridFunction derivative(const GridFunction& a) const = 0;
    /// Individual order-p contributions, p = 1..order.
    virtual std::vector<double> terms(const GridFunction& a) const = 0;
};

/// Moments m_n = int_0^1 A(x)^n dx of the piecewise-linear A(x) = int_x^1 a,
/// exact for piecewise-constant a (Gauss-Legendre per cell).
std::vector<double> ramp_moments(const GridFunction& a, int P);

/// F~0(a) = sum_{k=1}^P (-1)^{k+1}/k kappa_k(A), kappa_k the free cumulants of
/// x -> A(x) on ([0,1], dx). Throws DomainError when check_decay is set and the
/// last terms are not below half the largest term.
double f0_series(const GridFunction& a, int P = kMaxSeriesOrder, bool check_decay = true);
GridFunction f0_series_derivative(const GridFunction& a, int P = kMaxSeriesOrder);

/// QSSEP functional F0(a) = sum_p (1/p) int g_p prod a = sum_p (1/p) kappa_p(A) = -F~0(-a).
class QssepF0 : public SeriesFunctional {
public:
    explicit QssepF0(int P = kMaxSeriesOrder) : P_(P) {}
    double value(const GridFunction& a) const override;
    GridFunction derivative(const GridFunction& a) const override;
    std::vector<double> terms(const GridFunction& a) const override;

private:
    int P_;
};

/// Unstructured case g_p = kappa_p (constant): F0(a) = sum_p kappa_p (int a)^p / p.
class ConstantCumulantF0 : public SeriesFunctional {
public:
    explicit ConstantCumulantF0(std::vector<double> kappa); // kappa[0] unused
    double value(const GridFunction& a) const override;
    GridFunction derivative(const GridFunction& a) const override;
    std::vector<double> terms(const GridFunction& a) const override;

private:
    std::vector<double> kappa_;
};

struct SolverOptions {
    double tol = 1e-10;
    int max_iterations = 20000;
    double damping = 0.5;
    double min_denominator = 1e-8;
};

struct SaddleSolution {
    GridFunction a;
    GridFunction b;
    double value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    std::vector<double> residual_history;
};

/// Damped fixed point of a = h/(z - h b), b = dF0/da; returns
/// F(h;z) = int [log(1 - h b / z) + a b] - F0(a).
SaddleSolution solve_saddle(const GridFunction& h, double z, const SeriesFunctional& F0,
                            const SolverOptions& opt = {});

/// The saddle value for given (a, b) without solving.
double saddle_value(const GridFunction& h, double z, const GridFunction& a, const GridFunction& b,
                    const SeriesFunctional& F0);

struct FssepSolution {
    GridFunction a;
    GridFunction b;
    double value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    int continuation_steps = 1;
    std::vector<double> series_terms; // order-k terms of F~0 at the optimum
};

/// sup_{a,b} int [log(1 + b(e^h - 1)) - a b] + F~0(a) for reservoir densities
/// n_a = 0, n_b = 1. Stationarity: a = (e^h - 1)/(1 + b(e^h - 1)), b = dF~0/da.
/// Started from b = x; continuation in |h| when max|h| > 0.5.
FssepSolution f_ssep(const GridFunction& h, int P = kMaxSeriesOrder, const SolverOptions& opt = {});

/// The functional itself at given (a, b).
double fssep_functional(const GridFunction& h, const GridFunction& a, const GridFunction& b, int P = kMaxSeriesOrder);

} // namespace qssep
