#include "qssep/variational.hpp"

#include "qssep/errors.hpp"
#include "qssep/freeprob.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace qssep {

namespace {

// 6-point Gauss-Legendre on [-1,1]: exact to degree 11
constexpr std::array<double, 6> kNode = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                                         0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
constexpr std::array<double, 6> kWeight = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                                           0.4679139345726910, 0.3607615730481386, 0.1713244923791704};

// forward-mode derivative in the moments m_1..m_P
struct Dual {
    double v = 0.0;
    std::array<double, kMaxSeriesOrder + 1> d{};
    Dual() = default;
    Dual(double x) : v(x) {}
    Dual& operator+=(const Dual& o) {
        v += o.v;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += o.d[i];
        return *this;
    }
    Dual& operator-=(const Dual& o) {
        v -= o.v;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] -= o.d[i];
        return *this;
    }
    friend Dual operator*(const Dual& a, const Dual& b) {
        Dual r(a.v * b.v);
        for (std::size_t i = 0; i < r.d.size(); ++i) r.d[i] = a.v * b.d[i] + a.d[i] * b.v;
        return r;
    }
};

void check_order(int P) {
    require(P >= 1 && P <= kMaxSeriesOrder, "series order must be between 1 and " + std::to_string(kMaxSeriesOrder));
}

double sign_coeff(int k) { return (k % 2 == 1 ? 1.0 : -1.0) / k; }

// A(x) = A_right[k] + a_k (r_k - x) on cell k
std::vector<double> ramp_right(const GridFunction& a) {
    const int M = a.size();
    std::vector<double> Ar(M, 0.0);
    for (int k = M - 2; k >= 0; --k) Ar[k] = Ar[k + 1] + a[k + 1] / M;
    return Ar;
}

struct RampIntegrals {
    std::vector<std::vector<double>> I; // I[n][k] = int_cell A^n
    std::vector<std::vector<double>> J; // J[n][k] = int_cell A^n (r_k - x)
};

RampIntegrals ramp_integrals(const GridFunction& a, int nmax, bool with_weight) {
    const int M = a.size();
    const double w = 1.0 / M;
    const std::vector<double> Ar = ramp_right(a);
    RampIntegrals out;
    out.I.assign(nmax + 1, std::vector<double>(M, 0.0));
    if (with_weight) out.J.assign(nmax + 1, std::vector<double>(M, 0.0));
    for (int k = 0; k < M; ++k)
        for (std::size_t q = 0; q < kNode.size(); ++q) {
            const double dist = 0.5 * w * (1.0 - kNode[q]); // r_k - x
            const double A = Ar[k] + a[k] * dist;
            const double wq = 0.5 * w * kWeight[q];
            double pw = 1.0;
            for (int n = 0; n <= nmax; ++n) {
                out.I[n][k] += wq * pw;
                if (with_weight) out.J[n][k] += wq * pw * dist;
                pw *= A;
            }
        }
    return out;
}

std::vector<double> series_terms(const GridFunction& a, int P) {
    const std::vector<double> kappa = free_cumulants_from_moments(ramp_moments(a, P));
    std::vector<double> t(P);
    for (int k = 1; k <= P; ++k) t[k - 1] = sign_coeff(k) * kappa[k];
    return t;
}

void check_decay(const std::vector<double>& t) {
    const int P = static_cast<int>(t.size());
    if (P < 3) return;
    double tmax = 0.0;
    for (double v : t) tmax = std::max(tmax, std::abs(v));
    if (tmax < 1e-14) return;
    const double tail = std::max(std::abs(t[P - 1]), std::abs(t[P - 2]));
    if (tail > 0.5 * tmax)
        throw DomainError("free-cumulant series does not decay (last terms " + std::to_string(tail) +
                          " vs largest " + std::to_string(tmax) + "); reduce |a|");
}

GridFunction negate(const GridFunction& a) {
    std::vector<double> v = a.values();
    for (double& x : v) x = -x;
    return GridFunction(std::move(v));
}

void check_same_grid(const GridFunction& a, const GridFunction& b) {
    require(a.size() == b.size(), "grid functions have different sizes");
}

} // namespace

std::vector<double> ramp_moments(const GridFunction& a, int P) {
    check_order(P);
    require(a.size() >= kMinGridPoints, "grid too coarse");
    const RampIntegrals r = ramp_integrals(a, P, false);
    std::vector<double> m(P + 1, 0.0);
    m[0] = 1.0;
    for (int n = 1; n <= P; ++n)
        for (double v : r.I[n]) m[n] += v;
    return m;
}

double f0_series(const GridFunction& a, int P, bool check) {
    const std::vector<double> t = series_terms(a, P);
    if (check) check_decay(t);
    double s = 0.0;
    for (double v : t) s += v;
    return s;
}

GridFunction f0_series_derivative(const GridFunction& a, int P) {
    check_order(P);
    const int M = a.size();
    require(M >= kMinGridPoints, "grid too coarse");
    const std::vector<double> m = ramp_moments(a, P);
    std::vector<Dual> md(P + 1);
    for (int n = 0; n <= P; ++n) md[n] = Dual(m[n]);
    for (int n = 1; n <= P; ++n) md[n].d[n] = 1.0;
    const std::vector<Dual> kappa = free_cumulants_from_moments(md);
    // c_n = dF~0/dm_n
    std::vector<double> c(P + 1, 0.0);
    for (int k = 1; k <= P; ++k)
        for (int n = 1; n <= P; ++n) c[n] += sign_coeff(k) * kappa[k].d[n];

    const RampIntegrals r = ramp_integrals(a, P - 1, true);
    std::vector<double> out(M, 0.0);
    for (int n = 1; n <= P; ++n) {
        if (c[n] == 0.0) continue;
        double left = 0.0; // int_0^{l_k} A^{n-1}
        for (int k = 0; k < M; ++k) {
            const double dm = n * (left / M + r.J[n - 1][k]);
            out[k] += M * c[n] * dm;
            left += r.I[n - 1][k];
        }
    }
    return GridFunction(std::move(out));
}

double QssepF0::value(const GridFunction& a) const { return -f0_series(negate(a), P_, false); }

GridFunction QssepF0::derivative(const GridFunction& a) const { return f0_series_derivative(negate(a), P_); }

std::vector<double> QssepF0::terms(const GridFunction& a) const {
    check_order(P_);
    const std::vector<double> kappa = free_cumulants_from_moments(ramp_moments(a, P_));
    std::vector<double> t(P_);
    for (int p = 1; p <= P_; ++p) t[p - 1] = kappa[p] / p;
    return t;
}

ConstantCumulantF0::ConstantCumulantF0(std::vector<double> kappa) : kappa_(std::move(kappa)) {
    require(kappa_.size() >= 2, "need at least kappa_1");
}

std::vector<double> ConstantCumulantF0::terms(const GridFunction& a) const {
    const double S = a.integral();
    std::vector<double> t;
    double pw = 1.0;
    for (std::size_t p = 1; p < kappa_.size(); ++p) {
        pw *= S;
        t.push_back(kappa_[p] * pw / p);
    }
    return t;
}

double ConstantCumulantF0::value(const GridFunction& a) const {
    double s = 0.0;
    for (double v : terms(a)) s += v;
    return s;
}

GridFunction ConstantCumulantF0::derivative(const GridFunction& a) const {
    const double S = a.integral();
    double d = 0.0, pw = 1.0;
    for (std::size_t p = 1; p < kappa_.size(); ++p) {
        d += kappa_[p] * pw;
        pw *= S;
    }
    return GridFunction::constant(d, a.size());
}

namespace {

GridFunction saddle_a(const GridFunction& h, double z, const GridFunction& b, double min_den) {
    std::vector<double> a(h.size());
    for (int m = 0; m < h.size(); ++m) {
        const double den = z - h[m] * b[m];
        if (std::abs(den) < min_den)
            throw DomainError("saddle singular: z - h b vanishes at x = " + std::to_string(h.x(m)));
        a[m] = h[m] / den;
    }
    return GridFunction(std::move(a));
}

GridFunction fssep_a(const GridFunction& eh1, const GridFunction& b, double min_den) {
    std::vector<double> a(eh1.size());
    for (int m = 0; m < eh1.size(); ++m) {
        const double den = 1.0 + b[m] * eh1[m];
        if (den < min_den) throw DomainError("1 + b (e^h - 1) is not positive at x = " + std::to_string(eh1.x(m)));
        a[m] = eh1[m] / den;
    }
    return GridFunction(std::move(a));
}

double max_diff(const GridFunction& u, const GridFunction& v) {
    double r = 0.0;
    for (int m = 0; m < u.size(); ++m) r = std::max(r, std::abs(u[m] - v[m]));
    return r;
}

// Damped iteration b <- b + theta (T(b) - b); theta halves when the residual grows.
template <class Map>
double damped_fixed_point(GridFunction& b, Map T, const SolverOptions& opt, int& iterations,
                          std::vector<double>* history) {
    double theta = opt.damping;
    GridFunction Tb = T(b);
    double res = max_diff(Tb, b);
    while (res > opt.tol) {
        if (iterations >= opt.max_iterations)
            throw ConvergenceError("saddle iteration did not converge; residual " + std::to_string(res));
        GridFunction trial = b;
        for (int m = 0; m < b.size(); ++m) trial[m] += theta * (Tb[m] - b[m]);
        ++iterations;
        GridFunction Tt;
        double rt;
        try {
            Tt = T(trial);
            rt = max_diff(Tt, trial);
        } catch (const DomainError&) {
            rt = INFINITY;
        }
        if (!(rt < 1.5 * res) && theta > 1.0 / 256) {
            theta *= 0.5;
            continue;
        }
        if (!std::isfinite(rt)) throw DomainError("saddle iteration left the domain");
        b = std::move(trial);
        Tb = std::move(Tt);
        res = rt;
        theta = std::min(opt.damping, theta * 1.25);
        if (history) history->push_back(res);
    }
    return res;
}

} // namespace

double saddle_value(const GridFunction& h, double z, const GridFunction& a, const GridFunction& b,
                    const SeriesFunctional& F0) {
    check_same_grid(h, a);
    check_same_grid(h, b);
    std::vector<double> v(h.size());
    for (int m = 0; m < h.size(); ++m) {
        const double arg = 1.0 - h[m] * b[m] / z;
        if (!(arg > 0)) throw DomainError("log argument 1 - h b / z is not positive");
        v[m] = std::log(arg) + a[m] * b[m];
    }
    return GridFunction(std::move(v)).integral() - F0.value(a);
}

SaddleSolution solve_saddle(const GridFunction& h, double z, const SeriesFunctional& F0, const SolverOptions& opt) {
    require(h.size() >= kMinGridPoints, "grid too coarse");
    require(std::isfinite(z) && z != 0.0, "z must be finite and nonzero");
    SaddleSolution s;
    s.b = F0.derivative(saddle_a(h, z, GridFunction::constant(0.0, h.size()), opt.min_denominator));
    auto T = [&](const GridFunction& b) { return F0.derivative(saddle_a(h, z, b, opt.min_denominator)); };
    s.residual = damped_fixed_point(s.b, T, opt, s.iterations, &s.residual_history);
    s.a = saddle_a(h, z, s.b, opt.min_denominator);
    s.residual = max_diff(F0.derivative(s.a), s.b);
    check_decay(F0.terms(s.a));
    s.value = saddle_value(h, z, s.a, s.b, F0);
    return s;
}

double fssep_functional(const GridFunction& h, const GridFunction& a, const GridFunction& b, int P) {
    check_same_grid(h, a);
    check_same_grid(h, b);
    std::vector<double> v(h.size());
    for (int m = 0; m < h.size(); ++m) {
        const double arg = 1.0 + b[m] * std::expm1(h[m]);
        if (!(arg > 0)) throw DomainError("log argument 1 + b (e^h - 1) is not positive");
        v[m] = std::log(arg) - a[m] * b[m];
    }
    return GridFunction(std::move(v)).integral() + f0_series(a, P, false);
}

FssepSolution f_ssep(const GridFunction& h, int P, const SolverOptions& opt) {
    check_order(P);
    require(h.size() >= kMinGridPoints, "grid too coarse");
    FssepSolution s;
    s.b = GridFunction::from([](double x) { return x; }, h.size());
    s.continuation_steps = std::max(1, static_cast<int>(std::ceil(h.max_abs() / 0.5)));
    for (int step = 1; step <= s.continuation_steps; ++step) {
        const double frac = static_cast<double>(step) / s.continuation_steps;
        std::vector<double> e(h.size());
        for (int m = 0; m < h.size(); ++m) e[m] = std::expm1(frac * h[m]);
        const GridFunction eh1(std::move(e));
        auto T = [&](const GridFunction& b) { return f0_series_derivative(fssep_a(eh1, b, opt.min_denominator), P); };
        damped_fixed_point(s.b, T, opt, s.iterations, nullptr);
        if (step == s.continuation_steps) {
            s.a = fssep_a(eh1, s.b, opt.min_denominator);
            s.residual = max_diff(f0_series_derivative(s.a, P), s.b);
        }
    }
    s.series_terms = series_terms(s.a, P);
    check_decay(s.series_terms);
    s.value = fssep_functional(h, s.a, s.b, P);
    return s;
}

} // namespace qssep
