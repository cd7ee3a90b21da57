#include "qssep/classical_ssep.hpp"

#include "qssep/errors.hpp"
#include "qssep/rng.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qssep {

int ssep_occupation(std::uint32_t state, int N, int site) { return static_cast<int>((state >> (N - site)) & 1u); }

SsepGenerator build_generator(int N, const SsepRates& r) {
    require(N >= 1, "need at least one site");
    if (N > kMaxExactSites) throw SizeLimitError("exact SSEP generator limited to N <= 12, got " + std::to_string(N));
    require(r.alpha1 >= 0 && r.beta1 >= 0 && r.alphaN >= 0 && r.betaN >= 0, "rates must be non-negative");
    const std::uint32_t S = 1u << N;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(S) * (N + 2));
    auto bit = [N](int site) { return 1u << (N - site); };
    for (std::uint32_t s = 0; s < S; ++s) {
        double out = 0.0;
        auto add = [&](std::uint32_t t, double rate) {
            if (rate <= 0.0) return;
            trip.emplace_back(t, s, rate);
            out += rate;
        };
        for (int k = 1; k < N; ++k)
            if (ssep_occupation(s, N, k) != ssep_occupation(s, N, k + 1)) add(s ^ bit(k) ^ bit(k + 1), 1.0);
        // left reservoir at site 1, right reservoir at site N
        add(s ^ bit(1), ssep_occupation(s, N, 1) ? r.beta1 : r.alpha1);
        add(s ^ bit(N), ssep_occupation(s, N, N) ? r.betaN : r.alphaN);
        trip.emplace_back(s, s, -out);
    }
    SsepGenerator g;
    g.N = N;
    g.rates = r;
    g.Q.resize(S, S);
    g.Q.setFromTriplets(trip.begin(), trip.end());
    return g;
}

namespace {

// number of closed communicating classes (Tarjan SCC on the rate graph)
int closed_classes(const Eigen::SparseMatrix<double>& Q) {
    const int S = static_cast<int>(Q.cols());
    std::vector<std::vector<int>> adj(S);
    for (int s = 0; s < S; ++s)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Q, s); it; ++it)
            if (it.row() != s && it.value() > 0) adj[s].push_back(static_cast<int>(it.row()));
    std::vector<int> index(S, -1), low(S, 0), comp(S, -1), stack;
    std::vector<bool> on(S, false);
    int counter = 0, ncomp = 0;
    // iterative Tarjan
    for (int root = 0; root < S; ++root) {
        if (index[root] >= 0) continue;
        std::vector<std::pair<int, std::size_t>> call{{root, 0}};
        index[root] = low[root] = counter++;
        stack.push_back(root);
        on[root] = true;
        while (!call.empty()) {
            auto& [v, i] = call.back();
            if (i < adj[v].size()) {
                const int w = adj[v][i++];
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on[w] = true;
                    call.emplace_back(w, 0);
                } else if (on[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
            } else {
                if (low[v] == index[v]) {
                    int w;
                    do {
                        w = stack.back();
                        stack.pop_back();
                        on[w] = false;
                        comp[w] = ncomp;
                    } while (w != v);
                    ++ncomp;
                }
                const int done = v;
                call.pop_back();
                if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
            }
        }
    }
    std::vector<bool> leaks(ncomp, false);
    for (int s = 0; s < S; ++s)
        for (int t : adj[s])
            if (comp[t] != comp[s]) leaks[comp[s]] = true;
    return static_cast<int>(std::count(leaks.begin(), leaks.end(), false));
}

} // namespace

RVector stationary_distribution(const SsepGenerator& gen) {
    const int S = static_cast<int>(gen.Q.cols());
    const int closed = closed_classes(gen.Q);
    if (closed != 1)
        throw DegeneracyError("SSEP chain has " + std::to_string(closed) + " closed classes; stationary law not unique");
    RVector p;
    if (gen.N <= 10) {
        RMatrix A = RMatrix(gen.Q);
        A.row(0).setOnes();
        RVector b = RVector::Zero(S);
        b(0) = 1.0;
        p = A.partialPivLu().solve(b);
    } else {
        double lam = 0.0;
        for (int s = 0; s < S; ++s) lam = std::max(lam, -gen.Q.coeff(s, s));
        lam *= 1.05;
        // start from the product measure with the exact linear profile
        const auto& r = gen.rates;
        const double ra = r.alpha1 + r.beta1, rb = r.alphaN + r.betaN;
        RVector prof = RVector::Constant(gen.N, 0.5);
        if (ra > 0 && rb > 0) {
            const double a = 1 / ra, b = 1 / rb, na = r.alpha1 * a, nb = r.alphaN * b;
            for (int i = 1; i <= gen.N; ++i)
                prof(i - 1) = std::clamp((na * (gen.N + b - i) + nb * (i - 1 + a)) / (gen.N - 1 + a + b), 0.05, 0.95);
        }
        p.resize(S);
        for (int s = 0; s < S; ++s) {
            double v = 1.0;
            for (int k = 1; k <= gen.N; ++k) v *= ssep_occupation(s, gen.N, k) ? prof(k - 1) : 1 - prof(k - 1);
            p(s) = v;
        }
        RVector q(S);
        bool converged = false;
        for (long it = 0; it < 5000000; ++it) {
            q = gen.Q * p;
            p += q / lam;
            if (it % 64 == 0) {
                p /= p.sum();
                if (q.lpNorm<1>() / lam < 1e-14) {
                    converged = true;
                    break;
                }
            }
        }
        if (!converged) throw ConvergenceError("power iteration for the stationary law did not converge");
    }
    p = p.cwiseMax(0.0);
    return p / p.sum();
}

RVector propagate(const SsepGenerator& gen, const RVector& p0, double t) {
    const int S = static_cast<int>(gen.Q.cols());
    require(p0.size() == S, "initial law has wrong size");
    require(t >= 0, "time must be non-negative");
    double lam = 0.0;
    for (int s = 0; s < S; ++s) lam = std::max(lam, -gen.Q.coeff(s, s));
    if (lam == 0.0 || t == 0.0) return p0;
    // sum_k Pois(k; lam t) P^k p0 with P = 1 + Q/lam, in blocks of unit Poisson mean
    const int chunks = static_cast<int>(std::ceil(lam * t / 30.0));
    const double mu = lam * t / chunks;
    RVector p = p0;
    for (int c = 0; c < chunks; ++c) {
        RVector term = p, acc = RVector::Zero(S);
        double w = std::exp(-mu), cum = 0.0;
        for (int k = 0; k < 10000; ++k) {
            acc += w * term;
            cum += w;
            if (1.0 - cum < 1e-17 && k > mu) break;
            term = term + gen.Q * term / lam;
            w *= mu / (k + 1);
        }
        p = acc;
    }
    return p;
}

double cgf_of(const RVector& p, int N, std::span<const double> h) {
    require(static_cast<int>(h.size()) == N, "need one field value per site");
    require(p.size() == (Eigen::Index{1} << N), "law has wrong size");
    double best = -INFINITY;
    std::vector<double> e(p.size());
    for (std::uint32_t s = 0; s < p.size(); ++s) {
        double v = 0.0;
        for (int k = 1; k <= N; ++k) v += h[k - 1] * ssep_occupation(s, N, k);
        e[s] = v;
        if (p(s) > 0) best = std::max(best, v);
    }
    double sum = 0.0;
    for (std::uint32_t s = 0; s < p.size(); ++s)
        if (p(s) > 0) sum += p(s) * std::exp(e[s] - best);
    return best + std::log(sum);
}

double cgf_exact(const SsepGenerator& gen, std::span<const double> h) {
    return cgf_of(stationary_distribution(gen), gen.N, h);
}

RVector occupation_profile(const RVector& p, int N) {
    RVector m = RVector::Zero(N);
    for (std::uint32_t s = 0; s < p.size(); ++s)
        for (int k = 1; k <= N; ++k) m(k - 1) += p(s) * ssep_occupation(s, N, k);
    return m;
}

RMatrix occupation_covariance(const RVector& p, int N) {
    RMatrix c = RMatrix::Zero(N, N);
    const RVector m = occupation_profile(p, N);
    for (std::uint32_t s = 0; s < p.size(); ++s)
        for (int i = 1; i <= N; ++i)
            if (ssep_occupation(s, N, i))
                for (int j = 1; j <= N; ++j)
                    if (ssep_occupation(s, N, j)) c(i - 1, j - 1) += p(s);
    return c - m * m.transpose();
}

GillespieSimulator::GillespieSimulator(int N, const SsepRates& rates, std::uint64_t seed, std::vector<int> initial)
    : N_(N), rates_(rates), key_(stream_key(seed, 0x55e9)) {
    require(N >= 1, "need at least one site");
    if (N > kMaxGillespieSites) throw SizeLimitError("Gillespie simulation limited to N <= 10^4");
    require(rates.alpha1 >= 0 && rates.beta1 >= 0 && rates.alphaN >= 0 && rates.betaN >= 0,
            "rates must be non-negative");
    if (initial.empty()) initial.assign(N, 0);
    require(static_cast<int>(initial.size()) == N, "initial state has wrong length");
    for (int v : initial) require(v == 0 || v == 1, "occupations must be 0 or 1");
    n_ = std::move(initial);
    const int L = std::max(N - 1, 0) + 2;
    while (leaves_ < L) leaves_ *= 2;
    tree_.assign(2 * leaves_, 0.0);
    for (int e = 0; e + 1 < N; ++e) refresh_edge(e);
    refresh_boundary();
}

void GillespieSimulator::set_leaf(int leaf, double rate) {
    int i = leaf + leaves_;
    tree_[i] = rate;
    for (i /= 2; i >= 1; i /= 2) tree_[i] = tree_[2 * i] + tree_[2 * i + 1];
}

void GillespieSimulator::refresh_edge(int e) {
    if (e < 0 || e + 1 >= N_) return;
    set_leaf(e, n_[e] != n_[e + 1] ? 1.0 : 0.0);
}

void GillespieSimulator::refresh_boundary() {
    const int b = std::max(N_ - 1, 0);
    set_leaf(b, n_[0] ? rates_.beta1 : rates_.alpha1);
    set_leaf(b + 1, n_[N_ - 1] ? rates_.betaN : rates_.alphaN);
}

int GillespieSimulator::sample_leaf(double u) const {
    int i = 1;
    while (i < leaves_) {
        if (u < tree_[2 * i] || tree_[2 * i + 1] <= 0.0) {
            i = 2 * i;
        } else {
            u -= tree_[2 * i];
            i = 2 * i + 1;
        }
    }
    return i - leaves_;
}

void GillespieSimulator::advance(double t_end, const std::function<void(double, double, const std::vector<int>&)>& on_hold,
                                 const std::function<void(const SsepEvent&)>& on_event) {
    auto uniform = [this]() { return (splitmix64(key_ + (counter_++) * 0x9e3779b97f4a7c15ULL) >> 11) * 0x1.0p-53; };
    const int b = std::max(N_ - 1, 0);
    while (t_ < t_end) {
        const double total = tree_[1];
        if (total <= 0.0) {
            if (on_hold) on_hold(t_, t_end, n_);
            t_ = t_end;
            break;
        }
        const double wait = -std::log1p(-uniform()) / total;
        if (t_ + wait >= t_end) {
            if (on_hold) on_hold(t_, t_end, n_);
            t_ = t_end;
            break;
        }
        if (on_hold) on_hold(t_, t_ + wait, n_);
        t_ += wait;
        const int leaf = sample_leaf(uniform() * total);
        if (leaf < b) {
            std::swap(n_[leaf], n_[leaf + 1]);
            refresh_edge(leaf - 1);
            refresh_edge(leaf);
            refresh_edge(leaf + 1);
            refresh_boundary();
            if (on_event) {
                on_event({t_, leaf + 1, n_[leaf]});
                on_event({t_, leaf + 2, n_[leaf + 1]});
            }
        } else {
            const int site = leaf == b ? 0 : N_ - 1;
            n_[site] ^= 1;
            refresh_edge(site - 1);
            refresh_edge(site);
            refresh_boundary();
            if (on_event) on_event({t_, site + 1, n_[site]});
        }
    }
}

SsepTrajectory gillespie_run(int N, const SsepRates& rates, double T, std::uint64_t seed, std::vector<int> initial) {
    GillespieSimulator sim(N, rates, seed, std::move(initial));
    SsepTrajectory out;
    out.N = N;
    out.T = T;
    out.initial = sim.state();
    sim.advance(T, {}, [&](const SsepEvent& e) { out.events.push_back(e); });
    out.final_state = sim.state();
    return out;
}

} // namespace qssep
