#include "qssep/ensemble_stats.hpp"

#include "qssep/errors.hpp"
#include "qssep/freeprob.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

namespace qssep {

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr err;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&]() {
            for (int i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

namespace {

void check_physical(const CMatrix& G, double t) {
    for (Eigen::Index i = 0; i < G.rows(); ++i) {
        const double d = G(i, i).real();
        if (!std::isfinite(d) || d < -0.5 || d > 1.5)
            throw NumericalBlowup("G(" + std::to_string(i + 1) + "," + std::to_string(i + 1) +
                                  ") left the physical range at t = " + std::to_string(t));
    }
}

} // namespace

SampleEnsemble sample_stationary(const ChainConfig& cfg, const SamplingPlan& plan) {
    cfg.validate();
    require(plan.trajectories >= 1 && plan.snapshots >= 1, "need at least one trajectory and one snapshot");
    const double N2 = static_cast<double>(cfg.N) * cfg.N;
    const double burn = plan.burn_in < 0 ? 4.0 * N2 : plan.burn_in;
    const double spacing = plan.spacing < 0 ? N2 / 4.0 : plan.spacing;
    require(spacing > 0, "snapshot spacing must be positive");
    const long burn_steps = std::lround(burn / cfg.dt);
    const long gap = std::max(1L, std::lround(spacing / cfg.dt));

    SampleEnsemble ens;
    ens.N = cfg.N;
    ens.samples.resize(static_cast<std::size_t>(plan.trajectories) * plan.snapshots);
    ens.group.resize(ens.samples.size());
    parallel_for(plan.trajectories, plan.threads, [&](int tr) {
        GStepper stepper(cfg);
        ChainNoise noise(cfg, static_cast<std::uint64_t>(tr));
        CMatrix G = default_initial_state(cfg);
        for (long s = 0; s < burn_steps; ++s) stepper.step(G, noise.next());
        check_physical(G, burn);
        for (int k = 0; k < plan.snapshots; ++k) {
            for (long s = 0; s < gap; ++s) stepper.step(G, noise.next());
            check_physical(G, burn + (k + 1) * gap * cfg.dt);
            const std::size_t slot = static_cast<std::size_t>(tr) * plan.snapshots + k;
            ens.samples[slot] = G;
            ens.group[slot] = tr;
        }
    });
    return ens;
}

SampleEnsemble sample_at_time(const ChainConfig& cfg, const CMatrix& G0, double T, int trajectories, int threads) {
    cfg.validate();
    require(G0.rows() == cfg.N && G0.cols() == cfg.N, "G0 has wrong size");
    require(T >= 0 && trajectories >= 1, "need T >= 0 and at least one trajectory");
    const long steps = std::lround(T / cfg.dt);
    SampleEnsemble ens;
    ens.N = cfg.N;
    ens.samples.resize(trajectories);
    ens.group.resize(trajectories);
    parallel_for(trajectories, threads, [&](int tr) {
        GStepper stepper(cfg);
        ChainNoise noise(cfg, static_cast<std::uint64_t>(tr));
        CMatrix G = G0;
        for (long s = 0; s < steps; ++s) stepper.step(G, noise.next());
        check_physical(G, T);
        ens.samples[tr] = G;
        ens.group[tr] = tr;
    });
    return ens;
}

CumulantEstimate jackknife(const std::vector<std::vector<cplx>>& features, std::span<const int> groups,
                           const std::function<double(std::span<const cplx>)>& estimator) {
    const std::size_t n = features.size();
    require(n >= 2, "jackknife needs at least two samples");
    require(groups.empty() || groups.size() == n, "one group id per sample");
    const std::size_t F = features.front().size();
    std::map<int, std::size_t> index;
    if (!groups.empty())
        for (int g : groups) index.emplace(g, 0);
    std::size_t G = groups.empty() ? n : index.size();
    require(G >= 2, "jackknife needs at least two groups");
    if (!groups.empty()) {
        std::size_t k = 0;
        for (auto& kv : index) kv.second = k++;
    }
    std::vector<std::vector<cplx>> sums(G, std::vector<cplx>(F, 0.0));
    std::vector<long> counts(G, 0);
    std::vector<cplx> total(F, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
        require(features[s].size() == F, "feature vectors differ in length");
        const std::size_t g = groups.empty() ? s : index[groups[s]];
        for (std::size_t f = 0; f < F; ++f) {
            sums[g][f] += features[s][f];
            total[f] += features[s][f];
        }
        ++counts[g];
    }
    std::vector<cplx> mean(F);
    for (std::size_t f = 0; f < F; ++f) mean[f] = total[f] / static_cast<double>(n);
    CumulantEstimate out;
    out.value = estimator(mean);
    out.samples = static_cast<long>(n);
    std::vector<double> theta(G);
    for (std::size_t g = 0; g < G; ++g) {
        const double m = static_cast<double>(n - counts[g]);
        for (std::size_t f = 0; f < F; ++f) mean[f] = (total[f] - sums[g][f]) / m;
        theta[g] = estimator(mean);
    }
    const double avg = std::accumulate(theta.begin(), theta.end(), 0.0) / G;
    double ss = 0.0;
    for (double t : theta) ss += (t - avg) * (t - avg);
    out.std_error = std::sqrt(ss * (G - 1.0) / G);
    return out;
}

CumulantEstimate estimate_cumulant(const SampleEnsemble& ens, const std::vector<std::pair<int, int>>& entries) {
    const int p = static_cast<int>(entries.size());
    require(p >= 1 && p <= 5, "cumulant arity must be between 1 and 5");
    for (auto [a, b] : entries) require(a >= 1 && a <= ens.N && b >= 1 && b <= ens.N, "site index out of range");
    const int nmask = 1 << p;
    std::vector<std::vector<cplx>> feat(ens.samples.size(), std::vector<cplx>(nmask - 1));
    for (std::size_t s = 0; s < ens.samples.size(); ++s) {
        const CMatrix& G = ens.samples[s];
        for (int mask = 1; mask < nmask; ++mask) {
            cplx v = 1.0;
            for (int k = 0; k < p; ++k)
                if (mask >> k & 1) v *= G(entries[k].first - 1, entries[k].second - 1);
            feat[s][mask - 1] = v;
        }
    }
    std::vector<int> all(p);
    std::iota(all.begin(), all.end(), 0);
    auto est = [&](std::span<const cplx> means) {
        ComplexMomentFunctional phi = [&](std::span<const int> idx) {
            int mask = 0;
            for (int i : idx) mask |= 1 << i;
            return mask == 0 ? cplx(1.0) : means[mask - 1];
        };
        return classical_cumulant(phi, all).real();
    };
    return jackknife(feat, ens.group, est);
}

CumulantEstimate estimate_loop_cumulant(const SampleEnsemble& ens, std::span<const int> loop) {
    const int p = static_cast<int>(loop.size());
    require(p >= 1 && p <= 5, "loop length must be between 1 and 5");
    require(ens.samples.size() >= 1000, "loop cumulants need at least 1000 samples");
    for (int a = 0; a < p; ++a)
        for (int b = a + 1; b < p; ++b) require(loop[a] != loop[b], "loop sites must be distinct");
    std::vector<std::pair<int, int>> entries;
    for (int k = 0; k < p; ++k) entries.emplace_back(loop[k], loop[(k + 1) % p]);
    CumulantEstimate e = estimate_cumulant(ens, entries);
    const double scale = std::pow(static_cast<double>(ens.N), p - 1);
    e.value *= scale;
    e.std_error *= scale;
    return e;
}

bool is_eulerian(const std::vector<std::pair<int, int>>& edges) {
    std::map<int, int> balance;
    for (auto [a, b] : edges) {
        ++balance[a];
        --balance[b];
    }
    return std::all_of(balance.begin(), balance.end(), [](const auto& kv) { return kv.second == 0; });
}

EulerianResult eulerian_test(const SampleEnsemble& ens, const std::vector<std::pair<int, int>>& edges) {
    require(!edges.empty(), "need at least one edge");
    require(ens.samples.size() >= 1000, "Eulerian test needs at least 1000 samples");
    for (auto [a, b] : edges) require(a >= 1 && a <= ens.N && b >= 1 && b <= ens.N, "site index out of range");
    std::vector<std::vector<cplx>> feat(ens.samples.size(), std::vector<cplx>(1));
    for (std::size_t s = 0; s < ens.samples.size(); ++s) {
        cplx v = 1.0;
        for (auto [a, b] : edges) v *= ens.samples[s](a - 1, b - 1);
        feat[s][0] = v;
    }
    EulerianResult r;
    r.eulerian = is_eulerian(edges);
    r.re = jackknife(feat, ens.group, [](std::span<const cplx> m) { return m[0].real(); });
    r.im = jackknife(feat, ens.group, [](std::span<const cplx> m) { return m[0].imag(); });
    return r;
}

double ks_uniform(std::vector<double> values, double a, double b) {
    require(!values.empty(), "empty sample");
    require(b > a, "empty interval");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double F = std::clamp((values[k] - a) / (b - a), 0.0, 1.0);
        d = std::max({d, (k + 1) / n - F, F - k / n});
    }
    return d;
}

StationarityResult haar_stationarity_test(const ChainConfig& cfg, int trajectories, double T, int threads) {
    require(cfg.N == 2 && cfg.topology == Topology::Closed, "stationarity test runs on the closed N=2 chain");
    CMatrix G0 = CMatrix::Zero(2, 2);
    G0(0, 0) = 1.0;
    const SampleEnsemble ens = sample_at_time(cfg, G0, T, trajectories, threads);
    StationarityResult r;
    for (const CMatrix& G : ens.samples) r.D.push_back(G(0, 0).real() - G(1, 1).real());
    r.ks = ks_uniform(r.D, -1.0, 1.0);
    return r;
}

bool tr_log_observable(const CMatrix& G, const GridFunction& h, double& value, double guard) {
    const int N = static_cast<int>(G.rows());
    CMatrix M = G;
    for (int j = 0; j < N; ++j) M.col(j) *= std::expm1(h((j + 1.0) / N));
    const Eigen::ComplexEigenSolver<CMatrix> es(M, false);
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
        if (std::abs(1.0 + es.eigenvalues()(k)) < guard) return false;
    M.diagonal().array() += 1.0;
    const Eigen::PartialPivLU<CMatrix> lu(M);
    const cplx det = lu.determinant();
    if (!(det.real() > 0.0)) return false;
    double s = 0.0;
    const CMatrix& U = lu.matrixLU();
    for (int k = 0; k < N; ++k) s += std::log(std::abs(U(k, k)));
    value = s / N;
    return true;
}

std::vector<SelfAveragingRow> self_averaging_test(const std::vector<SampleEnsemble>& ensembles, const GridFunction& h) {
    std::vector<SelfAveragingRow> rows;
    for (const auto& ens : ensembles) {
        SelfAveragingRow r;
        r.N = ens.N;
        for (const CMatrix& G : ens.samples) {
            double v = 0.0;
            if (tr_log_observable(G, h, v)) r.values.push_back(v);
            else ++r.rejected;
        }
        r.used = static_cast<long>(r.values.size());
        require(r.used >= 2, "fewer than two usable samples at N = " + std::to_string(ens.N));
        r.mean = std::accumulate(r.values.begin(), r.values.end(), 0.0) / r.used;
        double ss = 0.0;
        for (double v : r.values) ss += (v - r.mean) * (v - r.mean);
        r.std = std::sqrt(ss / (r.used - 1));
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace qssep
