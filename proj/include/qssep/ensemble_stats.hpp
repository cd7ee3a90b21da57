#pragma once

#include "qssep/gmatrix_sde.hpp"
#include "qssep/grid.hpp"
#include "qssep/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qssep {

struct CumulantEstimate {
    double value = 0.0;
    double std_error = 0.0;
    long samples = 0;
};

/// Snapshots of G with the trajectory each one came from (jackknife groups).
struct SampleEnsemble {
    int N = 0;
    std::vector<CMatrix> samples;
    std::vector<int> group;
};

struct SamplingPlan {
    int trajectories = 8;
    int snapshots = 100; // per trajectory
    double burn_in = -1.0; // < 0: 4 N^2
    double spacing = -1.0; // < 0: N^2 / 4
    int threads = 0; // 0: hardware concurrency
};

/// Runs plan.trajectories independent chains from default_initial_state,
/// discards the burn-in and records a snapshot every spacing time units.
SampleEnsemble sample_stationary(const ChainConfig& cfg, const SamplingPlan& plan);

/// G at time T for `trajectories` independent paths started from G0.
SampleEnsemble sample_at_time(const ChainConfig& cfg, const CMatrix& G0, double T, int trajectories, int threads = 0);

/// Runs fn(0..n-1) on a small worker pool. Each index is handled exactly once;
/// callers write results into slot i, so output never depends on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

/// Leave-one-group-out jackknife of estimator(sample means of the features).
/// features[k] is the feature vector of sample k; an empty `groups` makes every
/// sample its own group.
CumulantEstimate jackknife(const std::vector<std::vector<cplx>>& features, std::span<const int> groups,
                           const std::function<double(std::span<const cplx>)>& estimator);

/// Classical cumulant of the entries G(a_k, b_k) (1-based), real part.
CumulantEstimate estimate_cumulant(const SampleEnsemble& ens, const std::vector<std::pair<int, int>>& entries);

/// N^{p-1} K[G(i1,i2), G(i2,i3), ..., G(ip,i1)], p <= 5, at least 1000 samples.
CumulantEstimate estimate_loop_cumulant(const SampleEnsemble& ens, std::span<const int> loop);

/// True when every vertex has as many outgoing as incoming edges.
bool is_eulerian(const std::vector<std::pair<int, int>>& edges);

struct EulerianResult {
    bool eulerian = false;
    CumulantEstimate re;
    CumulantEstimate im;
};

/// Mean of prod_k G(i_k, j_k).
EulerianResult eulerian_test(const SampleEnsemble& ens, const std::vector<std::pair<int, int>>& edges);

/// Kolmogorov-Smirnov distance of the sample to Uniform[a, b].
double ks_uniform(std::vector<double> values, double a, double b);

struct StationarityResult {
    double ks = 0.0;
    std::vector<double> D;
};

/// N = 2 closed chain from G0 = diag(1,0); D_T = G(1,1) - G(2,2) against Uniform[-1,1].
StationarityResult haar_stationarity_test(const ChainConfig& cfg, int trajectories, double T, int threads = 0);

/// (1/N) log det(I + G (e^H - I)), H = diag(h(i/N)). Returns false when
/// 1 + lambda comes within `guard` of zero for an eigenvalue lambda of G(e^H - I)
/// or the determinant is not positive.
bool tr_log_observable(const CMatrix& G, const GridFunction& h, double& value, double guard = 1e-10);

struct SelfAveragingRow {
    int N = 0;
    double mean = 0.0;
    double std = 0.0;
    long used = 0;
    long rejected = 0;
    std::vector<double> values;
};

std::vector<SelfAveragingRow> self_averaging_test(const std::vector<SampleEnsemble>& ensembles, const GridFunction& h);

/// One line of the results table.
struct ResultRow {
    std::string estimator;
    int p = 0;
    std::vector<int> sites;
    CumulantEstimate estimate;
    int N = 0;
    double prediction = 0.0;
};

} // namespace qssep
