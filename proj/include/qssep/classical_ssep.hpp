#pragma once

#include "qssep/types.hpp"

#include <Eigen/Sparse>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace qssep {

// Configurations use the Fock basis order: state index s has n_k = (s >> (N-k)) & 1
// for 1-based site k, so site 1 is the most significant bit.

inline constexpr int kMaxExactSites = 12;
inline constexpr int kMaxGillespieSites = 10000;

struct SsepRates {
    double alpha1 = 0.0;
    double beta1 = 0.0;
    double alphaN = 0.0;
    double betaN = 0.0;
};

struct SsepGenerator {
    int N = 0;
    SsepRates rates;
    /// Q(t, s) = rate of s -> t for t != s; Q(s, s) = -exit rate.
    Eigen::SparseMatrix<double> Q;
};

int ssep_occupation(std::uint32_t state, int N, int site);

SsepGenerator build_generator(int N, const SsepRates& rates);

/// Unique stationary law. Dense null-space solve for N <= 10, power iteration
/// on the uniformised chain above. Throws DegeneracyError when the chain has
/// more than one closed communicating class.
RVector stationary_distribution(const SsepGenerator& gen);

/// exp(t Q) p0 by uniformisation.
RVector propagate(const SsepGenerator& gen, const RVector& p0, double t);

/// log sum_n P(n) exp(sum_j h_j n_j) under the stationary law.
double cgf_exact(const SsepGenerator& gen, std::span<const double> h);
/// Same for an explicit law p.
double cgf_of(const RVector& p, int N, std::span<const double> h);

RVector occupation_profile(const RVector& p, int N);
RMatrix occupation_covariance(const RVector& p, int N);

struct SsepEvent {
    double t;
    int site; // 1-based
    int occupancy;
};

struct SsepTrajectory {
    int N = 0;
    std::vector<int> initial;
    std::vector<SsepEvent> events;
    std::vector<int> final_state;
    double T = 0.0;
};

/// Continuous-time SSEP with a binary sum tree over the N-1 edge clocks and
/// the two boundary clocks.
class GillespieSimulator {
public:
    GillespieSimulator(int N, const SsepRates& rates, std::uint64_t seed, std::vector<int> initial = {});

    /// Runs until time t_end. on_hold(t0, t1, state) is called for every
    /// interval on which the state is constant; on_event after each change.
    void advance(double t_end, const std::function<void(double, double, const std::vector<int>&)>& on_hold = {},
                 const std::function<void(const SsepEvent&)>& on_event = {});

    double time() const { return t_; }
    const std::vector<int>& state() const { return n_; }
    double total_rate() const { return tree_[1]; }

private:
    void set_leaf(int leaf, double rate);
    void refresh_edge(int e);
    void refresh_boundary();
    int sample_leaf(double u) const;

    int N_;
    SsepRates rates_;
    std::vector<int> n_;
    int leaves_ = 1;
    std::vector<double> tree_;
    double t_ = 0.0;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Records every occupation change in [0, T].
SsepTrajectory gillespie_run(int N, const SsepRates& rates, double T, std::uint64_t seed,
                             std::vector<int> initial = {});

} // namespace qssep
