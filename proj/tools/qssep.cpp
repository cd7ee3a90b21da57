#include "qssep/classical_ssep.hpp"
#include "qssep/ensemble_stats.hpp"
#include "qssep/errors.hpp"
#include "qssep/fock_oracle.hpp"
#include "qssep/freeprob.hpp"
#include "qssep/gmatrix_sde.hpp"
#include "qssep/grid.hpp"
#include "qssep/haar_rmt.hpp"
#include "qssep/io.hpp"
#include "qssep/rng.hpp"
#include "qssep/variational.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace qssep;

namespace {

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// subsystem streams derived from the master seed
enum Stream : std::uint64_t { kHaarStream = 0x4841, kOracleStream = 0x4f52, kSsepStream = 0x5353 };

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        if (!cur.empty()) out.push_back(cur);
    return out;
}

std::vector<int> parse_ints(const std::string& s, const std::string& what) {
    std::vector<int> v;
    for (const std::string& t : split(s, ',')) {
        try {
            std::size_t pos = 0;
            v.push_back(std::stoi(t, &pos));
            if (pos != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw UsageError(what + ": '" + t + "' is not an integer");
        }
    }
    if (v.empty()) throw UsageError(what + ": empty list");
    return v;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> v;
    for (const std::string& t : split(s, ',')) {
        try {
            std::size_t pos = 0;
            v.push_back(std::stod(t, &pos));
            if (pos != t.size()) throw std::invalid_argument(t);
        } catch (const std::exception&) {
            throw UsageError(what + ": '" + t + "' is not a number");
        }
    }
    if (v.empty()) throw UsageError(what + ": empty list");
    return v;
}

/// bernoulli:p | uniform:a,b,K | atoms:x1,x2,...
SpectralMeasure parse_spectrum(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::vector<double> v =
        colon == std::string::npos ? std::vector<double>{} : parse_doubles(spec.substr(colon + 1), "--spectrum");
    if (kind == "bernoulli" && v.size() == 1) return SpectralMeasure::bernoulli(v[0]);
    if (kind == "uniform" && v.size() == 3 && v[2] >= 1) {
        std::vector<double> atoms;
        const int K = static_cast<int>(v[2]);
        for (int k = 0; k < K; ++k) atoms.push_back(v[0] + (v[1] - v[0]) * (k + 0.5) / K);
        return SpectralMeasure::uniform(atoms);
    }
    if (kind == "atoms" && !v.empty()) return SpectralMeasure::uniform(v);
    throw UsageError("--spectrum: expected bernoulli:p, uniform:a,b,K or atoms:x1,...; got '" + spec + "'");
}

RVector spectrum_diagonal(const SpectralMeasure& mu, int N) {
    RVector D(N);
    int at = 0;
    for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
        const int cnt = k + 1 == mu.atoms.size() ? N - at : static_cast<int>(std::lround(mu.weights[k] * N));
        for (int j = 0; j < cnt && at < N; ++j) D(at++) = mu.atoms[k];
    }
    return D;
}

struct Common {
    std::uint64_t seed = 1;
    std::string out = "qssep-out";
    int threads = 0;
};

struct ChainOpts {
    int n = 20;
    std::string topology = "open";
    double alpha1 = 0.0, beta1 = 1.0, alphaN = 1.0, betaN = 0.0;
    double dt = 0.01;

    ChainConfig config(std::uint64_t seed) const {
        ChainConfig c;
        c.N = n;
        c.topology = parse_topology(topology);
        c.alpha1 = alpha1;
        c.beta1 = beta1;
        c.alphaN = alphaN;
        c.betaN = betaN;
        c.dt = dt;
        c.seed = seed;
        c.validate();
        return c;
    }
};

struct EnsembleOpts {
    int trajectories = 8;
    int snapshots = 250;
    double burn_in = -1.0;
    double spacing = -1.0;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
    sub->add_option("--out", c.out, "output directory")->capture_default_str();
    sub->add_option("--threads", c.threads, "worker threads (0: all cores)")->capture_default_str();
}

void add_chain(CLI::App* sub, ChainOpts& c) {
    sub->add_option("--n", c.n, "number of sites")->capture_default_str();
    sub->add_option("--topology", c.topology, "open | closed | periodic")->capture_default_str();
    sub->add_option("--alpha1", c.alpha1, "injection rate at site 1")->capture_default_str();
    sub->add_option("--beta1", c.beta1, "extraction rate at site 1")->capture_default_str();
    sub->add_option("--alphaN", c.alphaN, "injection rate at site N")->capture_default_str();
    sub->add_option("--betaN", c.betaN, "extraction rate at site N")->capture_default_str();
    sub->add_option("--dt", c.dt, "time step")->capture_default_str();
}

void add_ensemble(CLI::App* sub, EnsembleOpts& e) {
    sub->add_option("--trajectories", e.trajectories, "independent trajectories")->capture_default_str();
    sub->add_option("--snapshots", e.snapshots, "snapshots per trajectory")->capture_default_str();
    sub->add_option("--burn-in", e.burn_in, "burn-in time (< 0: 4 N^2)")->capture_default_str();
    sub->add_option("--spacing", e.spacing, "time between snapshots (< 0: N^2 / 4)")->capture_default_str();
}

SamplingPlan plan_of(const EnsembleOpts& e, int threads) {
    SamplingPlan p;
    p.trajectories = e.trajectories;
    p.snapshots = e.snapshots;
    p.burn_in = e.burn_in;
    p.spacing = e.spacing;
    p.threads = threads;
    return p;
}

Json chain_json(const ChainConfig& c) {
    return {{"N", c.N},          {"topology", to_string(c.topology)}, {"alpha1", c.alpha1}, {"beta1", c.beta1},
            {"alphaN", c.alphaN}, {"betaN", c.betaN},                 {"dt", c.dt},         {"seed", c.seed}};
}

Json estimate_json(const CumulantEstimate& e) {
    return {{"value", e.value}, {"stderr", e.std_error}, {"samples", e.samples}};
}

// Effective options of a subcommand (output directory excluded so that
// manifests do not depend on where they are written).
Json command_json(const CLI::App* sub) {
    Json j;
    j["subcommand"] = sub->get_name();
    Json opts = Json::object();
    for (const CLI::Option* o : sub->get_options()) {
        const std::string name = o->get_name(false, true);
        if (name.empty() || name == "--help" || name == "--out") continue;
        const auto res = o->results();
        if (o->get_expected_max() == 0) opts[name.substr(2)] = o->count() > 0;
        else if (!res.empty()) opts[name.substr(2)] = res.size() == 1 ? Json(res[0]) : Json(res);
        else opts[name.substr(2)] = o->get_default_str();
    }
    j["options"] = opts;
    return j;
}

// ---------------------------------------------------------------- oracle

struct OracleOpts {
    Common common;
    ChainOpts chain{3, "open", 1.0, 0.3, 0.2, 1.0, 1e-4};
    double t = 1.0;
    double tol = 1e-3;
    std::string occupations = "1,0,1";
};

int cmd_oracle(const OracleOpts& o, const CLI::App* sub) {
    const ChainConfig cfg = o.chain.config(o.common.seed);
    if (cfg.N > kMaxFockSites) throw UsageError("--n: Fock checks need N <= " + std::to_string(kMaxFockSites));
    const std::vector<int> occ = parse_ints(o.occupations, "--occupations");
    if (static_cast<int>(occ.size()) != cfg.N) throw UsageError("--occupations: need one entry per site");
    ArtifactDir out(o.common.out);
    Json rep;
    rep["chain"] = chain_json(cfg);
    bool ok = true;

    const CouplingResult c = fock_g_coupling(cfg, occ, o.t, 0);
    rep["coupling"] = {{"T", o.t}, {"steps", c.steps}, {"max_diff", c.max_diff}, {"tolerance", o.tol},
                       {"pass", c.max_diff < o.tol}};
    ok &= c.max_diff < o.tol;

    SsepRates rates{cfg.topology == Topology::Open ? cfg.alpha1 : 0.0, cfg.topology == Topology::Open ? cfg.beta1 : 0.0,
                    cfg.topology == Topology::Open ? cfg.alphaN : 0.0, cfg.topology == Topology::Open ? cfg.betaN : 0.0};
    double gen_diff = NAN;
    if (cfg.topology != Topology::Periodic) {
        const RMatrix L = lindbladian_on_diagonal(cfg);
        const RMatrix Q = RMatrix(build_generator(cfg.N, rates).Q);
        gen_diff = (L - Q).cwiseAbs().maxCoeff();
        rep["generator"] = {{"max_diff", gen_diff}, {"pass", gen_diff < 1e-12}};
        ok &= gen_diff < 1e-12;
    }

    // Wick identities on the evolved state
    ChainNoise noise(cfg, 1);
    CMatrix rho = basis_state(cfg.N, occ);
    const long steps = std::lround(o.t / cfg.dt);
    for (long s = 0; s < steps; ++s)
        rho = cfg.topology == Topology::Open ? fock_open_step(rho, noise.next(), cfg)
                                             : evolve_density(rho, hamiltonian_increment_full(cfg.N, noise.next(), cfg.topology));
    validate_density(rho, 1e-9);
    double wick = 0.0;
    for (int mask = 1; mask < (1 << cfg.N); ++mask) {
        std::vector<int> sites;
        for (int k = 0; k < cfg.N; ++k)
            if (mask >> k & 1) sites.push_back(k + 1);
        const auto [direct, det] = wick_check(rho, sites);
        wick = std::max(wick, std::abs(direct - det));
    }
    CounterRng rng(o.common.seed, kOracleStream);
    std::normal_distribution<double> nd;
    CMatrix A(cfg.N, cfg.N);
    for (int i = 0; i < cfg.N; ++i)
        for (int j = 0; j < cfg.N; ++j) A(i, j) = cplx(nd(rng), nd(rng));
    A = 0.25 * (A + A.adjoint()).eval();
    const auto [tr, det] = exponential_trace_check(rho, A);
    rep["wick"] = {{"max_diff", wick}, {"exp_trace_diff", std::abs(tr - det)}, {"pass", wick < 1e-9 && std::abs(tr - det) < 1e-9}};
    ok &= wick < 1e-9 && std::abs(tr - det) < 1e-9;
    rep["pass"] = ok;
    out.write_json("oracle.json", rep);
    out.write_manifest(command_json(sub));
    std::cout << "oracle: coupling max diff " << format_double(c.max_diff);
    if (!std::isnan(gen_diff)) std::cout << ", generator diff " << format_double(gen_diff);
    std::cout << ", Wick diff " << format_double(wick) << (ok ? " (pass)" : " (FAIL)") << "\n";
    if (!ok) throw CheckFailed("oracle checks failed");
    return kOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
    Common common;
    ChainOpts chain;
    double t = 10.0;
    int snapshots = 10;
    int trajectories = 1;
};

int cmd_simulate(const SimulateOpts& o, const CLI::App* sub) {
    const ChainConfig cfg = o.chain.config(o.common.seed);
    if (o.snapshots < 1 || o.trajectories < 1) throw UsageError("--snapshots and --trajectories must be positive");
    if (!(o.t > 0)) throw UsageError("--t must be positive");
    std::vector<double> times;
    for (int k = 1; k <= o.snapshots; ++k) times.push_back(o.t * k / o.snapshots);
    std::vector<Trajectory> trs(o.trajectories);
    parallel_for(o.trajectories, o.common.threads, [&](int tr) {
        trs[tr] = run_trajectory(cfg, default_initial_state(cfg), o.t, times, static_cast<std::uint64_t>(tr));
    });
    ArtifactDir out(o.common.out);
    out.write("snapshots.csv", snapshots_csv(trs));
    Json rep;
    rep["chain"] = chain_json(cfg);
    rep["T"] = o.t;
    Json prof = Json::array();
    for (int i = 0; i < cfg.N; ++i) {
        double s = 0.0;
        for (const Trajectory& t : trs) s += t.snapshots.back()(i, i).real();
        prof.push_back(s / o.trajectories);
    }
    rep["final_mean_profile"] = prof;
    out.write_json("summary.json", rep);
    out.write_manifest(command_json(sub));
    std::cout << "simulate: " << o.trajectories << " trajectories of N = " << cfg.N << " to t = " << o.t << "\n";
    return kOk;
}

// ---------------------------------------------------------------- stationary-test

struct StationaryOpts {
    Common common;
    int n = 2;
    int trajectories = 5000;
    std::vector<double> t{10.0};
    double dt = 1e-3;
    int bins = 40;
};

int cmd_stationary(const StationaryOpts& o, const CLI::App* sub) {
    if (o.n != 2) throw UsageError("--n: the stationarity test runs on the N = 2 closed chain");
    if (o.bins < 1) throw UsageError("--bins must be positive");
    ChainConfig cfg;
    cfg.N = 2;
    cfg.topology = Topology::Closed;
    cfg.dt = o.dt;
    cfg.seed = o.common.seed;
    cfg.validate();
    ArtifactDir out(o.common.out);
    Json rep;
    rep["chain"] = chain_json(cfg);
    rep["trajectories"] = o.trajectories;
    rep["runs"] = Json::array();
    for (std::size_t k = 0; k < o.t.size(); ++k) {
        const StationarityResult r = haar_stationarity_test(cfg, o.trajectories, o.t[k], o.common.threads);
        const Histogram h = Histogram::of(r.D, -1.0, 1.0, o.bins);
        const std::string tag = o.t.size() == 1 ? "" : "_" + std::to_string(k);
        out.write("histogram" + tag + ".csv", histogram_csv(h));
        SvgPlot plot("D_t = G11 - G22 at t = " + format_double(o.t[k]), "D", "density");
        std::vector<double> l, rgt, dens;
        for (int b = 0; b < o.bins; ++b) {
            l.push_back(h.bin_left(b));
            rgt.push_back(h.bin_right(b));
            dens.push_back(h.mass[b] / (h.bin_right(b) - h.bin_left(b)));
        }
        plot.add_bars(l, rgt, dens);
        plot.add_line({-1.0, 1.0}, {0.5, 0.5});
        out.write("histogram" + tag + ".svg", plot.render());
        rep["runs"].push_back({{"t", o.t[k]}, {"ks", r.ks}});
        std::cout << "stationary-test: t = " << format_double(o.t[k]) << "  KS = " << format_double(r.ks) << "\n";
    }
    out.write_json("stationary.json", rep);
    out.write_manifest(command_json(sub));
    return kOk;
}

// ---------------------------------------------------------------- loop-cumulants

struct LoopOpts {
    Common common;
    ChainOpts chain;
    EnsembleOpts ens;
    int p = 0;
    std::vector<std::string> sites;
    std::string mean_sites;
};

double loop_prediction(const std::vector<int>& sites, int N) {
    std::vector<double> x;
    for (int i : sites) x.push_back(static_cast<double>(i) / (N + 1));
    return indicator_free_cumulant(x);
}

int cmd_loop(const LoopOpts& o, const CLI::App* sub) {
    const ChainConfig cfg = o.chain.config(o.common.seed);
    if (cfg.topology != Topology::Open || cfg.n_a() != 0.0 || cfg.n_b() != 1.0)
        throw UsageError("--topology/--alpha1/...: g_p predictions need an open chain with n_a = 0, n_b = 1");
    if (o.sites.empty() && o.mean_sites.empty()) throw UsageError("--sites: give at least one loop or --mean-sites");
    std::vector<std::vector<int>> loops;
    for (const std::string& s : o.sites) {
        std::vector<int> l = parse_ints(s, "--sites");
        if (o.p > 0 && static_cast<int>(l.size()) != o.p)
            throw UsageError("--sites: loop '" + s + "' has " + std::to_string(l.size()) + " sites but --p is " +
                             std::to_string(o.p));
        for (int i : l)
            if (i < 1 || i > cfg.N) throw UsageError("--sites: site " + std::to_string(i) + " out of range");
        loops.push_back(l);
    }
    const std::vector<int> means = o.mean_sites.empty() ? std::vector<int>{} : parse_ints(o.mean_sites, "--mean-sites");
    const SampleEnsemble ens = sample_stationary(cfg, plan_of(o.ens, o.common.threads));
    std::vector<ResultRow> rows;
    for (int i : means) {
        ResultRow r;
        r.estimator = "mean";
        r.p = 1;
        r.sites = {i};
        r.estimate = estimate_cumulant(ens, {{i, i}});
        r.N = cfg.N;
        r.prediction = static_cast<double>(i) / (cfg.N + 1);
        rows.push_back(r);
    }
    for (const auto& l : loops) {
        ResultRow r;
        r.estimator = "loop";
        r.p = static_cast<int>(l.size());
        r.sites = l;
        r.estimate = estimate_loop_cumulant(ens, l);
        r.N = cfg.N;
        r.prediction = loop_prediction(l, cfg.N);
        rows.push_back(r);
    }
    ArtifactDir out(o.common.out);
    out.write("results.csv", results_csv(rows));
    Json rep;
    rep["chain"] = chain_json(cfg);
    rep["samples"] = ens.samples.size();
    rep["rows"] = Json::array();
    for (const ResultRow& r : rows) {
        const double z = r.estimate.std_error > 0 ? (r.estimate.value - r.prediction) / r.estimate.std_error : 0.0;
        rep["rows"].push_back({{"estimator", r.estimator}, {"sites", r.sites}, {"estimate", estimate_json(r.estimate)},
                               {"prediction", r.prediction}, {"z_score", z}});
        std::cout << r.estimator << " [";
        for (std::size_t k = 0; k < r.sites.size(); ++k) std::cout << (k ? "," : "") << r.sites[k];
        std::cout << "]  " << format_double(r.estimate.value) << " +- " << format_double(r.estimate.std_error)
                  << "  prediction " << format_double(r.prediction) << "\n";
    }
    out.write_json("summary.json", rep);
    out.write_manifest(command_json(sub));
    return kOk;
}

// ---------------------------------------------------------------- eulerian-test

struct EulerOpts {
    Common common;
    ChainOpts chain;
    EnsembleOpts ens;
    std::vector<std::string> edges;
};

std::vector<std::pair<int, int>> parse_edges(const std::string& s, int N) {
    std::vector<std::pair<int, int>> e;
    for (const std::string& t : split(s, ',')) {
        const auto dash = t.find('-');
        if (dash == std::string::npos) throw UsageError("--edges: expected i-j, got '" + t + "'");
        const int a = parse_ints(t.substr(0, dash), "--edges")[0], b = parse_ints(t.substr(dash + 1), "--edges")[0];
        if (a < 1 || a > N || b < 1 || b > N) throw UsageError("--edges: site out of range in '" + t + "'");
        e.emplace_back(a, b);
    }
    if (e.empty()) throw UsageError("--edges: empty edge list");
    return e;
}

int cmd_euler(const EulerOpts& o, const CLI::App* sub) {
    const ChainConfig cfg = o.chain.config(o.common.seed);
    if (o.edges.empty()) throw UsageError("--edges: give at least one edge list such as 1-2,2-1");
    std::vector<std::vector<std::pair<int, int>>> sets;
    for (const std::string& s : o.edges) sets.push_back(parse_edges(s, cfg.N));
    const SampleEnsemble ens = sample_stationary(cfg, plan_of(o.ens, o.common.threads));
    std::ostringstream csv;
    csv << "edges,eulerian,re,re_stderr,im,im_stderr,samples,N\n";
    Json rep;
    rep["chain"] = chain_json(cfg);
    rep["tests"] = Json::array();
    for (std::size_t k = 0; k < sets.size(); ++k) {
        const EulerianResult r = eulerian_test(ens, sets[k]);
        std::string label;
        for (std::size_t e = 0; e < sets[k].size(); ++e)
            label += (e ? ";" : "") + std::to_string(sets[k][e].first) + "-" + std::to_string(sets[k][e].second);
        csv << label << ',' << (r.eulerian ? 1 : 0) << ',' << format_double(r.re.value) << ','
            << format_double(r.re.std_error) << ',' << format_double(r.im.value) << ',' << format_double(r.im.std_error)
            << ',' << r.re.samples << ',' << cfg.N << '\n';
        const bool vanishes = std::abs(r.re.value) < 3 * r.re.std_error && std::abs(r.im.value) < 3 * r.im.std_error;
        rep["tests"].push_back({{"edges", label},
                                {"eulerian", r.eulerian},
                                {"re", estimate_json(r.re)},
                                {"im", estimate_json(r.im)},
                                {"mean_within_3se_of_zero", vanishes}});
        std::cout << label << (r.eulerian ? "  eulerian" : "  non-eulerian") << "  mean = " << format_double(r.re.value)
                  << " + " << format_double(r.im.value) << "i  (se " << format_double(r.re.std_error) << ")\n";
    }
    ArtifactDir out(o.common.out);
    out.write("eulerian.csv", csv.str());
    out.write_json("summary.json", rep);
    out.write_manifest(command_json(sub));
    return kOk;
}

// ---------------------------------------------------------------- self-averaging

struct SelfAvgOpts {
    Common common;
    ChainOpts chain;
    EnsembleOpts ens{10, 50, -1.0, -1.0};
    std::string sizes = "20,40";
    std::string h = "linear:0,1";
    int grid = 200;
};

int cmd_selfavg(const SelfAvgOpts& o, const CLI::App* sub) {
    const std::vector<int> sizes = parse_ints(o.sizes, "--sizes");
    const GridFunction h = parse_grid_function(o.h, o.grid);
    std::vector<SampleEnsemble> ens;
    Json rep;
    for (int N : sizes) {
        ChainOpts c = o.chain;
        c.n = N;
        ens.push_back(sample_stationary(c.config(o.common.seed), plan_of(o.ens, o.common.threads)));
    }
    const std::vector<SelfAveragingRow> rows = self_averaging_test(ens, h);
    std::vector<std::vector<double>> table;
    rep["h"] = o.h;
    rep["rows"] = Json::array();
    for (const auto& r : rows) {
        table.push_back({double(r.N), r.mean, r.std, double(r.used), double(r.rejected)});
        rep["rows"].push_back({{"N", r.N}, {"mean", r.mean}, {"std", r.std}, {"used", r.used}, {"rejected", r.rejected}});
        std::cout << "N = " << r.N << "  mean = " << format_double(r.mean) << "  std = " << format_double(r.std)
                  << "  (" << r.used << " used, " << r.rejected << " rejected)\n";
    }
    if (rows.size() >= 2) rep["std_ratio_last_over_first"] = rows.back().std / rows.front().std;
    ArtifactDir out(o.common.out);
    out.write("self_averaging.csv", table_csv({"N", "mean", "std", "used", "rejected"}, table));
    out.write_json("summary.json", rep);
    out.write_manifest(command_json(sub));
    return kOk;
}

// ---------------------------------------------------------------- haar

struct HaarOpts {
    Common common;
    std::string mode = "submatrix";
    int n = 400;
    std::string spectrum = "bernoulli:0.5";
    int samples = 20;
    double ell = 0.5;
    int bins = 50;
    int grid_points = 2001;
    double a = 1.0;
    double z = 0.5;
    int order = 6;
};

int cmd_haar(const HaarOpts& o, const CLI::App* sub) {
    const SpectralMeasure mu = parse_spectrum(o.spectrum);
    mu.validate();
    if (o.n < 2 || o.samples < 2) throw UsageError("--n and --samples must be at least 2");
    CounterRng rng(o.common.seed, kHaarStream);
    ArtifactDir out(o.common.out);
    Json rep;
    rep["spectrum"] = o.spectrum;
    rep["N"] = o.n;
    rep["mode"] = o.mode;
    if (o.mode == "orbit") {
        const RVector D = spectrum_diagonal(mu, o.n);
        RVector sorted = D;
        std::sort(sorted.data(), sorted.data() + sorted.size());
        double worst = 0.0, herm = 0.0;
        std::vector<double> diag;
        for (int s = 0; s < o.samples; ++s) {
            const CMatrix M = orbit_sample(D, rng);
            herm = std::max(herm, (M - M.adjoint()).cwiseAbs().maxCoeff());
            const RVector ev = Eigen::SelfAdjointEigenSolver<CMatrix>(M, Eigen::EigenvaluesOnly).eigenvalues();
            worst = std::max(worst, (ev - sorted).cwiseAbs().maxCoeff());
            for (int i = 0; i < o.n; ++i) diag.push_back(M(i, i).real());
        }
        const double lo = *std::min_element(diag.begin(), diag.end()), hi = *std::max_element(diag.begin(), diag.end());
        out.write("diagonal_histogram.csv", histogram_csv(Histogram::of(diag, lo, hi + 1e-12, o.bins)));
        rep["max_spectrum_deviation"] = worst;
        rep["max_hermiticity_defect"] = herm;
        rep["mean_diagonal"] = std::accumulate(diag.begin(), diag.end(), 0.0) / diag.size();
        rep["kappa1"] = mu.moment(1);
        std::cout << "haar orbit: spectrum deviation " << format_double(worst) << "\n";
        if (worst > 1e-9) throw CheckFailed("orbit samples do not preserve the spectrum");
    } else if (o.mode == "submatrix") {
        const CompressionResult pred = free_compression_predict(mu, o.ell, o.grid_points);
        const RVector D = spectrum_diagonal(mu, o.n);
        std::vector<double> ev;
        for (int s = 0; s < o.samples; ++s) {
            const RVector e = principal_submatrix_spectrum(orbit_sample(D, rng), o.ell);
            ev.insert(ev.end(), e.data(), e.data() + e.size());
        }
        const double ks = kolmogorov_distance(ev, [&](double x) { return pred.submatrix_cdf(x); });
        double lo = *std::min_element(ev.begin(), ev.end()), hi = *std::max_element(ev.begin(), ev.end());
        const double pad = 0.05 * (hi - lo + 1e-9);
        lo -= pad;
        hi += pad;
        const Histogram h = Histogram::of(ev, lo, hi, o.bins);
        out.write("submatrix_histogram.csv", histogram_csv(h));
        std::vector<std::vector<double>> table;
        std::vector<double> px, py;
        for (std::size_t k = 0; k < pred.E.size(); ++k) {
            const double lam = o.ell * pred.E[k];
            table.push_back({lam, pred.density[k] / o.ell, pred.cdf[k]});
            px.push_back(lam);
            py.push_back(pred.density[k] / o.ell);
        }
        out.write("submatrix_prediction.csv", table_csv({"lambda", "density", "cdf"}, table));
        SvgPlot plot("principal submatrix spectrum, ell = " + format_double(o.ell), "lambda", "density");
        std::vector<double> l, r, d;
        for (int b = 0; b < o.bins; ++b) {
            l.push_back(h.bin_left(b));
            r.push_back(h.bin_right(b));
            d.push_back(h.mass[b] / (h.bin_right(b) - h.bin_left(b)));
        }
        plot.add_bars(l, r, d);
        std::vector<double> cx, cy;
        for (std::size_t k = 0; k < px.size(); ++k)
            if (px[k] >= lo && px[k] <= hi) {
                cx.push_back(px[k]);
                cy.push_back(py[k]);
            }
        plot.add_line(cx, cy);
        out.write("submatrix.svg", plot.render());
        rep["ell"] = o.ell;
        rep["samples"] = o.samples;
        rep["kolmogorov_distance"] = ks;
        rep["solver"] = {{"mass", pred.mass},
                         {"max_residual", pred.max_residual},
                         {"newton_iterations", pred.newton_iterations},
                         {"etas", pred.etas}};
        std::cout << "haar submatrix: KS distance " << format_double(ks) << "\n";
    } else if (o.mode == "hciz") {
        const HcizResult r = hciz_series_check(mu, o.a, o.z, o.n, o.samples, rng, o.order);
        rep["a"] = o.a;
        rep["z"] = o.z;
        rep["monte_carlo"] = r.monte_carlo;
        rep["monte_carlo_se"] = r.monte_carlo_se;
        rep["series"] = r.series;
        rep["terms"] = r.terms;
        rep["budget"] = r.budget;
        rep["within_budget"] = r.within_budget;
        std::cout << "haar hciz: Monte Carlo " << format_double(r.monte_carlo) << " vs series " << format_double(r.series)
                  << " (budget " << format_double(r.budget) << ")\n";
    } else {
        throw UsageError("--mode: expected orbit, submatrix or hciz");
    }
    out.write_json("haar.json", rep);
    out.write_manifest(command_json(sub));
    return kOk;
}

// ---------------------------------------------------------------- traces

struct TracesOpts {
    Common common;
    int n = 200;
    int samples = 200;
    std::string spectrum = "bernoulli:0.5";
    std::vector<std::string> psi;
    int quadrature = 200;
};

int cmd_traces(const TracesOpts& o, const CLI::App* sub) {
    if (o.psi.empty()) throw UsageError("--psi: give one profile per diagonal matrix");
    if (o.psi.size() > static_cast<std::size_t>(kMaxCumulantArity)) throw UsageError("--psi: too many profiles");
    const SpectralMeasure mu = parse_spectrum(o.spectrum);
    mu.validate();
    std::vector<std::function<double(double)>> psi;
    for (const std::string& s : o.psi) psi.push_back(parse_profile(s));
    CounterRng rng(o.common.seed, kHaarStream);
    const RVector D = spectrum_diagonal(mu, o.n);
    std::vector<CMatrix> ens;
    for (int s = 0; s < o.samples; ++s) ens.push_back(orbit_sample(D, rng));
    const int p = static_cast<int>(psi.size());
    const TraceCheck t = structured_trace_check(ens, psi, constant_cumulants(mu.free_cumulants(p)), o.quadrature);
    ArtifactDir out(o.common.out);
    out.write("traces.csv", table_csv({"p", "empirical", "stderr", "prediction", "samples", "N"},
                                      {{double(p), t.empirical, t.std_error, t.prediction, double(t.samples), double(o.n)}}));
    out.write_json("traces.json", {{"p", p},
                                   {"psi", o.psi},
                                   {"empirical", t.empirical},
                                   {"stderr", t.std_error},
                                   {"prediction", t.prediction},
                                   {"within_3se", std::abs(t.empirical - t.prediction) <= 3 * t.std_error}});
    out.write_manifest(command_json(sub));
    std::cout << "traces: p = " << p << "  empirical " << format_double(t.empirical) << " +- "
              << format_double(t.std_error) << "  prediction " << format_double(t.prediction) << "\n";
    return kOk;
}

// ---------------------------------------------------------------- saddle / fssep

struct SaddleOpts {
    Common common;
    std::string h = "linear:0.5,0.5";
    double z = 3.0;
    int grid = 200;
    int order = kMaxSeriesOrder;
    std::string model = "qssep";
    std::string spectrum = "bernoulli:0.5";
    double tol = 1e-10;
};

int cmd_saddle(const SaddleOpts& o, const CLI::App* sub) {
    const GridFunction h = parse_grid_function(o.h, o.grid);
    std::unique_ptr<SeriesFunctional> F0;
    if (o.model == "qssep") F0 = std::make_unique<QssepF0>(o.order);
    else if (o.model == "haar") F0 = std::make_unique<ConstantCumulantF0>(parse_spectrum(o.spectrum).free_cumulants(o.order));
    else throw UsageError("--model: expected qssep or haar");
    SolverOptions opt;
    opt.tol = o.tol;
    const SaddleSolution s = solve_saddle(h, o.z, *F0, opt);
    ArtifactDir out(o.common.out);
    out.write("profile.csv", profile_csv(s.a, s.b));
    Json rep;
    rep["inputs"] = {{"h", o.h}, {"z", o.z}, {"grid", o.grid}, {"model", o.model}};
    if (o.model == "haar") rep["inputs"]["spectrum"] = o.spectrum;
    rep["truncation_order"] = o.order;
    rep["iterations"] = s.iterations;
    rep["residual"] = s.residual;
    rep["value"] = s.value;
    out.write_json("saddle.json", rep);
    out.write_manifest(command_json(sub));
    std::cout << "saddle: F(h; z) = " << format_double(s.value) << "  residual " << format_double(s.residual) << "  ("
              << s.iterations << " iterations)\n";
    if (!(s.residual < 1e-8)) throw CheckFailed("saddle residual above 1e-8");
    return kOk;
}

struct FssepOpts {
    Common common;
    std::string h = "const:1";
    int grid = 200;
    int order = kMaxSeriesOrder;
    double tol = 1e-10;
    bool compare = false;
    std::string sizes = "8,10,12";
};

// polynomial in 1/N through the points, evaluated at 1/N = 0
double extrapolate(const std::vector<int>& sizes, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        double w = 1.0;
        for (std::size_t j = 0; j < sizes.size(); ++j)
            if (j != i) {
                const double ui = 1.0 / sizes[i], uj = 1.0 / sizes[j];
                w *= (0.0 - uj) / (ui - uj);
            }
        s += w * f[i];
    }
    return s;
}

int cmd_fssep(const FssepOpts& o, const CLI::App* sub) {
    const GridFunction h = parse_grid_function(o.h, o.grid);
    SolverOptions opt;
    opt.tol = o.tol;
    const FssepSolution s = f_ssep(h, o.order, opt);
    ArtifactDir out(o.common.out);
    out.write("profile.csv", profile_csv(s.a, s.b));
    Json rep;
    rep["inputs"] = {{"h", o.h}, {"grid", o.grid}, {"reservoirs", {{"n_a", 0.0}, {"n_b", 1.0}}}};
    rep["truncation_order"] = o.order;
    rep["iterations"] = s.iterations;
    rep["continuation_steps"] = s.continuation_steps;
    rep["residual"] = s.residual;
    rep["series_terms"] = s.series_terms;
    rep["value"] = s.value;
    std::cout << "fssep: F(h) = " << format_double(s.value) << "  residual " << format_double(s.residual) << "\n";
    if (o.compare) {
        const std::vector<int> sizes = parse_ints(o.sizes, "--sizes");
        std::vector<double> f;
        Json rows = Json::array();
        for (int N : sizes) {
            if (N < 2 || N > kMaxExactSites) throw UsageError("--sizes: exact solves need 2 <= N <= 12");
            std::vector<double> hv(N);
            for (int i = 0; i < N; ++i) hv[i] = parse_profile(o.h)(static_cast<double>(i + 1) / (N + 1));
            const double v = cgf_exact(build_generator(N, {0.0, 1.0, 1.0, 0.0}), hv) / N;
            f.push_back(v);
            rows.push_back({{"N", N}, {"cgf_over_N", v}});
        }
        const double ext = extrapolate(sizes, f);
        rep["exact_ssep"] = {{"sizes", rows}, {"extrapolated", ext}, {"relative_difference", std::abs(s.value - ext) / std::max(std::abs(ext), 1e-300)}};
        std::cout << "fssep: 1/N-extrapolated exact SSEP " << format_double(ext) << "\n";
    }
    out.write_json("fssep.json", rep);
    out.write_manifest(command_json(sub));
    if (!(s.residual < 1e-8)) throw CheckFailed("saddle residual above 1e-8");
    return kOk;
}

// ---------------------------------------------------------------- ssep

struct SsepOpts {
    Common common;
    int n = 8;
    double alpha1 = 0.0, beta1 = 1.0, alphaN = 1.0, betaN = 0.0;
    std::string mode = "exact";
    double t = 100.0;
    std::string h;
};

int cmd_ssep(const SsepOpts& o, const CLI::App* sub) {
    const SsepRates rates{o.alpha1, o.beta1, o.alphaN, o.betaN};
    ArtifactDir out(o.common.out);
    Json rep;
    rep["N"] = o.n;
    rep["rates"] = {{"alpha1", o.alpha1}, {"beta1", o.beta1}, {"alphaN", o.alphaN}, {"betaN", o.betaN}};
    if (o.mode == "exact") {
        if (o.n < 1 || o.n > kMaxExactSites) throw UsageError("--n: exact mode needs 1 <= N <= 12");
        const SsepGenerator gen = build_generator(o.n, rates);
        const RVector p = stationary_distribution(gen);
        const RVector rho = occupation_profile(p, o.n);
        const RMatrix C = occupation_covariance(p, o.n);
        std::vector<std::vector<double>> prof, cov;
        for (int i = 0; i < o.n; ++i) {
            prof.push_back({double(i + 1), rho(i)});
            for (int j = 0; j < o.n; ++j) cov.push_back({double(i + 1), double(j + 1), C(i, j)});
        }
        out.write("profile.csv", table_csv({"i", "density"}, prof));
        out.write("covariance.csv", table_csv({"i", "j", "cov"}, cov));
        rep["mode"] = "exact";
        rep["profile"] = std::vector<double>(rho.data(), rho.data() + rho.size());
        if (!o.h.empty()) {
            std::vector<double> hv(o.n);
            const auto hf = parse_profile(o.h);
            for (int i = 0; i < o.n; ++i) hv[i] = hf(static_cast<double>(i + 1) / (o.n + 1));
            rep["h"] = o.h;
            rep["cgf"] = cgf_exact(gen, hv);
            std::cout << "ssep: log E exp(sum h_i n_i) = " << format_double(rep["cgf"].get<double>()) << "\n";
        }
        std::cout << "ssep: exact stationary profile written for N = " << o.n << "\n";
    } else if (o.mode == "gillespie") {
        if (o.n < 1 || o.n > kMaxGillespieSites) throw UsageError("--n out of range for Gillespie runs");
        if (!(o.t > 0)) throw UsageError("--t must be positive");
        const SsepTrajectory tr = gillespie_run(o.n, rates, o.t, stream_key(o.common.seed, kSsepStream));
        out.write("events.csv", events_csv(tr));
        rep["mode"] = "gillespie";
        rep["T"] = o.t;
        rep["events"] = tr.events.size();
        rep["final_state"] = tr.final_state;
        std::cout << "ssep: " << tr.events.size() << " events up to t = " << format_double(o.t) << "\n";
    } else {
        throw UsageError("--mode: expected exact or gillespie");
    }
    out.write_json("ssep.json", rep);
    out.write_manifest(command_json(sub));
    return kOk;
}

// ---------------------------------------------------------------- config files

// Turns a JSON experiment description into command-line arguments.
std::vector<std::string> config_to_args(const Json& cfg, CLI::App& app) {
    if (!cfg.is_object()) throw UsageError("config: top level must be an object");
    if (!cfg.contains("experiment") || !cfg["experiment"].is_string())
        throw UsageError("config.experiment: missing or not a string");
    const std::string exp = cfg["experiment"].get<std::string>();
    CLI::App* sub = nullptr;
    try {
        if (exp != "run") sub = app.get_subcommand(exp);
    } catch (const CLI::Error&) {
    }
    if (!sub) throw UsageError("config.experiment: unknown experiment '" + exp + "'");
    std::vector<std::string> args{exp};

    auto scalar = [](const Json& v, const std::string& path) -> std::string {
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<long long>());
        if (v.is_number()) return format_double(v.get<double>());
        throw UsageError(path + ": expected a number or string");
    };
    auto emit = [&](const std::string& flag, const Json& v, const std::string& path) {
        const CLI::Option* opt = sub->get_option_no_throw("--" + flag);
        if (!opt) throw UsageError(path + ": not an option of '" + exp + "'");
        if (v.is_boolean()) {
            if (opt->get_expected_max() != 0) throw UsageError(path + ": expected a value, got a boolean");
            if (v.get<bool>()) args.push_back("--" + flag);
            return;
        }
        if (v.is_array()) {
            const bool repeated = std::any_of(v.begin(), v.end(), [](const Json& x) { return x.is_array() || x.is_string(); });
            if (repeated) {
                for (std::size_t k = 0; k < v.size(); ++k) {
                    const std::string p = path + "[" + std::to_string(k) + "]";
                    std::string s;
                    if (v[k].is_array())
                        for (std::size_t m = 0; m < v[k].size(); ++m) s += (m ? "," : "") + scalar(v[k][m], p);
                    else s = scalar(v[k], p);
                    args.push_back("--" + flag);
                    args.push_back(s);
                }
            } else {
                std::string s;
                for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + scalar(v[k], path + "[" + std::to_string(k) + "]");
                args.push_back("--" + flag);
                args.push_back(s);
            }
            return;
        }
        args.push_back("--" + flag);
        args.push_back(scalar(v, path));
    };
    static const std::map<std::string, std::string> chain_keys = {{"N", "n"},         {"n", "n"},
                                                                  {"topology", "topology"}, {"alpha1", "alpha1"},
                                                                  {"beta1", "beta1"}, {"alphaN", "alphaN"},
                                                                  {"betaN", "betaN"}, {"dt", "dt"}};
    static const std::map<std::string, std::string> ensemble_keys = {
        {"trajectories", "trajectories"}, {"snapshots", "snapshots"}, {"burn_in", "burn-in"}, {"spacing", "spacing"}};
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const std::string key = it.key();
        const std::string path = "config." + key;
        if (key == "experiment") continue;
        if (key == "output") {
            emit("out", it.value(), path);
        } else if (key == "chain" || key == "ensemble") {
            if (!it.value().is_object()) throw UsageError(path + ": expected an object");
            const auto& map = key == "chain" ? chain_keys : ensemble_keys;
            for (auto jt = it.value().begin(); jt != it.value().end(); ++jt) {
                const auto f = map.find(jt.key());
                if (f == map.end()) throw UsageError(path + "." + jt.key() + ": unknown field");
                emit(f->second, jt.value(), path + "." + jt.key());
            }
        } else if (key == "estimators") {
            if (!it.value().is_array()) throw UsageError(path + ": expected an array");
            std::string means;
            for (std::size_t k = 0; k < it.value().size(); ++k) {
                const std::string p = path + "[" + std::to_string(k) + "]";
                if (!it.value()[k].is_string()) throw UsageError(p + ": expected a string such as \"loop:5,15\"");
                const std::string e = it.value()[k].get<std::string>();
                const auto colon = e.find(':');
                const std::string kind = e.substr(0, colon), rest = colon == std::string::npos ? "" : e.substr(colon + 1);
                if (kind == "loop" && exp == "loop-cumulants") emit("sites", Json(rest), p);
                else if (kind == "mean" && exp == "loop-cumulants") means += (means.empty() ? "" : ",") + rest;
                else if (kind == "product" && exp == "eulerian-test") emit("edges", Json(rest), p);
                else throw UsageError(p + ": unknown estimator '" + kind + "' for experiment '" + exp + "'");
            }
            if (!means.empty()) emit("mean-sites", Json(means), path);
        } else {
            std::string flag = key;
            std::replace(flag.begin(), flag.end(), '_', '-');
            emit(flag, it.value(), path);
        }
    }
    return args;
}

int run_cli(std::vector<std::string> args);

struct Cli {
    CLI::App app{"QSSEP numerical laboratory"};
    OracleOpts oracle;
    SimulateOpts simulate;
    StationaryOpts stationary;
    LoopOpts loop;
    EulerOpts euler;
    SelfAvgOpts selfavg;
    HaarOpts haar;
    TracesOpts traces;
    SaddleOpts saddle;
    FssepOpts fssep;
    SsepOpts ssep;
    std::string config_path;

    Cli() {
        app.require_subcommand(1);
        app.set_help_flag("--help", "Print this help message and exit"); // frees -h / --h for profiles
        auto* s = app.add_subcommand("oracle", "Fock-space checks: G coupling, Lindbladian vs SSEP generator, Wick");
        add_common(s, oracle.common);
        add_chain(s, oracle.chain);
        s->add_option("--t", oracle.t, "coupling time")->capture_default_str();
        s->add_option("--tol", oracle.tol, "coupling tolerance")->capture_default_str();
        s->add_option("--occupations", oracle.occupations, "initial occupations")->capture_default_str();

        s = app.add_subcommand("simulate", "integrate G trajectories and dump snapshots");
        add_common(s, simulate.common);
        add_chain(s, simulate.chain);
        s->add_option("--t", simulate.t, "final time")->capture_default_str();
        s->add_option("--snapshots", simulate.snapshots, "equally spaced snapshots")->capture_default_str();
        s->add_option("--trajectories", simulate.trajectories, "trajectories")->capture_default_str();

        s = app.add_subcommand("stationary-test", "N = 2 closed chain: D_t against Uniform[-1,1]");
        add_common(s, stationary.common);
        s->add_option("--n", stationary.n, "number of sites (must be 2)")->capture_default_str();
        s->add_option("--trajectories", stationary.trajectories, "trajectories")->capture_default_str();
        s->add_option("--t", stationary.t, "times (comma separated)")->delimiter(',')->capture_default_str();
        s->add_option("--dt", stationary.dt, "time step")->capture_default_str();
        s->add_option("--bins", stationary.bins, "histogram bins")->capture_default_str();

        s = app.add_subcommand("loop-cumulants", "scaled loop cumulants against g_p");
        add_common(s, loop.common);
        add_chain(s, loop.chain);
        add_ensemble(s, loop.ens);
        s->add_option("--p", loop.p, "loop length (checked against --sites)")->capture_default_str();
        s->add_option("--sites", loop.sites, "loop sites, e.g. 5,15 (repeatable)")->take_all();
        s->add_option("--mean-sites", loop.mean_sites, "sites for E G(i,i)");

        s = app.add_subcommand("eulerian-test", "means of products of G entries");
        add_common(s, euler.common);
        add_chain(s, euler.chain);
        add_ensemble(s, euler.ens);
        s->add_option("--edges", euler.edges, "edge list such as 1-2,2-1 (repeatable)")->take_all();

        s = app.add_subcommand("self-averaging", "fluctuations of (1/N) tr log(I + G(e^H - I))");
        add_common(s, selfavg.common);
        add_chain(s, selfavg.chain);
        add_ensemble(s, selfavg.ens);
        s->add_option("--sizes", selfavg.sizes, "chain sizes")->capture_default_str();
        s->add_option("--h", selfavg.h, "profile h(x)")->capture_default_str();
        s->add_option("--grid", selfavg.grid, "grid points for h")->capture_default_str();

        s = app.add_subcommand("haar", "Haar orbits, submatrix spectra, HCIZ series");
        add_common(s, haar.common);
        s->add_option("--mode", haar.mode, "orbit | submatrix | hciz")->capture_default_str();
        s->add_option("--n", haar.n, "matrix size")->capture_default_str();
        s->add_option("--spectrum", haar.spectrum, "bernoulli:p | uniform:a,b,K | atoms:x,...")->capture_default_str();
        s->add_option("--samples", haar.samples, "orbit samples")->capture_default_str();
        s->add_option("--ell", haar.ell, "submatrix fraction")->capture_default_str();
        s->add_option("--bins", haar.bins, "histogram bins")->capture_default_str();
        s->add_option("--grid-points", haar.grid_points, "prediction grid")->capture_default_str();
        s->add_option("--a", haar.a, "rank-one coupling")->capture_default_str();
        s->add_option("--z", haar.z, "HCIZ parameter")->capture_default_str();
        s->add_option("--order", haar.order, "series order")->capture_default_str();

        s = app.add_subcommand("traces", "N^-1 E tr(M D_1 ... M D_p) on Haar orbits");
        add_common(s, traces.common);
        s->add_option("--n", traces.n, "matrix size")->capture_default_str();
        s->add_option("--samples", traces.samples, "orbit samples")->capture_default_str();
        s->add_option("--spectrum", traces.spectrum, "spectrum of D")->capture_default_str();
        s->add_option("--psi", traces.psi, "profile psi_j (repeat p times)")->take_all();
        s->add_option("--quadrature", traces.quadrature, "quadrature points")->capture_default_str();

        s = app.add_subcommand("saddle", "saddle-point equations for F(h; z)");
        add_common(s, saddle.common);
        s->add_option("--h", saddle.h, "profile h(x)")->capture_default_str();
        s->add_option("--z", saddle.z, "spectral parameter")->capture_default_str();
        s->add_option("--grid", saddle.grid, "grid points")->capture_default_str();
        s->add_option("--order", saddle.order, "series order")->capture_default_str();
        s->add_option("--model", saddle.model, "qssep | haar")->capture_default_str();
        s->add_option("--spectrum", saddle.spectrum, "spectrum for the haar model")->capture_default_str();
        s->add_option("--tol", saddle.tol, "iteration tolerance")->capture_default_str();

        s = app.add_subcommand("fssep", "variational SSEP large-deviation functional");
        add_common(s, fssep.common);
        s->add_option("--h", fssep.h, "profile h(x)")->capture_default_str();
        s->add_option("--grid", fssep.grid, "grid points")->capture_default_str();
        s->add_option("--order", fssep.order, "series order")->capture_default_str();
        s->add_option("--tol", fssep.tol, "iteration tolerance")->capture_default_str();
        s->add_flag("--compare", fssep.compare, "compare with extrapolated exact SSEP CGFs");
        s->add_option("--sizes", fssep.sizes, "sizes for --compare")->capture_default_str();

        s = app.add_subcommand("ssep", "classical SSEP: exact stationary state or Gillespie run");
        add_common(s, ssep.common);
        s->add_option("--n", ssep.n, "number of sites")->capture_default_str();
        s->add_option("--alpha1", ssep.alpha1, "injection rate at site 1")->capture_default_str();
        s->add_option("--beta1", ssep.beta1, "extraction rate at site 1")->capture_default_str();
        s->add_option("--alphaN", ssep.alphaN, "injection rate at site N")->capture_default_str();
        s->add_option("--betaN", ssep.betaN, "extraction rate at site N")->capture_default_str();
        s->add_option("--mode", ssep.mode, "exact | gillespie")->capture_default_str();
        s->add_option("--t", ssep.t, "Gillespie time")->capture_default_str();
        s->add_option("--h", ssep.h, "profile h(x) for the exact CGF");

        s = app.add_subcommand("run", "run an experiment described by a JSON file");
        s->add_option("config", config_path, "JSON config")->required();
    }

    int dispatch() {
        for (CLI::App* s : app.get_subcommands()) {
            const std::string n = s->get_name();
            if (n == "oracle") return cmd_oracle(oracle, s);
            if (n == "simulate") return cmd_simulate(simulate, s);
            if (n == "stationary-test") return cmd_stationary(stationary, s);
            if (n == "loop-cumulants") return cmd_loop(loop, s);
            if (n == "eulerian-test") return cmd_euler(euler, s);
            if (n == "self-averaging") return cmd_selfavg(selfavg, s);
            if (n == "haar") return cmd_haar(haar, s);
            if (n == "traces") return cmd_traces(traces, s);
            if (n == "saddle") return cmd_saddle(saddle, s);
            if (n == "fssep") return cmd_fssep(fssep, s);
            if (n == "ssep") return cmd_ssep(ssep, s);
            if (n == "run") {
                Json cfg;
                try {
                    cfg = Json::parse(read_file(config_path));
                } catch (const Json::parse_error& e) {
                    throw UsageError("config: invalid JSON: " + std::string(e.what()));
                } catch (const InvalidArgument& e) {
                    throw UsageError(std::string("config: ") + e.what());
                }
                Cli fresh;
                return run_cli(config_to_args(cfg, fresh.app));
            }
        }
        throw UsageError("no subcommand");
    }
};

int run_cli(std::vector<std::string> args) {
    Cli cli;
    try {
        std::reverse(args.begin(), args.end());
        cli.app.parse(args);
    } catch (const CLI::ParseError& e) {
        return cli.app.exit(e) == 0 ? kOk : kUsage;
    }
    return cli.dispatch();
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        return run_cli(args);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const InvalidArgument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const CheckFailed& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return kCheckFailed;
    } catch (const qssep::Error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
}
