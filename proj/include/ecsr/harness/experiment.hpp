#pragma once

// Trial generation, solver runs and NMSE aggregation for sweeps over ensembles and
// compression rates, plus the replica predictions the sweeps are compared with.

#include "ecsr/core.hpp"
#include "ecsr/ec_solver.hpp"
#include "ecsr/ensembles.hpp"
#include "ecsr/gfunc.hpp"
#include "ecsr/harness/config.hpp"
#include "ecsr/replica.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

namespace ecsr::harness {

struct TrialRecord {
    EnsembleKind ensemble = EnsembleKind::RowOrthogonal;
    GKind gfun = GKind::RowOrthogonalClosedForm;
    double inv_alpha = 0.0;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    /// +inf when the solver diverged.
    double nmse = 0.0;
    std::size_t iters = 0;
    bool converged = false;
    double wall_ms = 0.0;
    // bookkeeping, not serialized
    std::size_t run_index = 0;
    std::size_t grid_index = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// master XOR splitmix64(ensemble << 48 | grid << 32 | trial). Runs sharing an ensemble
/// see the same instances, so solvers are compared on paired trials.
inline std::uint64_t trial_seed(std::uint64_t master, EnsembleKind ensemble, std::size_t grid_index,
                                std::size_t trial) {
    const auto counter = (static_cast<std::uint64_t>(ensemble) << 48) |
                         (static_cast<std::uint64_t>(grid_index & 0xffff) << 32) |
                         static_cast<std::uint64_t>(trial & 0xffffffffULL);
    return master ^ splitmix64(counter);
}

/// Like make_instance, but redraws the signal (continuing the same stream) until it is
/// nonzero so that the NMSE is defined.
inline ObservationInstance make_trial_instance(const EnsembleSpec& spec, const PriorBG& prior, double sigma2,
                                               std::uint64_t seed) {
    if (!(prior.rho > 0.0)) throw InvalidArgument("make_trial_instance: rho must be positive");
    Rng rng(seed);
    ObservationInstance obs;
    do {
        obs.x0 = sample_signal(prior, spec.n, rng);
    } while (obs.x0.squaredNorm() == 0.0);
    obs.a = sample_matrix(spec, rng);
    obs.y = observe(obs.a, obs.x0, sigma2, rng);
    obs.sigma2 = sigma2;
    obs.seed = seed;
    return obs;
}

inline TrialRecord run_trial(const ExperimentConfig& cfg, std::size_t run_index, std::size_t grid_index,
                             std::size_t trial) {
    const RunSpec& run = cfg.runs.at(run_index);
    const double inv_alpha = cfg.inverse_alpha_grid.at(grid_index);
    TrialRecord rec;
    rec.ensemble = run.ensemble;
    rec.gfun = run.gfun;
    rec.inv_alpha = inv_alpha;
    rec.trial = trial;
    rec.run_index = run_index;
    rec.grid_index = grid_index;
    rec.seed = trial_seed(cfg.seed, run.ensemble, grid_index, trial);

    const auto start = std::chrono::steady_clock::now();
    const EnsembleSpec spec{run.ensemble, cfg.n, cfg.measurements(inv_alpha)};
    const auto obs = make_trial_instance(spec, cfg.prior, cfg.sigma2, rec.seed);
    const auto g = GFunction::make(run.gfun, spec.alpha());
    try {
        const auto state = ec_solve(obs, cfg.prior, g, cfg.solver);
        rec.nmse = nmse(state.m, obs.x0);
        rec.iters = state.iter;
        rec.converged = state.converged;
    } catch (const DivergenceError& err) {
        rec.nmse = std::numeric_limits<double>::infinity();
        rec.iters = err.iteration();
        rec.converged = false;
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

/// All (run, grid point, trial) combinations, sorted by (run, 1/alpha index, trial).
/// Trials are spread over worker threads; results do not depend on the thread count.
inline std::vector<TrialRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    struct Task {
        std::size_t run, grid, trial;
    };
    std::vector<Task> tasks;
    for (std::size_t r = 0; r < cfg.runs.size(); ++r)
        for (std::size_t gi = 0; gi < cfg.inverse_alpha_grid.size(); ++gi)
            for (std::size_t t = 0; t < cfg.trials; ++t) tasks.push_back({r, gi, t});

    std::vector<TrialRecord> records(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                records[i] = run_trial(cfg, tasks[i].run, tasks[i].grid, tasks[i].trial);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const std::size_t nthreads = std::min(worker_count(cfg), tasks.size());
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t k = 0; k < nthreads; ++k) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return records;
}

struct Aggregate {
    EnsembleKind ensemble = EnsembleKind::RowOrthogonal;
    GKind gfun = GKind::RowOrthogonalClosedForm;
    double inv_alpha = 0.0;
    std::size_t trials = 0;
    double mean_nmse = 0.0;
    double median_nmse = 0.0;
    /// sample standard deviation / sqrt(trials)
    double stderr_nmse = 0.0;
    double converged_rate = 0.0;
    /// Replica prediction of the matrix ensemble (NaN when not computed).
    double replica_mmse = std::numeric_limits<double>::quiet_NaN();
    double replica_nmse = std::numeric_limits<double>::quiet_NaN();

    friend bool operator==(const Aggregate&, const Aggregate&) = default;
};

inline double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t k = v.size() / 2;
    return v.size() % 2 ? v[k] : 0.5 * (v[k - 1] + v[k]);
}

/// Groups records by (ensemble, gfun, 1/alpha) in first-appearance order of the sorted
/// records.
inline std::vector<Aggregate> summarize(std::vector<TrialRecord> records) {
    if (records.empty()) throw InvalidArgument("summarize: no records");
    std::stable_sort(records.begin(), records.end(), [](const TrialRecord& a, const TrialRecord& b) {
        return std::tie(a.run_index, a.grid_index, a.trial) < std::tie(b.run_index, b.grid_index, b.trial);
    });
    std::vector<Aggregate> out;
    std::vector<std::vector<const TrialRecord*>> groups;
    for (const auto& rec : records) {
        auto it = std::find_if(out.begin(), out.end(), [&](const Aggregate& a) {
            return a.ensemble == rec.ensemble && a.gfun == rec.gfun && a.inv_alpha == rec.inv_alpha;
        });
        if (it == out.end()) {
            Aggregate a;
            a.ensemble = rec.ensemble;
            a.gfun = rec.gfun;
            a.inv_alpha = rec.inv_alpha;
            out.push_back(a);
            groups.emplace_back();
            it = std::prev(out.end());
        }
        groups[static_cast<std::size_t>(it - out.begin())].push_back(&rec);
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto& group = groups[k];
        if (group.empty()) throw InvalidArgument("summarize: empty group");
        std::vector<double> values;
        double sum = 0.0;
        std::size_t converged = 0;
        for (const auto* rec : group) {
            values.push_back(rec->nmse);
            sum += rec->nmse;
            converged += rec->converged ? 1 : 0;
        }
        const double count = static_cast<double>(group.size());
        auto& agg = out[k];
        agg.trials = group.size();
        agg.mean_nmse = sum / count;
        agg.median_nmse = median_of(values);
        double ss = 0.0;
        for (double v : values) ss += (v - agg.mean_nmse) * (v - agg.mean_nmse);
        agg.stderr_nmse = group.size() > 1 ? std::sqrt(ss / (count - 1.0)) / std::sqrt(count) : 0.0;
        agg.converged_rate = static_cast<double>(converged) / count;
    }
    return out;
}

/// Replica prediction for one ensemble at alpha; NMSE is mmse / Q0.
struct ReplicaPrediction {
    GKind gkind;
    double alpha;
    double mmse;
    double nmse;
};

inline ReplicaPrediction replica_prediction(const PriorBG& prior, double sigma2, GKind gkind, double alpha,
                                            const ReplicaOptions& opt = {}) {
    const auto fp = replica_fixed_point(prior, sigma2, GFunction::make(gkind, alpha), opt);
    return {gkind, alpha, fp.mmse, fp.mmse / prior.second_moment()};
}

/// Fills the replica columns from the configuration alone, at the realized alpha = M/N
/// of each grid point and the spectrum of each row's matrix ensemble.
inline void attach_replica_predictions(std::vector<Aggregate>& rows, const ExperimentConfig& cfg,
                                       const ReplicaOptions& opt = {}) {
    std::map<std::pair<int, double>, ReplicaPrediction> cache;
    for (auto& row : rows) {
        const GKind gkind = matched_gkind(row.ensemble);
        const double alpha =
            static_cast<double>(cfg.measurements(row.inv_alpha)) / static_cast<double>(cfg.n);
        const auto key = std::pair{static_cast<int>(gkind), alpha};
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, replica_prediction(cfg.prior, cfg.sigma2, gkind, alpha, opt)).first;
        row.replica_mmse = it->second.mmse;
        row.replica_nmse = it->second.nmse;
    }
}

}  // namespace ecsr::harness
