#pragma once

#include <cstdint>
#include <vector>

#include "aoi/rng.hpp"
#include "aoi/shs.hpp"

namespace aoi {

/// Simulation budget and replication layout. Exactly one of `horizon`
/// (simulated time) or `max_events` must be positive; `warmup` is simulated
/// time discarded before accumulation (default 5% of the budget).
struct SimConfig {
    std::uint64_t seed = 1;
    double horizon = 0.0;
    std::uint64_t max_events = 0;
    double warmup = -1.0;
    int replications = 1;
    int threads = 0;  // max concurrent replications; 0 = hardware default
};

enum class SimQuantity {
    kMean,          // time average of x_i
    kSecondMoment,  // time average of x_i^2
    kCrossMoment,   // time average of x_i * x_j
    kMgf,           // time average of exp(sum_j s_j x_{ages[j]})
    kCorrelation,   // Pearson coefficient of (x_i, x_j) assembled per replication
    kOccupancy,     // fraction of time in state i
};

struct SimQuery {
    SimQuantity kind = SimQuantity::kMean;
    int i = -1;
    int j = -1;
    std::vector<int> ages;  // kMgf only
    std::vector<double> s;  // kMgf only

    static SimQuery mean(int i) { return {SimQuantity::kMean, i, -1, {}, {}}; }
    static SimQuery second_moment(int i) { return {SimQuantity::kSecondMoment, i, -1, {}, {}}; }
    static SimQuery cross_moment(int i, int j) { return {SimQuantity::kCrossMoment, i, j, {}, {}}; }
    static SimQuery correlation(int i, int j) { return {SimQuantity::kCorrelation, i, j, {}, {}}; }
    static SimQuery mgf(std::vector<int> ages, std::vector<double> s) {
        return {SimQuantity::kMgf, -1, -1, std::move(ages), std::move(s)};
    }
    static SimQuery occupancy(int state) { return {SimQuantity::kOccupancy, state, -1, {}, {}}; }
};

struct SimValue {
    double estimate = 0.0;
    double std_error = 0.0;
    double accum_time = 0.0;  // post-warmup time summed over replications
};

struct SimEstimate {
    std::vector<SimValue> values;  // one per query, in request order
    std::vector<std::vector<double>> replication_values;  // [query][replication]
    double total_time = 0.0;
    std::uint64_t total_events = 0;
};

/// Discrete-event simulation of a validated model: competing exponential
/// clocks drive the chain, ages advance linearly between events, and each
/// requested time average is integrated exactly over every inter-event
/// segment. Estimates are means over replications with batch standard errors.
SimEstimate simulate(const ShsModel& model, const SimConfig& config,
                     const std::vector<SimQuery>& queries);

/// Deterministic per-replication RNG stream: the same (seed, index) always
/// reproduces the identical trajectory, and distinct indices never share a
/// sequence.
Pcg64 replication_stream(std::uint64_t seed, int index);

}  // namespace aoi
