#include "aoi/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <string>
#include <thread>
#include <utility>

#include "aoi/error.hpp"

namespace aoi {
namespace {

struct CompiledSim {
    int num_states = 0;
    int n = 0;
    std::vector<double> out_rate;
    std::vector<std::vector<int>> outgoing;      // per state: transition indices
    std::vector<double> rates;                   // per transition
    std::vector<int> targets;                    // per transition
    std::vector<std::vector<int>> cols;          // per transition: reset column map
};

CompiledSim compile(const ShsModel& model) {
    model.require_valid();
    CompiledSim c;
    c.num_states = model.num_states();
    c.n = model.age_dim();
    c.out_rate.assign(static_cast<std::size_t>(c.num_states), 0.0);
    c.outgoing.resize(static_cast<std::size_t>(c.num_states));
    const auto& ts = model.transitions();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const Transition& t = ts[i];
        c.out_rate[static_cast<std::size_t>(t.source)] += t.rate;
        c.outgoing[static_cast<std::size_t>(t.source)].push_back(static_cast<int>(i));
        c.rates.push_back(t.rate);
        c.targets.push_back(t.target);
        auto form = t.reset.column_form();
        if (!form)
            fail(ErrorCode::kValidation,
                 "transition " + std::to_string(t.id) + " reset map is not binary single-1 form");
        c.cols.push_back(std::move(*form));
    }
    for (int q = 0; q < c.num_states; ++q)
        if (!(c.out_rate[static_cast<std::size_t>(q)] > 0.0))
            fail(ErrorCode::kSimGuard, "absorbing state " + std::to_string(q) +
                                           " (zero total outgoing rate)");
    return c;
}

// Deduplicated raw accumulators backing the requested quantities.
struct RawPlan {
    std::vector<int> means;
    std::vector<int> seconds;
    std::vector<std::pair<int, int>> crosses;
    std::vector<std::pair<std::vector<int>, std::vector<double>>> mgfs;
    bool occupancy = false;
};

template <typename T>
int intern(std::vector<T>& list, const T& value) {
    auto it = std::find(list.begin(), list.end(), value);
    if (it == list.end()) {
        list.push_back(value);
        return static_cast<int>(list.size()) - 1;
    }
    return static_cast<int>(it - list.begin());
}

struct QueryBinding {
    SimQuantity kind;
    int a = -1, b = -1, c = -1, d = -1, e = -1;  // indices into raw accumulators
};

void check_age(int i, int n) {
    if (i < 0 || i >= n)
        fail(ErrorCode::kInvalidArgument,
             "age index " + std::to_string(i) + " out of range 0.." + std::to_string(n - 1));
}

std::pair<RawPlan, std::vector<QueryBinding>> plan_queries(const CompiledSim& c,
                                                           const std::vector<SimQuery>& queries) {
    RawPlan plan;
    std::vector<QueryBinding> bindings;
    for (const SimQuery& q : queries) {
        QueryBinding b{q.kind, -1, -1, -1, -1, -1};
        switch (q.kind) {
            case SimQuantity::kMean:
                check_age(q.i, c.n);
                b.a = intern(plan.means, q.i);
                break;
            case SimQuantity::kSecondMoment:
                check_age(q.i, c.n);
                b.a = intern(plan.seconds, q.i);
                break;
            case SimQuantity::kCrossMoment: {
                check_age(q.i, c.n);
                check_age(q.j, c.n);
                b.a = intern(plan.crosses, {std::min(q.i, q.j), std::max(q.i, q.j)});
                break;
            }
            case SimQuantity::kCorrelation: {
                check_age(q.i, c.n);
                check_age(q.j, c.n);
                if (q.i == q.j)
                    fail(ErrorCode::kInvalidArgument, "correlation needs two distinct ages");
                b.a = intern(plan.means, q.i);
                b.b = intern(plan.means, q.j);
                b.c = intern(plan.seconds, q.i);
                b.d = intern(plan.seconds, q.j);
                b.e = intern(plan.crosses, {std::min(q.i, q.j), std::max(q.i, q.j)});
                break;
            }
            case SimQuantity::kMgf: {
                if (q.ages.size() != q.s.size() || q.ages.empty())
                    fail(ErrorCode::kInvalidArgument, "mgf query needs matching ages and s");
                for (int age : q.ages) check_age(age, c.n);
                b.a = intern(plan.mgfs, {q.ages, q.s});
                break;
            }
            case SimQuantity::kOccupancy:
                if (q.i < 0 || q.i >= c.num_states)
                    fail(ErrorCode::kInvalidArgument, "state index out of range");
                plan.occupancy = true;
                b.a = q.i;
                break;
        }
        bindings.push_back(b);
    }
    return {std::move(plan), std::move(bindings)};
}

struct RawResult {
    std::vector<double> means, seconds, crosses, mgfs, occupancy;
    double time = 0.0;
    std::uint64_t events = 0;
};

struct Budget {
    double horizon = 0.0;          // 0 when event-driven
    std::uint64_t max_events = 0;  // 0 when time-driven
    double warmup_time = 0.0;
    std::uint64_t warmup_events = 0;
};

RawResult run_replication(const CompiledSim& c, const RawPlan& plan, const Budget& budget,
                          Pcg64 rng) {
    RawResult acc;
    acc.means.assign(plan.means.size(), 0.0);
    acc.seconds.assign(plan.seconds.size(), 0.0);
    acc.crosses.assign(plan.crosses.size(), 0.0);
    acc.mgfs.assign(plan.mgfs.size(), 0.0);
    acc.occupancy.assign(plan.occupancy ? static_cast<std::size_t>(c.num_states) : 0, 0.0);

    std::vector<double> ages(static_cast<std::size_t>(c.n), 0.0);
    std::vector<double> scratch(static_cast<std::size_t>(c.n), 0.0);
    int state = 0;
    double now = 0.0;
    std::uint64_t events = 0;

    auto accumulate = [&](double delta) {
        // clip the segment [now, now+delta) against the warmup boundary
        double start_offset = 0.0;
        double dt = delta;
        if (budget.warmup_time > 0.0) {
            if (now + delta <= budget.warmup_time) return;
            if (now < budget.warmup_time) {
                start_offset = budget.warmup_time - now;
                dt = delta - start_offset;
            }
        } else if (budget.warmup_events > 0 && events < budget.warmup_events) {
            return;
        }
        acc.time += dt;
        const double dt2 = dt * dt / 2.0;
        const double dt3 = dt * dt * dt / 3.0;
        for (std::size_t k = 0; k < plan.means.size(); ++k) {
            const double a = ages[static_cast<std::size_t>(plan.means[k])] + start_offset;
            acc.means[k] += a * dt + dt2;
        }
        for (std::size_t k = 0; k < plan.seconds.size(); ++k) {
            const double a = ages[static_cast<std::size_t>(plan.seconds[k])] + start_offset;
            acc.seconds[k] += a * a * dt + 2.0 * a * dt2 + dt3;
        }
        for (std::size_t k = 0; k < plan.crosses.size(); ++k) {
            const double a = ages[static_cast<std::size_t>(plan.crosses[k].first)] + start_offset;
            const double b = ages[static_cast<std::size_t>(plan.crosses[k].second)] + start_offset;
            acc.crosses[k] += a * b * dt + (a + b) * dt2 + dt3;
        }
        for (std::size_t k = 0; k < plan.mgfs.size(); ++k) {
            const auto& [mk, ms] = plan.mgfs[k];
            double arg = 0.0, total_s = 0.0;
            for (std::size_t j = 0; j < mk.size(); ++j) {
                arg += ms[j] * (ages[static_cast<std::size_t>(mk[j])] + start_offset);
                total_s += ms[j];
            }
            if (arg > 700.0 || total_s * dt > 700.0)
                fail(ErrorCode::kSimGuard, "accumulator overflow: exp argument exceeded the "
                                           "guard threshold (divergent MGF)");
            const double seg = (total_s == 0.0) ? std::exp(arg) * dt
                                                : std::exp(arg) * std::expm1(total_s * dt) / total_s;
            acc.mgfs[k] += seg;
            if (acc.mgfs[k] > 1e290)
                fail(ErrorCode::kSimGuard, "accumulator overflow past guard threshold "
                                           "(divergent MGF)");
        }
        if (plan.occupancy) acc.occupancy[static_cast<std::size_t>(state)] += dt;
    };

    while (true) {
        if (budget.max_events > 0 && events >= budget.max_events) break;
        const double rate = c.out_rate[static_cast<std::size_t>(state)];
        double delta = -std::log1p(-rng.uniform()) / rate;
        bool final_segment = false;
        if (budget.horizon > 0.0 && now + delta >= budget.horizon) {
            delta = budget.horizon - now;
            final_segment = true;
        }
        accumulate(delta);
        for (double& a : ages) a += delta;
        now += delta;
        if (final_segment) break;

        // transition choice proportional to rates
        double pick = rng.uniform() * rate;
        const auto& out = c.outgoing[static_cast<std::size_t>(state)];
        int chosen = out.back();
        for (int ti : out) {
            pick -= c.rates[static_cast<std::size_t>(ti)];
            if (pick <= 0.0) {
                chosen = ti;
                break;
            }
        }
        const auto& col = c.cols[static_cast<std::size_t>(chosen)];
        for (int j = 0; j < c.n; ++j)
            scratch[static_cast<std::size_t>(j)] =
                col[static_cast<std::size_t>(j)] < 0
                    ? 0.0
                    : ages[static_cast<std::size_t>(col[static_cast<std::size_t>(j)])];
        std::swap(ages, scratch);
        state = c.targets[static_cast<std::size_t>(chosen)];
        ++events;
    }

    if (!(acc.time > 0.0))
        fail(ErrorCode::kInvalidArgument, "no accumulation time after warmup");
    for (double& v : acc.means) v /= acc.time;
    for (double& v : acc.seconds) v /= acc.time;
    for (double& v : acc.crosses) v /= acc.time;
    for (double& v : acc.mgfs) v /= acc.time;
    for (double& v : acc.occupancy) v /= acc.time;
    acc.events = events;
    return acc;
}

double query_value(const QueryBinding& b, const RawResult& r) {
    switch (b.kind) {
        case SimQuantity::kMean: return r.means[static_cast<std::size_t>(b.a)];
        case SimQuantity::kSecondMoment: return r.seconds[static_cast<std::size_t>(b.a)];
        case SimQuantity::kCrossMoment: return r.crosses[static_cast<std::size_t>(b.a)];
        case SimQuantity::kMgf: return r.mgfs[static_cast<std::size_t>(b.a)];
        case SimQuantity::kOccupancy: return r.occupancy[static_cast<std::size_t>(b.a)];
        case SimQuantity::kCorrelation: {
            const double mi = r.means[static_cast<std::size_t>(b.a)];
            const double mj = r.means[static_cast<std::size_t>(b.b)];
            const double vi = r.seconds[static_cast<std::size_t>(b.c)] - mi * mi;
            const double vj = r.seconds[static_cast<std::size_t>(b.d)] - mj * mj;
            const double cov = r.crosses[static_cast<std::size_t>(b.e)] - mi * mj;
            if (!(vi > 0.0) || !(vj > 0.0))
                fail(ErrorCode::kSimGuard, "degenerate variance in correlation estimate");
            return cov / std::sqrt(vi * vj);
        }
    }
    fail(ErrorCode::kInternal, "unreachable query kind");
}

}  // namespace

Pcg64 replication_stream(std::uint64_t seed, int index) {
    return Pcg64(seed, static_cast<std::uint64_t>(index));
}

SimEstimate simulate(const ShsModel& model, const SimConfig& config,
                     const std::vector<SimQuery>& queries) {
    const CompiledSim c = compile(model);
    if (config.replications < 1)
        fail(ErrorCode::kInvalidArgument, "replications must be >= 1");
    const bool time_driven = config.horizon > 0.0;
    const bool event_driven = config.max_events > 0;
    if (time_driven == event_driven)
        fail(ErrorCode::kInvalidArgument, "set exactly one of horizon or max_events");

    Budget budget;
    if (time_driven) {
        budget.horizon = config.horizon;
        budget.warmup_time = config.warmup >= 0.0 ? config.warmup : 0.05 * config.horizon;
        if (!(budget.horizon > budget.warmup_time))
            fail(ErrorCode::kInvalidArgument, "no accumulation time: horizon must exceed warmup");
    } else {
        budget.max_events = config.max_events;
        if (config.warmup >= 0.0)
            budget.warmup_time = config.warmup;
        else
            budget.warmup_events = config.max_events / 20;
        if (budget.warmup_events >= budget.max_events)
            fail(ErrorCode::kInvalidArgument, "no accumulation time: warmup swallows the budget");
    }

    auto [plan, bindings] = plan_queries(c, queries);

    const int reps = config.replications;
    std::vector<RawResult> results(static_cast<std::size_t>(reps));
    int workers = config.threads > 0 ? config.threads
                                     : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, reps));
    if (workers == 1) {
        for (int i = 0; i < reps; ++i)
            results[static_cast<std::size_t>(i)] =
                run_replication(c, plan, budget, replication_stream(config.seed, i));
    } else {
        std::vector<std::future<void>> futures;
        std::atomic<int> next{0};
        for (int w = 0; w < workers; ++w)
            futures.push_back(std::async(std::launch::async, [&]() {
                while (true) {
                    const int i = next.fetch_add(1);
                    if (i >= reps) return;
                    results[static_cast<std::size_t>(i)] =
                        run_replication(c, plan, budget, replication_stream(config.seed, i));
                }
            }));
        for (auto& f : futures) f.get();
    }

    SimEstimate est;
    est.values.resize(bindings.size());
    for (const RawResult& r : results) {
        est.total_time += r.time;
        est.total_events += r.events;
    }
    est.replication_values.resize(bindings.size());
    for (std::size_t qi = 0; qi < bindings.size(); ++qi) {
        std::vector<double>& samples = est.replication_values[qi];
        samples.reserve(static_cast<std::size_t>(reps));
        for (const RawResult& r : results) samples.push_back(query_value(bindings[qi], r));
        double mean = 0.0;
        for (double v : samples) mean += v;
        mean /= static_cast<double>(reps);
        double var = 0.0;
        for (double v : samples) var += (v - mean) * (v - mean);
        const double se =
            reps > 1 ? std::sqrt(var / static_cast<double>(reps - 1) / static_cast<double>(reps))
                     : 0.0;
        est.values[qi] = SimValue{mean, se, est.total_time};
    }
    return est;
}

}  // namespace aoi
