#include "aoi/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "aoi/error.hpp"

namespace aoi {
namespace {

struct Compiled {
    const ShsModel* model = nullptr;
    int num_states = 0;
    int n = 0;
    std::vector<std::vector<int>> incoming;  // per target state: transition indices
    std::vector<double> out_rate;            // d_q = sum of outgoing rates
    std::vector<std::vector<int>> cols;      // per transition: reset column map
};

Compiled compile(const ShsModel& model) {
    model.require_valid();
    Compiled c;
    c.model = &model;
    c.num_states = model.num_states();
    c.n = model.age_dim();
    c.incoming.resize(static_cast<std::size_t>(c.num_states));
    c.out_rate.assign(static_cast<std::size_t>(c.num_states), 0.0);
    const auto& ts = model.transitions();
    c.cols.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const Transition& t = ts[i];
        c.incoming[static_cast<std::size_t>(t.target)].push_back(static_cast<int>(i));
        c.out_rate[static_cast<std::size_t>(t.source)] += t.rate;
        auto form = t.reset.column_form();
        if (!form)
            fail(ErrorCode::kValidation,
                 "transition " + std::to_string(t.id) + " reset map is not binary single-1 form");
        c.cols.push_back(std::move(*form));
    }
    return c;
}

// Multi-index digits of every flat offset for order r (row-major, last digit
// fastest), plus the per-transition pull map: pulled flat offset reading the
// source entry of a reset contraction, or -1 if any addressed column is zero.
struct LevelGeometry {
    int r = 0;
    std::size_t count = 0;
    std::vector<int> digits;                 // count * r
    std::vector<std::vector<long>> pull;     // per transition: count entries

    const int* digit_row(std::size_t flat) const { return digits.data() + flat * static_cast<std::size_t>(r); }
};

LevelGeometry level_geometry(const Compiled& c, int r) {
    LevelGeometry g;
    g.r = r;
    g.count = tensor_element_count(r, c.n);
    g.digits.resize(g.count * static_cast<std::size_t>(r));
    for (std::size_t flat = 0; flat < g.count; ++flat) {
        std::size_t rem = flat;
        for (int j = r - 1; j >= 0; --j) {
            g.digits[flat * static_cast<std::size_t>(r) + static_cast<std::size_t>(j)] =
                static_cast<int>(rem % static_cast<std::size_t>(c.n));
            rem /= static_cast<std::size_t>(c.n);
        }
    }
    g.pull.resize(c.cols.size());
    for (std::size_t t = 0; t < c.cols.size(); ++t) {
        const std::vector<int>& col = c.cols[t];
        g.pull[t].resize(g.count);
        for (std::size_t flat = 0; flat < g.count; ++flat) {
            const int* dig = g.digit_row(flat);
            long pulled = 0;
            for (int j = 0; j < r; ++j) {
                const int src = col[static_cast<std::size_t>(dig[j])];
                if (src < 0) {
                    pulled = -1;
                    break;
                }
                pulled = pulled * c.n + src;
            }
            g.pull[t][flat] = pulled;
        }
    }
    return g;
}

// System matrix of the stationary equations at one level:
// M = D - B^T - sum_s * I, acting on the stacked (state, multi-index) vector.
Eigen::MatrixXd build_system(const Compiled& c, const LevelGeometry& g, double sum_s) {
    const std::size_t nr = g.count;
    const long size = static_cast<long>(c.num_states) * static_cast<long>(nr);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(size, size);
    for (int q = 0; q < c.num_states; ++q) {
        const double diag = c.out_rate[static_cast<std::size_t>(q)] - sum_s;
        for (std::size_t flat = 0; flat < nr; ++flat) {
            const long row = static_cast<long>(q) * static_cast<long>(nr) + static_cast<long>(flat);
            m(row, row) += diag;
        }
    }
    const auto& ts = c.model->transitions();
    for (int q = 0; q < c.num_states; ++q) {
        for (int ti : c.incoming[static_cast<std::size_t>(q)]) {
            const Transition& t = ts[static_cast<std::size_t>(ti)];
            const auto& pull = g.pull[static_cast<std::size_t>(ti)];
            for (std::size_t flat = 0; flat < nr; ++flat) {
                if (pull[flat] < 0) continue;
                const long row = static_cast<long>(q) * static_cast<long>(nr) + static_cast<long>(flat);
                const long col = static_cast<long>(t.source) * static_cast<long>(nr) + pull[flat];
                m(row, col) -= t.rate;
            }
        }
    }
    return m;
}

double max_real_eigenvalue(const Eigen::MatrixXd& stability_matrix) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(stability_matrix, /*computeEigenvectors=*/false);
    double max_real = -std::numeric_limits<double>::infinity();
    for (long i = 0; i < es.eigenvalues().size(); ++i)
        max_real = std::max(max_real, es.eigenvalues()[i].real());
    return max_real;
}

Eigen::VectorXd solve_linear(const Eigen::MatrixXd& m, const Eigen::VectorXd& rhs,
                             const SolverOptions& opts, const char* context) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    Eigen::VectorXd x = lu.solve(rhs);
    const double scale = std::max({1.0, rhs.cwiseAbs().maxCoeff(),
                                   m.cwiseAbs().maxCoeff() * x.cwiseAbs().maxCoeff()});
    const double residual = (m * x - rhs).cwiseAbs().maxCoeff();
    if (!x.allFinite() || residual > opts.residual_tol * scale)
        fail(ErrorCode::kUnstable, std::string(context) +
                                       ": unstable configuration (no stationary fixed point); "
                                       "relative residual " +
                                       std::to_string(residual / scale));
    return x;
}

void check_order_cap(int order, const SolverOptions& opts) {
    if (order < 1) fail(ErrorCode::kInvalidArgument, "query order must be >= 1");
    if (order > opts.max_order)
        fail(ErrorCode::kInvalidArgument,
             "tensor order " + std::to_string(order) + " exceeds the configured cap " +
                 std::to_string(opts.max_order) +
                 " (memory grows as n^r; raise SolverOptions::max_order to allow)");
}

void check_size_cap(const Compiled& c, int order, const SolverOptions& opts) {
    const std::size_t nr = tensor_element_count(order, c.n);
    const long unknowns = static_cast<long>(c.num_states) * static_cast<long>(nr);
    if (unknowns > opts.max_unknowns)
        fail(ErrorCode::kInvalidArgument,
             "system of " + std::to_string(unknowns) + " unknowns (|Q| * n^r) exceeds the cap " +
                 std::to_string(opts.max_unknowns) +
                 "; raise SolverOptions::max_unknowns for dense solves this large");
}

std::vector<DenseTensor> unpack_states(const Compiled& c, int r, const Eigen::VectorXd& x) {
    const std::size_t nr = tensor_element_count(r, c.n);
    std::vector<DenseTensor> out;
    out.reserve(static_cast<std::size_t>(c.num_states));
    for (int q = 0; q < c.num_states; ++q) {
        DenseTensor t(r, c.n);
        for (std::size_t flat = 0; flat < nr; ++flat)
            t.mutable_data()[flat] = x(static_cast<long>(q) * static_cast<long>(nr) +
                                       static_cast<long>(flat));
        out.push_back(std::move(t));
    }
    return out;
}

DenseTensor aggregate_states(const std::vector<DenseTensor>& per_state) {
    DenseTensor sum = per_state.front();
    for (std::size_t q = 1; q < per_state.size(); ++q) sum.add_scaled(per_state[q], 1.0);
    return sum;
}

// ---------------------------------------------------------------------------
// Joint moments
// ---------------------------------------------------------------------------

struct MomentContext {
    const Compiled& c;
    const Eigen::VectorXd& pi;
    const SolverOptions& opts;
    std::map<std::vector<int>, std::vector<DenseTensor>> cache;
    std::map<int, LevelGeometry> geometry;

    const LevelGeometry& geom(int r) {
        auto it = geometry.find(r);
        if (it == geometry.end()) it = geometry.emplace(r, level_geometry(c, r)).first;
        return it->second;
    }
};

// Expand an order-|positions| solution into an order-r tensor that is
// constant along the dropped modes (the replication identity for m_j = 0).
std::vector<DenseTensor> replicate_levels(MomentContext& ctx, int r,
                                          const std::vector<int>& positions,
                                          const std::vector<DenseTensor>& sub) {
    const LevelGeometry& g = ctx.geom(r);
    std::vector<DenseTensor> out;
    out.reserve(sub.size());
    std::vector<int> reduced(positions.size());
    for (const DenseTensor& s : sub) {
        DenseTensor t(r, ctx.c.n);
        for (std::size_t flat = 0; flat < g.count; ++flat) {
            const int* dig = g.digit_row(flat);
            for (std::size_t p = 0; p < positions.size(); ++p)
                reduced[p] = dig[positions[p]];
            t.mutable_data()[flat] = s.get(reduced);
        }
        out.push_back(std::move(t));
    }
    return out;
}

const std::vector<DenseTensor>& solve_moment_rec(MomentContext& ctx, const std::vector<int>& m) {
    auto it = ctx.cache.find(m);
    if (it != ctx.cache.end()) return it->second;

    const int r = static_cast<int>(m.size());
    std::vector<DenseTensor> result;

    const bool all_zero = std::all_of(m.begin(), m.end(), [](int v) { return v == 0; });
    std::vector<int> positive_positions;
    for (int j = 0; j < r; ++j)
        if (m[static_cast<std::size_t>(j)] > 0) positive_positions.push_back(j);

    if (all_zero) {
        for (int q = 0; q < ctx.c.num_states; ++q)
            result.emplace_back(r, ctx.c.n, ctx.pi(q));
    } else if (static_cast<int>(positive_positions.size()) < r) {
        std::vector<int> sub_m;
        for (int j : positive_positions) sub_m.push_back(m[static_cast<std::size_t>(j)]);
        const auto& sub = solve_moment_rec(ctx, sub_m);
        result = replicate_levels(ctx, r, positive_positions, sub);
    } else {
        // All powers >= 1: assemble and solve the stationary linear system.
        const LevelGeometry& g = ctx.geom(r);
        const std::size_t nr = g.count;
        const long size = static_cast<long>(ctx.c.num_states) * static_cast<long>(nr);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
        for (int j = 0; j < r; ++j) {
            std::vector<int> lower = m;
            lower[static_cast<std::size_t>(j)] -= 1;
            const auto& low = solve_moment_rec(ctx, lower);
            const double weight = static_cast<double>(m[static_cast<std::size_t>(j)]);
            for (int q = 0; q < ctx.c.num_states; ++q)
                for (std::size_t flat = 0; flat < nr; ++flat)
                    rhs(static_cast<long>(q) * static_cast<long>(nr) + static_cast<long>(flat)) +=
                        weight * low[static_cast<std::size_t>(q)].data()[flat];
        }
        Eigen::MatrixXd sys = build_system(ctx.c, g, 0.0);
        Eigen::VectorXd x = solve_linear(sys, rhs, ctx.opts, "joint moments");
        const bool all_ones = std::all_of(m.begin(), m.end(), [](int v) { return v == 1; });
        if (all_ones && x.minCoeff() <= ctx.opts.positivity_tol)
            fail(ErrorCode::kUnstable,
                 "no positive fixed point: first-moment solution has a non-positive entry");
        result = unpack_states(ctx.c, r, x);
    }

    return ctx.cache.emplace(m, std::move(result)).first->second;
}

// ---------------------------------------------------------------------------
// Joint MGF: subset recursion of the correction term
// ---------------------------------------------------------------------------

struct MgfContext {
    const Compiled& c;
    const Eigen::VectorXd& pi;
    const std::vector<double>& s;  // aligned to the query positions
    const SolverOptions& opts;
    std::map<int, LevelGeometry> geometry;
    std::map<int, double> spectrum;                        // order -> max Re(eig(B - D))
    std::map<unsigned, std::vector<DenseTensor>> levels;   // bitmask of retained positions

    const LevelGeometry& geom(int r) {
        auto it = geometry.find(r);
        if (it == geometry.end()) it = geometry.emplace(r, level_geometry(c, r)).first;
        return it->second;
    }
};

void solve_mgf_level(MgfContext& ctx, unsigned mask) {
    std::vector<int> positions;
    for (int j = 0; j < 32; ++j)
        if (mask & (1u << j)) positions.push_back(j);
    const int r = static_cast<int>(positions.size());
    const LevelGeometry& g = ctx.geom(r);
    const std::size_t nr = g.count;
    const long size = static_cast<long>(ctx.c.num_states) * static_cast<long>(nr);

    double sum_s = 0.0;
    for (int j : positions) sum_s += ctx.s[static_cast<std::size_t>(j)];

    if (ctx.opts.check_stability) {
        auto it = ctx.spectrum.find(r);
        if (it == ctx.spectrum.end()) {
            Eigen::MatrixXd base = -build_system(ctx.c, g, 0.0);  // B^T - D, same spectrum as B - D
            it = ctx.spectrum.emplace(r, max_real_eigenvalue(base)).first;
        }
        const double shifted = it->second + sum_s;
        if (shifted >= -ctx.opts.stability_margin) {
            std::ostringstream oss;
            oss << "s outside stability region: max Re eig(B - D) + sum(s) = " << shifted
                << " (margin " << ctx.opts.stability_margin << ")";
            fail(ErrorCode::kUnstable, oss.str());
        }
    }

    // Correction term: incoming transitions whose reset zeroes some addressed
    // ages read the already-solved lower-cardinality level at the retained
    // positions (or the plain state probability when nothing is retained).
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(size);
    const auto& ts = ctx.c.model->transitions();
    std::vector<int> pulled_digits;
    for (int q = 0; q < ctx.c.num_states; ++q) {
        for (int ti : ctx.c.incoming[static_cast<std::size_t>(q)]) {
            const Transition& t = ts[static_cast<std::size_t>(ti)];
            const std::vector<int>& col = ctx.c.cols[static_cast<std::size_t>(ti)];
            for (std::size_t flat = 0; flat < nr; ++flat) {
                const int* dig = g.digit_row(flat);
                unsigned retained_mask = 0;
                pulled_digits.clear();
                bool any_zeroed = false;
                for (int p = 0; p < r; ++p) {
                    const int src = col[static_cast<std::size_t>(dig[p])];
                    if (src < 0) {
                        any_zeroed = true;
                    } else {
                        retained_mask |= 1u << positions[static_cast<std::size_t>(p)];
                        pulled_digits.push_back(src);
                    }
                }
                if (!any_zeroed) continue;  // handled by the system matrix
                double value;
                if (retained_mask == 0) {
                    value = ctx.pi(t.source);
                } else {
                    const auto& sub = ctx.levels.at(retained_mask);
                    value = sub[static_cast<std::size_t>(t.source)].get(pulled_digits);
                }
                rhs(static_cast<long>(q) * static_cast<long>(nr) + static_cast<long>(flat)) +=
                    t.rate * value;
            }
        }
    }

    Eigen::MatrixXd sys = build_system(ctx.c, g, sum_s);
    Eigen::VectorXd x = solve_linear(sys, rhs, ctx.opts, "joint mgf");
    ctx.levels.emplace(mask, unpack_states(ctx.c, r, x));
}

}  // namespace

Eigen::VectorXd stationary_distribution(const ShsModel& model) {
    const Compiled c = compile(model);
    const int q_count = c.num_states;
    Eigen::MatrixXd balance = Eigen::MatrixXd::Zero(q_count, q_count);
    for (int q = 0; q < q_count; ++q)
        balance(q, q) += c.out_rate[static_cast<std::size_t>(q)];
    for (const Transition& t : model.transitions()) balance(t.target, t.source) -= t.rate;

    // The generator's columns sum to zero, so rank <= |Q|-1 always; anything
    // below that means the chain decomposes.
    Eigen::FullPivLU<Eigen::MatrixXd> lu(balance);
    if (lu.rank() < q_count - 1)
        fail(ErrorCode::kNotErgodic,
             "chain not ergodic: balance system rank " + std::to_string(lu.rank()) +
                 " < " + std::to_string(q_count - 1));

    Eigen::MatrixXd normalized = balance;
    normalized.row(q_count - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(q_count);
    rhs(q_count - 1) = 1.0;
    Eigen::VectorXd pi = normalized.partialPivLu().solve(rhs);

    const double residual = (balance * pi).cwiseAbs().maxCoeff();
    if (!pi.allFinite() || residual > 1e-9 * std::max(1.0, balance.cwiseAbs().maxCoeff()))
        fail(ErrorCode::kNotErgodic, "chain not ergodic: balance equations unsatisfied");
    if (pi.minCoeff() <= 1e-12)
        fail(ErrorCode::kNotErgodic, "stationary distribution not strictly positive");
    pi /= pi.sum();
    return pi;
}

MomentSolution solve_joint_moments(const ShsModel& model, const Eigen::VectorXd& pi,
                                   const MomentQuery& query, const SolverOptions& opts) {
    check_order_cap(query.order(), opts);
    for (int v : query.m)
        if (v < 0) fail(ErrorCode::kInvalidArgument, "moment powers must be non-negative");
    const Compiled c = compile(model);
    check_size_cap(c, query.order(), opts);
    if (pi.size() != c.num_states)
        fail(ErrorCode::kInvalidArgument, "pi length does not match the state count");
    MomentContext ctx{c, pi, opts, {}, {}};
    const auto& per_state = solve_moment_rec(ctx, query.m);
    MomentSolution out{per_state, aggregate_states(per_state)};
    return out;
}

MgfSolution solve_joint_mgf(const ShsModel& model, const Eigen::VectorXd& pi,
                            const MgfQuery& query, const SolverOptions& opts) {
    const int r = query.order();
    check_order_cap(r, opts);
    if (static_cast<int>(query.s.size()) != r)
        fail(ErrorCode::kInvalidArgument, "s must have one entry per element of K");
    const Compiled c = compile(model);
    check_size_cap(c, r, opts);
    if (pi.size() != c.num_states)
        fail(ErrorCode::kInvalidArgument, "pi length does not match the state count");
    std::vector<int> seen;
    for (int k : query.ages) {
        if (k < 0 || k >= c.n)
            fail(ErrorCode::kInvalidArgument,
                 "age index " + std::to_string(k) + " out of range 0.." + std::to_string(c.n - 1));
        if (std::find(seen.begin(), seen.end(), k) != seen.end())
            fail(ErrorCode::kInvalidArgument, "K has repeated age index " + std::to_string(k));
        seen.push_back(k);
    }

    MgfContext ctx{c, pi, query.s, opts, {}, {}, {}};
    const unsigned full = (r >= 32) ? 0u : ((1u << r) - 1u);
    // Solve every retained-position subset bottom-up; the full mask last.
    std::vector<unsigned> masks;
    for (unsigned mask = 1; mask <= full; ++mask) masks.push_back(mask);
    std::sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) {
        const int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
        return pa != pb ? pa < pb : a < b;
    });
    for (unsigned mask : masks) solve_mgf_level(ctx, mask);

    MgfSolution out{ctx.levels.at(full), aggregate_states(ctx.levels.at(full)), {}, 0.0};
    out.per_state_at_k.reserve(out.per_state.size());
    for (const DenseTensor& t : out.per_state)
        out.per_state_at_k.push_back(t.get(query.ages));
    out.mgf = out.aggregate.get(query.ages);
    return out;
}

StabilityReport stability_check(const ShsModel& model, int order,
                                const std::optional<std::vector<double>>& s,
                                const SolverOptions& opts) {
    check_order_cap(order, opts);
    if (s && static_cast<int>(s->size()) != order)
        fail(ErrorCode::kInvalidArgument, "s must have length equal to the order");
    const Compiled c = compile(model);
    check_size_cap(c, order, opts);
    const LevelGeometry g = level_geometry(c, order);
    double sum_s = 0.0;
    if (s)
        for (double v : *s) sum_s += v;

    StabilityReport report;
    report.max_eig_real = max_real_eigenvalue(-build_system(c, g, sum_s));
    report.stable = report.max_eig_real < -opts.stability_margin;

    // Reducibility is a hard failure (stationary_distribution's error
    // propagates); a failed or non-positive first-moment solve is reported.
    const Eigen::VectorXd pi = stationary_distribution(model);
    report.positive_first_moments = true;
    try {
        MomentContext ctx{c, pi, opts, {}, {}};
        for (int r = 1; r <= order; ++r) {
            const auto& levels = solve_moment_rec(ctx, std::vector<int>(static_cast<std::size_t>(r), 1));
            for (const DenseTensor& t : levels)
                for (double v : t.data())
                    if (v <= opts.positivity_tol) report.positive_first_moments = false;
        }
    } catch (const Error&) {
        report.positive_first_moments = false;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Transient integration
// ---------------------------------------------------------------------------

namespace {

// One coupled ODE level: either a reduced moment vector (all powers >= 1 over
// `positions`) or an MGF subset level (retained positions). Position sets are
// relative to the top-level query.
struct Level {
    std::vector<int> positions;
    std::vector<int> powers;  // moments only; empty for MGF levels
    double sum_s = 0.0;       // MGF only
};

struct Plan {
    bool mgf = false;
    int top_order = 0;
    std::vector<double> s;           // MGF only, aligned to query positions
    std::vector<Level> levels;       // dependency order, top level last
    std::map<std::vector<int>, int> moment_index;  // full m-vector (top order) -> level
    std::map<unsigned, int> mask_index;            // MGF mask -> level
};

struct State {
    Eigen::VectorXd occupancy;
    std::vector<std::vector<DenseTensor>> levels;  // [level][state]

    State& add_scaled(const State& other, double w) {
        occupancy += w * other.occupancy;
        for (std::size_t i = 0; i < levels.size(); ++i)
            for (std::size_t q = 0; q < levels[i].size(); ++q)
                levels[i][q].add_scaled(other.levels[i][q], w);
        return *this;
    }

    double max_abs() const {
        double m = occupancy.cwiseAbs().maxCoeff();
        for (const auto& lv : levels)
            for (const DenseTensor& t : lv) m = std::max(m, t.max_abs());
        return m;
    }
};

std::vector<int> reduced_positions(const std::vector<int>& m) {
    std::vector<int> out;
    for (int j = 0; j < static_cast<int>(m.size()); ++j)
        if (m[static_cast<std::size_t>(j)] > 0) out.push_back(j);
    return out;
}

Plan make_moment_plan(const MomentQuery& query) {
    Plan plan;
    plan.mgf = false;
    plan.top_order = query.order();
    // Enumerate the divisor lattice below m; dedupe by reduced form.
    std::map<std::vector<int>, std::vector<int>> reduced_forms;  // reduced key -> full vector
    std::vector<std::vector<int>> stack{query.m};
    std::map<std::vector<int>, bool> seen;
    while (!stack.empty()) {
        std::vector<int> m = stack.back();
        stack.pop_back();
        if (seen.count(m)) continue;
        seen[m] = true;
        const auto pos = reduced_positions(m);
        if (!pos.empty()) {
            std::vector<int> key;
            for (int j : pos) key.push_back(j), key.push_back(m[static_cast<std::size_t>(j)]);
            reduced_forms.emplace(key, m);
        }
        for (int j = 0; j < static_cast<int>(m.size()); ++j) {
            if (m[static_cast<std::size_t>(j)] == 0) continue;
            std::vector<int> lower = m;
            lower[static_cast<std::size_t>(j)] -= 1;
            stack.push_back(lower);
        }
    }
    // Order by total power so dependencies precede.
    std::vector<std::vector<int>> fulls;
    for (const auto& [key, full] : reduced_forms) fulls.push_back(full);
    std::sort(fulls.begin(), fulls.end(), [](const std::vector<int>& a, const std::vector<int>& b) {
        const int sa = std::accumulate(a.begin(), a.end(), 0);
        const int sb = std::accumulate(b.begin(), b.end(), 0);
        return sa != sb ? sa < sb : a < b;
    });
    for (const auto& full : fulls) {
        Level lv;
        lv.positions = reduced_positions(full);
        for (int j : lv.positions) lv.powers.push_back(full[static_cast<std::size_t>(j)]);
        plan.moment_index[full] = static_cast<int>(plan.levels.size());
        plan.levels.push_back(std::move(lv));
    }
    return plan;
}

Plan make_mgf_plan(const MgfQuery& query) {
    Plan plan;
    plan.mgf = true;
    plan.top_order = query.order();
    plan.s = query.s;
    const int r = query.order();
    std::vector<unsigned> masks;
    for (unsigned mask = 1; mask < (1u << r); ++mask) masks.push_back(mask);
    std::sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) {
        const int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
        return pa != pb ? pa < pb : a < b;
    });
    for (unsigned mask : masks) {
        Level lv;
        for (int j = 0; j < r; ++j)
            if (mask & (1u << j)) {
                lv.positions.push_back(j);
                lv.sum_s += query.s[static_cast<std::size_t>(j)];
            }
        plan.mask_index[mask] = static_cast<int>(plan.levels.size());
        plan.levels.push_back(std::move(lv));
    }
    return plan;
}

// Level lookup for the value feeding position-dropped reads. digits are the
// full-level digits at `positions`; the sub level owns `sub_positions`.
double read_level_at(const State& state, int level_index,
                     const std::vector<int>& parent_positions, const int* parent_digits,
                     const std::vector<int>& sub_positions, int q) {
    const auto& tensors = state.levels[static_cast<std::size_t>(level_index)];
    std::vector<int> digits;
    digits.reserve(sub_positions.size());
    for (int p : sub_positions) {
        const auto it = std::find(parent_positions.begin(), parent_positions.end(), p);
        digits.push_back(parent_digits[it - parent_positions.begin()]);
    }
    return tensors[static_cast<std::size_t>(q)].get(digits);
}

State derivative(const Compiled& c, const Plan& plan,
                 const std::vector<LevelGeometry>& geoms, const State& y) {
    State dy;
    dy.occupancy = Eigen::VectorXd::Zero(c.num_states);
    for (int q = 0; q < c.num_states; ++q)
        dy.occupancy(q) = -c.out_rate[static_cast<std::size_t>(q)] * y.occupancy(q);
    const auto& ts = c.model->transitions();
    for (const Transition& t : ts) dy.occupancy(t.target) += t.rate * y.occupancy(t.source);

    dy.levels.resize(plan.levels.size());
    for (std::size_t li = 0; li < plan.levels.size(); ++li) {
        const Level& lv = plan.levels[li];
        const int r = static_cast<int>(lv.positions.size());
        const LevelGeometry& g = geoms[li];
        dy.levels[li].assign(static_cast<std::size_t>(c.num_states), DenseTensor(r, c.n));
        for (int q = 0; q < c.num_states; ++q) {
            DenseTensor& out = dy.levels[li][static_cast<std::size_t>(q)];
            const DenseTensor& cur = y.levels[li][static_cast<std::size_t>(q)];
            const double decay = plan.mgf ? (lv.sum_s - c.out_rate[static_cast<std::size_t>(q)])
                                          : -c.out_rate[static_cast<std::size_t>(q)];
            for (std::size_t flat = 0; flat < g.count; ++flat)
                out.mutable_data()[flat] = decay * cur.data()[flat];

            if (!plan.mgf) {
                // drift: sum_j m_j * v^(m - e_j), reading reduced levels as needed
                for (int p = 0; p < r; ++p) {
                    std::vector<int> lower_positions = lv.positions;
                    std::vector<int> lower_powers = lv.powers;
                    lower_powers[static_cast<std::size_t>(p)] -= 1;
                    double weight = static_cast<double>(lv.powers[static_cast<std::size_t>(p)]);
                    std::vector<int> sub_positions;
                    for (int j = 0; j < r; ++j)
                        if (lower_powers[static_cast<std::size_t>(j)] > 0)
                            sub_positions.push_back(lower_positions[static_cast<std::size_t>(j)]);
                    int sub_index = -1;
                    if (!sub_positions.empty()) {
                        // locate the lower level by its full m-vector
                        std::vector<int> full(plan.moment_index.begin()->first.size(), 0);
                        for (int j = 0; j < r; ++j)
                            full[static_cast<std::size_t>(lower_positions[static_cast<std::size_t>(j)])] =
                                lower_powers[static_cast<std::size_t>(j)];
                        sub_index = plan.moment_index.at(full);
                    }
                    for (std::size_t flat = 0; flat < g.count; ++flat) {
                        const int* dig = g.digit_row(flat);
                        double v;
                        if (sub_index < 0)
                            v = y.occupancy(q);
                        else
                            v = read_level_at(y, sub_index, lv.positions, dig, sub_positions, q);
                        out.mutable_data()[flat] += weight * v;
                    }
                }
            }

            // incoming reset contractions (and, for MGF, the correction term)
            for (int ti : c.incoming[static_cast<std::size_t>(q)]) {
                const Transition& t = ts[static_cast<std::size_t>(ti)];
                const std::vector<int>& col = c.cols[static_cast<std::size_t>(ti)];
                const auto& pull = g.pull[static_cast<std::size_t>(ti)];
                const auto& src_tensor = y.levels[li][static_cast<std::size_t>(t.source)];
                for (std::size_t flat = 0; flat < g.count; ++flat) {
                    if (pull[flat] >= 0) {
                        out.mutable_data()[flat] +=
                            t.rate * src_tensor.data()[static_cast<std::size_t>(pull[flat])];
                    } else if (plan.mgf) {
                        const int* dig = g.digit_row(flat);
                        std::vector<int> sub_positions;
                        std::vector<int> pulled;
                        for (int p = 0; p < r; ++p) {
                            const int src = col[static_cast<std::size_t>(dig[p])];
                            if (src >= 0) {
                                sub_positions.push_back(lv.positions[static_cast<std::size_t>(p)]);
                                pulled.push_back(src);
                            }
                        }
                        double v;
                        if (sub_positions.empty()) {
                            v = y.occupancy(t.source);
                        } else {
                            unsigned mask = 0;
                            for (int p : sub_positions) mask |= 1u << p;
                            const auto& sub =
                                y.levels[static_cast<std::size_t>(plan.mask_index.at(mask))];
                            v = sub[static_cast<std::size_t>(t.source)].get(pulled);
                        }
                        out.mutable_data()[flat] += t.rate * v;
                    }
                }
            }
        }
    }
    return dy;
}

State make_start(const Compiled& c, const Plan& plan, TransientStart start,
                 const Eigen::VectorXd* pi_hint, const SolverOptions& opts) {
    State y;
    y.levels.resize(plan.levels.size());
    if (start == TransientStart::kEmptySystem) {
        y.occupancy = Eigen::VectorXd::Zero(c.num_states);
        y.occupancy(0) = 1.0;
        for (std::size_t li = 0; li < plan.levels.size(); ++li) {
            const int r = static_cast<int>(plan.levels[li].positions.size());
            for (int q = 0; q < c.num_states; ++q) {
                // zero ages: moments vanish, MGF test functions equal the
                // state indicator
                const double fill = plan.mgf ? y.occupancy(q) : 0.0;
                y.levels[li].emplace_back(r, c.n, fill);
            }
        }
        return y;
    }

    const Eigen::VectorXd pi = pi_hint ? *pi_hint : stationary_distribution(*c.model);
    y.occupancy = pi;
    if (!plan.mgf) {
        MomentContext ctx{c, pi, opts, {}, {}};
        for (std::size_t li = 0; li < plan.levels.size(); ++li) {
            const Level& lv = plan.levels[li];
            y.levels[li] = solve_moment_rec(ctx, lv.powers);
        }
    } else {
        MgfContext ctx{c, pi, plan.s, opts, {}, {}, {}};
        std::vector<unsigned> masks;
        for (const auto& [mask, index] : plan.mask_index) masks.push_back(mask);
        std::sort(masks.begin(), masks.end(), [](unsigned a, unsigned b) {
            const int pa = __builtin_popcount(a), pb = __builtin_popcount(b);
            return pa != pb ? pa < pb : a < b;
        });
        for (unsigned mask : masks) solve_mgf_level(ctx, mask);
        for (const auto& [mask, index] : plan.mask_index)
            y.levels[static_cast<std::size_t>(index)] = ctx.levels.at(mask);
    }
    return y;
}

TransientResult run_transient(const ShsModel& model, const Plan& plan, TransientStart start,
                              const TransientOptions& topts, const SolverOptions& opts) {
    const Compiled c = compile(model);
    check_size_cap(c, std::max(1, plan.top_order), opts);

    double min_rate = std::numeric_limits<double>::infinity();
    double max_out = 0.0;
    for (const Transition& t : model.transitions()) min_rate = std::min(min_rate, t.rate);
    for (double d : c.out_rate) max_out = std::max(max_out, d);
    if (!std::isfinite(min_rate) || max_out <= 0.0)
        fail(ErrorCode::kInvalidArgument, "model has no transitions");

    const double horizon = topts.horizon > 0.0 ? topts.horizon : 50.0 / min_rate;
    const double step = topts.step > 0.0 ? topts.step : 0.01 / max_out;
    if (!(step > 0.0)) fail(ErrorCode::kInvalidArgument, "step must be positive");
    const long nsteps = static_cast<long>(std::ceil(horizon / step));
    const int stride = topts.sample_stride > 0
                           ? topts.sample_stride
                           : static_cast<int>(std::max<long>(1, nsteps / 512));

    std::vector<LevelGeometry> geoms;
    geoms.reserve(plan.levels.size());
    for (const Level& lv : plan.levels)
        geoms.push_back(level_geometry(c, static_cast<int>(lv.positions.size())));

    State y = make_start(c, plan, start, nullptr, opts);

    TransientResult result;
    auto sample = [&](double t) {
        result.times.push_back(t);
        result.occupancy.push_back(y.occupancy);
        if (plan.levels.empty())  // m = 0: the tensor is the constant occupancy
            result.aggregate.push_back(DenseTensor(plan.top_order, c.n, y.occupancy.sum()));
        else
            result.aggregate.push_back(aggregate_states(y.levels.back()));
    };
    sample(0.0);

    for (long i = 0; i < nsteps; ++i) {
        const double h = std::min(step, horizon - static_cast<double>(i) * step);
        State k1 = derivative(c, plan, geoms, y);
        State y2 = y;
        y2.add_scaled(k1, h / 2.0);
        State k2 = derivative(c, plan, geoms, y2);
        State y3 = y;
        y3.add_scaled(k2, h / 2.0);
        State k3 = derivative(c, plan, geoms, y3);
        State y4 = y;
        y4.add_scaled(k3, h);
        State k4 = derivative(c, plan, geoms, y4);
        y.add_scaled(k1, h / 6.0)
            .add_scaled(k2, h / 3.0)
            .add_scaled(k3, h / 3.0)
            .add_scaled(k4, h / 6.0);
        if (y.max_abs() > topts.blowup_norm)
            fail(ErrorCode::kUnstable, "transient blow-up: state norm exceeded " +
                                           std::to_string(topts.blowup_norm));
        if ((i + 1) % stride == 0 || i + 1 == nsteps)
            sample(std::min(horizon, static_cast<double>(i + 1) * step));
    }

    result.final_occupancy = y.occupancy;
    if (plan.levels.empty()) {
        for (int q = 0; q < c.num_states; ++q)
            result.final_per_state.emplace_back(plan.top_order, c.n, y.occupancy(q));
    } else {
        result.final_per_state = y.levels.back();
    }
    return result;
}

}  // namespace

TransientResult transient_integrate(const ShsModel& model, const MomentQuery& query,
                                    TransientStart start, const TransientOptions& topts,
                                    const SolverOptions& opts) {
    check_order_cap(query.order(), opts);
    for (int v : query.m)
        if (v < 0) fail(ErrorCode::kInvalidArgument, "moment powers must be non-negative");
    return run_transient(model, make_moment_plan(query), start, topts, opts);
}

TransientResult transient_integrate(const ShsModel& model, const MgfQuery& query,
                                    TransientStart start, const TransientOptions& topts,
                                    const SolverOptions& opts) {
    check_order_cap(query.order(), opts);
    if (query.s.size() != query.ages.size())
        fail(ErrorCode::kInvalidArgument, "s must have one entry per element of K");
    return run_transient(model, make_mgf_plan(query), start, topts, opts);
}

}  // namespace aoi
