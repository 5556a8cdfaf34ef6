#include "aoi/disciplines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "aoi/error.hpp"

namespace aoi {

const char* discipline_name(Discipline d) {
    switch (d) {
        case Discipline::kLcfsNp: return "np";
        case Discipline::kLcfsPs: return "ps";
        case Discipline::kLcfsSa: return "sa";
    }
    return "?";
}

std::optional<Discipline> discipline_from_name(std::string_view name) {
    if (name == "np" || name == "lcfs-np") return Discipline::kLcfsNp;
    if (name == "ps" || name == "lcfs-ps") return Discipline::kLcfsPs;
    if (name == "sa" || name == "lcfs-sa") return Discipline::kLcfsSa;
    return std::nullopt;
}

double MultiSourceParams::total_lambda() const {
    return std::accumulate(lambdas.begin(), lambdas.end(), 0.0);
}

double MultiSourceParams::rho_minus(const std::vector<int>& z) const {
    double sum = 0.0;
    for (int k = 1; k <= num_sources(); ++k)
        if (std::find(z.begin(), z.end(), k) == z.end()) sum += lambda(k);
    return sum / mu;
}

void MultiSourceParams::validate() const {
    if (lambdas.empty()) fail(ErrorCode::kInvalidArgument, "at least one source required");
    if (num_sources() > kMaxSources)
        fail(ErrorCode::kInvalidArgument,
             "N = " + std::to_string(num_sources()) + " exceeds the closed-form cap of " +
                 std::to_string(kMaxSources) + " sources");
    for (double l : lambdas)
        if (!(l > 0.0) || !std::isfinite(l))
            fail(ErrorCode::kInvalidArgument, "arrival rates must be positive and finite");
    if (!(mu > 0.0) || !std::isfinite(mu))
        fail(ErrorCode::kInvalidArgument, "service rate must be positive and finite");
}

namespace {

// Column maps for the two reset shapes of Tables 2-4 (0-based ages,
// x_0 = in-service age). Arrivals and preemptions zero x_0 and keep the AoIs;
// a delivery from source i copies x_0 into x_i, zeros x_0, keeps the rest.
std::vector<int> arrival_columns(int n_sources) {
    std::vector<int> cols(static_cast<std::size_t>(n_sources) + 1);
    cols[0] = -1;
    for (int j = 1; j <= n_sources; ++j) cols[static_cast<std::size_t>(j)] = j;
    return cols;
}

std::vector<int> delivery_columns(int n_sources, int source) {
    std::vector<int> cols = arrival_columns(n_sources);
    cols[static_cast<std::size_t>(source)] = 0;
    return cols;
}

void check_sources(const MultiSourceParams& params, const std::vector<int>& k_sources) {
    const int n = params.num_sources();
    std::vector<int> seen;
    for (int k : k_sources) {
        if (k < 1 || k > n)
            fail(ErrorCode::kInvalidArgument,
                 "source " + std::to_string(k) + " out of range 1.." + std::to_string(n));
        if (std::find(seen.begin(), seen.end(), k) != seen.end())
            fail(ErrorCode::kInvalidArgument, "K has repeated source " + std::to_string(k));
        seen.push_back(k);
    }
    if (k_sources.empty()) fail(ErrorCode::kInvalidArgument, "K must be non-empty");
}

std::vector<double> spread_by_source(const MultiSourceParams& params,
                                     const std::vector<int>& k_sources,
                                     const std::vector<double>& s) {
    if (s.size() != k_sources.size())
        fail(ErrorCode::kInvalidArgument, "s must have one entry per element of K");
    std::vector<double> by_source(static_cast<std::size_t>(params.num_sources()), 0.0);
    for (std::size_t j = 0; j < k_sources.size(); ++j)
        by_source[static_cast<std::size_t>(k_sources[j] - 1)] = s[j];
    return by_source;
}

// Lexicographic enumeration of all permutations of k_sources, invoking fn on
// each. |K| <= kMaxSources keeps this at <= 720 terms.
template <typename Fn>
void for_each_permutation(std::vector<int> elems, Fn&& fn) {
    std::sort(elems.begin(), elems.end());
    do {
        fn(elems);
    } while (std::next_permutation(elems.begin(), elems.end()));
}

}  // namespace

ShsModel build_model(const MultiSourceParams& params, Discipline d) {
    params.validate();
    const int n = params.num_sources();
    std::vector<Transition> ts;
    switch (d) {
        case Discipline::kLcfsNp:
            for (int i = 1; i <= n; ++i) {
                ts.push_back({2 * i - 1, 0, i, params.lambda(i),
                              ResetMap::from_columns(arrival_columns(n))});
                ts.push_back({2 * i, i, 0, params.mu,
                              ResetMap::from_columns(delivery_columns(n, i))});
            }
            break;
        case Discipline::kLcfsPs:
            for (int i = 1; i <= n; ++i) {
                const int base = (2 + n) * i - (n + 1);
                ts.push_back({base, 0, i, params.lambda(i),
                              ResetMap::from_columns(arrival_columns(n))});
                ts.push_back({base + 1, i, 0, params.mu,
                              ResetMap::from_columns(delivery_columns(n, i))});
                for (int j = 1; j <= n; ++j)
                    ts.push_back({base + 1 + j, i, j, params.lambda(j),
                                  ResetMap::from_columns(arrival_columns(n))});
            }
            break;
        case Discipline::kLcfsSa:
            for (int i = 1; i <= n; ++i) {
                ts.push_back({3 * i - 2, 0, i, params.lambda(i),
                              ResetMap::from_columns(arrival_columns(n))});
                ts.push_back({3 * i - 1, i, 0, params.mu,
                              ResetMap::from_columns(delivery_columns(n, i))});
                ts.push_back({3 * i, i, i, params.lambda(i),
                              ResetMap::from_columns(arrival_columns(n))});
            }
            break;
    }
    std::sort(ts.begin(), ts.end(),
              [](const Transition& a, const Transition& b) { return a.id < b.id; });
    return ShsModel(n + 1, n + 1, std::move(ts));
}

double suffix_factor(const MultiSourceParams& params, const std::vector<int>& z,
                     const std::vector<double>& s) {
    if (s.size() != z.size())
        fail(ErrorCode::kInvalidArgument, "s must have one entry per element of Z");
    const double s_sum = std::accumulate(s.begin(), s.end(), 0.0);
    const double lambda = params.total_lambda();
    const double lambda_minus = params.rho_minus(z) * params.mu;
    return (lambda - s_sum) * (params.mu - s_sum) - params.mu * lambda_minus;
}

namespace {

double suffix_factor_by_source(const MultiSourceParams& params, const std::vector<int>& p,
                               std::size_t start, const std::vector<double>& s_by_source) {
    std::vector<int> z(p.begin() + static_cast<std::ptrdiff_t>(start), p.end());
    std::vector<double> s;
    s.reserve(z.size());
    for (int k : z) s.push_back(s_by_source[static_cast<std::size_t>(k - 1)]);
    return suffix_factor(params, z, s);
}

}  // namespace

double chain_product(const MultiSourceParams& params, const std::vector<int>& p,
                     const std::vector<double>& s_by_source) {
    double prod = 1.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        prod *= suffix_factor_by_source(params, p, i, s_by_source);
    return prod;
}

double sa_chain_weight(const MultiSourceParams& params, const std::vector<int>& p,
                       const std::vector<double>& s_by_source) {
    const double mu = params.mu;
    const int last = p.back();
    const double lambda_last = params.lambda(last);
    const double s_last = s_by_source[static_cast<std::size_t>(last - 1)];
    double w = (lambda_last + mu) / mu / (mu + lambda_last - s_last);
    double tail = s_last;  // sum of s over p(i+1..end), built back to front
    for (std::size_t i = p.size() - 1; i-- > 0;) {
        const double li = params.lambda(p[i]);
        const double si = s_by_source[static_cast<std::size_t>(p[i] - 1)];
        w *= (mu + li - tail) / (mu + li - (tail + si));
        tail += si;
    }
    return w;
}

std::optional<std::string> region_violation(const MultiSourceParams& params, Discipline d,
                                            const std::vector<int>& k_sources,
                                            const std::vector<double>& s, double min_margin) {
    const auto s_by_source = spread_by_source(params, k_sources, s);
    const double mu = params.mu;
    const double lambda = params.total_lambda();

    // The operational region is the connected component of s = 0: every
    // permutation-suffix quadratic c must stay positive together with both of
    // its linear factors, which bounds each partial sum left of the first
    // root (c is negative at min(lambda, mu) whenever sources remain outside
    // the suffix).
    std::optional<std::string> violation;
    auto flag = [&](const std::string& what, double value, double scale) {
        if (violation) return false;
        if (value > min_margin * scale) return false;
        std::ostringstream oss;
        oss << what << " = " << value << " <= " << min_margin * scale;
        violation = oss.str();
        return true;
    };
    auto suffix_name = [](const std::vector<int>& p, std::size_t i) {
        std::ostringstream oss;
        for (std::size_t j = i; j < p.size(); ++j) oss << (j > i ? "," : "") << p[j];
        return oss.str();
    };

    for_each_permutation(k_sources, [&](const std::vector<int>& p) {
        if (violation) return;
        double tail = 0.0;  // sum of s over the suffix p(i..end)
        for (std::size_t i = p.size(); i-- > 0;) {
            tail += s_by_source[static_cast<std::size_t>(p[i] - 1)];
            const std::string name = suffix_name(p, i);
            if (flag("factor (lambda - sum s) over {" + name + "}", lambda - tail, mu)) return;
            if (flag("factor (mu - sum s) over {" + name + "}", mu - tail, mu)) return;
            const double c = suffix_factor_by_source(params, p, i, s_by_source);
            if (flag("suffix factor c_{" + name + "}", c, mu * mu)) return;
        }
        if (d == Discipline::kLcfsSa) {
            double sa_tail = 0.0;
            for (std::size_t i = p.size(); i-- > 0;) {
                const double li = params.lambda(p[i]);
                const double si = s_by_source[static_cast<std::size_t>(p[i] - 1)];
                if (flag("factor (mu + lambda_" + std::to_string(p[i]) + " - sum s)",
                         mu + li - (sa_tail + si), mu))
                    return;
                sa_tail += si;
            }
        }
    });
    return violation;
}

double joint_mgf(const MultiSourceParams& params, Discipline d, const std::vector<int>& k_sources,
                 const std::vector<double>& s) {
    params.validate();
    check_sources(params, k_sources);
    if (auto bad = region_violation(params, d, k_sources, s))
        fail(ErrorCode::kOutOfRegion, "s outside validity region: " + *bad);

    const auto s_by_source = spread_by_source(params, k_sources, s);
    const double mu = params.mu;
    const double lambda = params.total_lambda();
    const double s_sum = std::accumulate(s.begin(), s.end(), 0.0);

    double rate_product = 1.0;
    for (int k : k_sources) rate_product *= mu * params.lambda(k);

    double perm_sum = 0.0;
    for_each_permutation(k_sources, [&](const std::vector<int>& p) {
        const double c = chain_product(params, p, s_by_source);
        if (d == Discipline::kLcfsSa)
            perm_sum += sa_chain_weight(params, p, s_by_source) / c;
        else
            perm_sum += 1.0 / c;
    });

    switch (d) {
        case Discipline::kLcfsNp:
            return rate_product * (mu / (lambda + mu)) * (1.0 + lambda / (mu - s_sum)) * perm_sum;
        case Discipline::kLcfsPs:
            return rate_product * perm_sum;
        case Discipline::kLcfsSa:
            return rate_product * (mu / (lambda + mu)) * (lambda + mu - s_sum) * perm_sum;
    }
    fail(ErrorCode::kInternal, "unreachable discipline");
}

double marginal_mgf(const MultiSourceParams& params, Discipline d, int k, double s_bar) {
    params.validate();
    check_sources(params, {k});
    if (auto bad = region_violation(params, d, {k}, {s_bar * params.mu}))
        fail(ErrorCode::kOutOfRegion, "s outside validity region: " + *bad);

    const double rho = params.rho();
    const double rho_k = params.rho_k(k);
    const double rho_mk = rho - rho_k;
    const double marginal_den = (1.0 - s_bar) * (rho - s_bar) - rho_mk;
    switch (d) {
        case Discipline::kLcfsNp:
            return rho_k * (1.0 + rho - s_bar) /
                   ((1.0 + rho) * (1.0 - s_bar) * marginal_den);
        case Discipline::kLcfsPs:
            return rho_k / marginal_den;
        case Discipline::kLcfsSa:
            return rho_k * (1.0 + rho_k) * (1.0 + rho - s_bar) /
                   ((1.0 + rho) * (1.0 + rho_k - s_bar) * marginal_den);
    }
    fail(ErrorCode::kInternal, "unreachable discipline");
}

SourceMoments moments(const MultiSourceParams& params, Discipline d, int k) {
    params.validate();
    check_sources(params, {k});
    const double mu = params.mu;
    const double rho = params.rho();
    const double rk = params.rho_k(k);
    const double rmk = rho - rk;
    SourceMoments out;
    switch (d) {
        case Discipline::kLcfsNp:
            out.mean = (1.0 + rho) / (mu * rk) + rho / (mu * (1.0 + rho));
            out.second_moment = 2.0 * (rk * rk * rho + rk * (rho * rho - 1.0) + std::pow(1.0 + rho, 3)) /
                                (mu * mu * rk * rk * (1.0 + rho));
            break;
        case Discipline::kLcfsPs:
            out.mean = (1.0 + rho) / (mu * rk);
            out.second_moment = 2.0 * ((1.0 + rho) * (1.0 + rho) - rk) / (mu * mu * rk * rk);
            break;
        case Discipline::kLcfsSa:
            out.mean = ((1.0 + rho) * (1.0 + rho) * (1.0 + rk) + rk * rmk) /
                       (mu * rk * (1.0 + rk) * (1.0 + rho));
            out.second_moment =
                2.0 *
                (-std::pow(rk, 3) * (3.0 + 2.0 * rho) +
                 rk * rk * (std::pow(rho, 3) + 4.0 * rho * rho + 2.0 * rho - 2.0) +
                 rk * (1.0 + rho) * (2.0 * rho * rho + 5.0 * rho + 1.0) + std::pow(1.0 + rho, 3)) /
                (mu * mu * rk * rk * (1.0 + rk) * (1.0 + rk) * (1.0 + rho));
            break;
    }
    return out;
}

double cross_moment(const MultiSourceParams& params, Discipline d, int k1, int k2) {
    params.validate();
    check_sources(params, {k1, k2});
    const double mu = params.mu;
    const double rho = params.rho();
    const double r1 = params.rho_k(k1);
    const double r2 = params.rho_k(k2);
    const double rs = r1 + r2;
    switch (d) {
        case Discipline::kLcfsNp:
            return (rho * (1.0 + rho) * rs * rs +
                    rs * (std::pow(1.0 + rho, 3) + 2.0 * rho * r1 * r2) -
                    2.0 * r1 * r2 * (1.0 + rho)) /
                   (mu * mu * r1 * r2 * (1.0 + rho) * rs);
        case Discipline::kLcfsPs:
            return ((1.0 + rho) * (1.0 + rho) * rs - 2.0 * r1 * r2) / (mu * mu * r1 * r2 * rs);
        case Discipline::kLcfsSa: {
            const double q = r1 * r2;
            const double a3 = -2.0 * (1.0 + rho);
            const double a2 =
                rs * (-(2.0 + rho) * rs + (std::pow(rho, 3) + 5.0 * rho * rho + 5.0 * rho - 1.0));
            const double a1 = -(2.0 * rho + 3.0) * std::pow(rs, 3) +
                              rs * rs * (2.0 * std::pow(rho, 3) + 9.0 * rho * rho + 9.0 * rho - 1.0) +
                              2.0 * rs * rho * (rho + 2.0) * (rho + 2.0) - 2.0 * (1.0 + rho);
            const double a0 = (1.0 + rho) * rs * (1.0 + rs) *
                              (-rs * rs + rs * ((1.0 + rho) * (1.0 + rho) + rho) +
                               (1.0 + rho) * (1.0 + rho));
            const double num = a0 + q * (a1 + q * (a2 + q * a3));
            return num / (mu * mu * q * (1.0 + r1) * (1.0 + r1) * (1.0 + r2) * (1.0 + r2) *
                          (1.0 + rho) * rs);
        }
    }
    fail(ErrorCode::kInternal, "unreachable discipline");
}

double correlation(const MultiSourceParams& params, Discipline d, int k1, int k2) {
    params.validate();
    check_sources(params, {k1, k2});
    const double rho = params.rho();
    const double r1 = params.rho_k(k1);
    const double r2 = params.rho_k(k2);
    const double rs = r1 + r2;
    switch (d) {
        case Discipline::kLcfsNp: {
            // Covariance numerator assembled from the non-preemptive moment
            // formulas (collapses to rho^3 - 4 rho - 2 times rho_1 rho_2 in
            // the symmetric two-source case).
            const double num =
                r1 * r2 * (rs * rho * (rho + 2.0) - 2.0 * (1.0 + rho) * (1.0 + rho));
            auto varf = [&](double ri, double rmi) {
                return (1.0 + rho) * (1.0 + rho) * (rho * rho + 2.0 * rmi + 1.0) +
                       ri * ri * rho * (rho + 2.0);
            };
            return num / (rs * std::sqrt(varf(r1, rho - r1) * varf(r2, rho - r2)));
        }
        case Discipline::kLcfsPs:
            return -2.0 * r1 * r2 /
                   (rs * std::sqrt((rho * rho + 2.0 * (rho - r1) + 1.0) *
                                   (rho * rho + 2.0 * (rho - r2) + 1.0)));
        case Discipline::kLcfsSa: {
            const double g = r1 * r1 * r2 * r2 * (rs + 2.0 * (1.0 + rho) * (1.0 + rho)) +
                             r1 * r2 * rs * (2.0 * rs + 3.0 * rho * rho + 6.0 * rho + 5.0) +
                             std::pow(rs, 3) + 2.0 * rs * rs * (rho * rho + 2.0 * rho + 2.0) +
                             rs * (3.0 * rho * rho + 6.0 * rho + 4.0) +
                             2.0 * (1.0 + rho) * (1.0 + rho);
            auto f = [&](double ri) {
                const double rmi = rho - ri;
                return std::pow(ri, 3) * (rho + rmi) +
                       ri * ri * (std::pow(rho, 3) * (rho + 2.0) +
                                  rmi * (2.0 * rho * rho + 9.0 * rho + 8.0)) +
                       ri * (rho * (2.0 * rho + 1.0) * (1.0 + rho) * (1.0 + rho) +
                             rmi * (2.0 * rho + 3.0) + rmi * rmi * (3.0 * rho + 4.0)) +
                       std::pow(1.0 + rho, 4);
            };
            return -r1 * r2 * g / (rs * (1.0 + r1) * (1.0 + r2) * std::sqrt(f(r1) * f(r2)));
        }
    }
    fail(ErrorCode::kInternal, "unreachable discipline");
}

double rho_threshold_np() {
    auto poly = [](double r) { return r * r * r - 4.0 * r - 2.0; };
    double lo = 2.0, hi = 3.0;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (poly(mid) < 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace aoi
