#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aoi/shs.hpp"

namespace aoi {

/// Queueing disciplines for the multi-source single-server updating system:
/// last-come-first-served with no preemption, with source-agnostic preemption
/// in service, and with source-aware preemption in service.
enum class Discipline { kLcfsNp, kLcfsPs, kLcfsSa };

const char* discipline_name(Discipline d);
std::optional<Discipline> discipline_from_name(std::string_view name);

/// Arrival rates of the N sources plus the service rate. Sources are labelled
/// 1..N; lambdas[k-1] is source k's rate.
struct MultiSourceParams {
    std::vector<double> lambdas;
    double mu = 1.0;

    int num_sources() const { return static_cast<int>(lambdas.size()); }
    double lambda(int k) const { return lambdas[static_cast<std::size_t>(k - 1)]; }
    double total_lambda() const;
    double rho() const { return total_lambda() / mu; }
    double rho_k(int k) const { return lambda(k) / mu; }
    /// Sum of rates of all sources outside `z` (1-based labels), over mu.
    double rho_minus(const std::vector<int>& z) const;

    void validate() const;
};

/// Largest N the permutation-sum closed forms accept (|K|! terms).
inline constexpr int kMaxSources = 6;

/// SHS of the chosen discipline: states 0..N (0 = idle, i = serving source
/// i), age vector [x_0, x_1, ..., x_N] with x_0 the in-service age and x_k
/// source k's AoI, transitions exactly per the discipline's transition table
/// (ids match the table's l numbering).
ShsModel build_model(const MultiSourceParams& params, Discipline d);

/// Factor attached to a set z of sources with shift values s aligned to z:
/// (lambda - sum s)(mu - sum s) - mu * lambda_{-z}.
double suffix_factor(const MultiSourceParams& params, const std::vector<int>& z,
                     const std::vector<double>& s);

/// Product of suffix_factor over the suffix sets P(i..end) of a permutation.
/// s_by_source[k-1] is the shift attached to source k (zero when absent).
double chain_product(const MultiSourceParams& params, const std::vector<int>& p,
                     const std::vector<double>& s_by_source);

/// Source-aware chain weight: the telescoping ratio product times the
/// (lambda_last + mu) / (mu * (mu + lambda_last - s_last)) prefactor.
double sa_chain_weight(const MultiSourceParams& params, const std::vector<int>& p,
                       const std::vector<double>& s_by_source);

/// Description of the first failing factor at (K, s), or nullopt when the
/// point sits inside the validity region (the connected component of s = 0
/// where every suffix quadratic and both of its linear factors stay
/// positive). min_margin > 0 additionally rejects points within that
/// fraction of each factor's natural scale.
std::optional<std::string> region_violation(const MultiSourceParams& params, Discipline d,
                                            const std::vector<int>& k_sources,
                                            const std::vector<double>& s,
                                            double min_margin = 0.0);

/// Stationary joint MGF E[exp(sum_j s_j x_{K(j)})] of the AoI processes of
/// the (distinct) sources in k_sources; s is raw (1/time units), aligned to
/// k_sources. Throws kOutOfRegion naming the first non-positive factor.
double joint_mgf(const MultiSourceParams& params, Discipline d, const std::vector<int>& k_sources,
                 const std::vector<double>& s);

/// Marginal stationary MGF of source k's AoI at the normalized argument
/// s_bar = s / mu.
double marginal_mgf(const MultiSourceParams& params, Discipline d, int k, double s_bar);

struct SourceMoments {
    double mean = 0.0;
    double second_moment = 0.0;
};

SourceMoments moments(const MultiSourceParams& params, Discipline d, int k);
double cross_moment(const MultiSourceParams& params, Discipline d, int k1, int k2);

/// Pearson correlation coefficient of the AoI processes of sources k1, k2.
double correlation(const MultiSourceParams& params, Discipline d, int k1, int k2);

/// Server utilization at which the symmetric two-source LCFS-NP correlation
/// changes sign: the unique root > 2/sqrt(3) of rho^3 - 4 rho - 2.
double rho_threshold_np();

}  // namespace aoi
