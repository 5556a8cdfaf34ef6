#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "aoi/shs.hpp"
#include "aoi/tensor.hpp"

namespace aoi {

/// Joint-moment request: m[j] is the power attached to position j. Solving m
/// requires every m - e_j first; the recursion bottoms out at m = 0.
struct MomentQuery {
    std::vector<int> m;
    int order() const { return static_cast<int>(m.size()); }
};

/// Joint-MGF request: distinct age indices (0-based positions in the age
/// vector) and the coefficient attached to each.
struct MgfQuery {
    std::vector<int> ages;
    std::vector<double> s;
    int order() const { return static_cast<int>(ages.size()); }
};

struct MomentSolution {
    std::vector<DenseTensor> per_state;  // one order-r tensor per discrete state
    DenseTensor aggregate;               // sum over states
};

struct MgfSolution {
    std::vector<DenseTensor> per_state;
    DenseTensor aggregate;
    std::vector<double> per_state_at_k;  // tensor entries at the query multi-index
    double mgf = 0.0;                    // aggregate at the query multi-index
};

struct StabilityReport {
    double max_eig_real = 0.0;
    bool stable = false;
    bool positive_first_moments = false;
};

struct SolverOptions {
    int max_order = 4;              // cap on tensor order (memory is n^r)
    long max_unknowns = 8192;       // cap on |Q| * n^r (dense solves)
    double stability_margin = 1e-9; // eigenvalues must sit below -margin
    double positivity_tol = 1e-12;
    double residual_tol = 1e-9;
    bool check_stability = true;    // eigen-precheck inside solve_joint_mgf
};

/// Stationary distribution of the embedded Markov chain from the global
/// balance equations. Throws kNotErgodic when the balance system is reducible
/// (rank below |Q|-1) or the solution is not strictly positive.
Eigen::VectorXd stationary_distribution(const ShsModel& model);

/// Fixed point of the joint-moment equations for the power vector m: per
/// state, the order-r tensor over all multi-indices of that cardinality, plus
/// the aggregate. Positions with m_j = 0 are filled by replicating the
/// lower-cardinality solution; the base case m = 0 is the tensor constant at
/// pi_q.
MomentSolution solve_joint_moments(const ShsModel& model, const Eigen::VectorXd& pi,
                                   const MomentQuery& query, const SolverOptions& opts = {});

/// Fixed point of the joint-MGF equations at (ages, s), assembling the
/// correction term recursively over retained-position subsets (memoized per
/// call). Returns per-state tensors plus the per-state values and aggregate
/// at the query multi-index.
MgfSolution solve_joint_mgf(const ShsModel& model, const Eigen::VectorXd& pi,
                            const MgfQuery& query, const SolverOptions& opts = {});

/// Spectrum check of the order-r coupling matrix (incoming reset contractions
/// minus diagonal outgoing rates, shifted by sum(s) when s is given), plus
/// strict positivity of the all-ones first-moment fixed points of orders
/// 1..r.
StabilityReport stability_check(const ShsModel& model, int order,
                                const std::optional<std::vector<double>>& s = std::nullopt,
                                const SolverOptions& opts = {});

enum class TransientStart {
    kEmptySystem,  // q(0) = 0, x(0) = 0
    kStationary,   // all levels at their fixed points
};

struct TransientOptions {
    double horizon = -1.0;      // default: 50 / min transition rate
    double step = -1.0;         // default: 0.01 / max total outgoing rate
    int sample_stride = 0;      // default: about 512 samples over the horizon
    double blowup_norm = 1e12;  // divergence guard
};

struct TransientResult {
    std::vector<double> times;
    std::vector<Eigen::VectorXd> occupancy;   // v^(0) per sample
    std::vector<DenseTensor> aggregate;       // summed top-level tensor per sample
    Eigen::VectorXd final_occupancy;
    std::vector<DenseTensor> final_per_state; // top-level tensors at the horizon
};

/// Classical fixed-step RK4 integration of the coupled ODE family (state
/// occupancies, every lower-order level, and the requested level, advanced
/// jointly). Throws kUnstable ("transient blow-up") when the state norm
/// exceeds the configured bound.
TransientResult transient_integrate(const ShsModel& model, const MomentQuery& query,
                                    TransientStart start, const TransientOptions& topts = {},
                                    const SolverOptions& opts = {});
TransientResult transient_integrate(const ShsModel& model, const MgfQuery& query,
                                    TransientStart start, const TransientOptions& topts = {},
                                    const SolverOptions& opts = {});

}  // namespace aoi
