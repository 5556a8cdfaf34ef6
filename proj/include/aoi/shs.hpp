#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace aoi {

/// Binary reset map applied at a transition as x' = x * A. A zero column j
/// resets age j to 0; a column equal to e_i copies age i into slot j. Valid
/// maps have at most a single 1 per column.
class ResetMap {
public:
    ResetMap() = default;
    explicit ResetMap(Eigen::MatrixXd m) : matrix_(std::move(m)) {}

    /// Build from the compact column form: column[j] = source row index, or
    /// -1 for a zero column.
    static ResetMap from_columns(const std::vector<int>& columns);

    const Eigen::MatrixXd& matrix() const { return matrix_; }
    int dim() const { return static_cast<int>(matrix_.rows()); }

    /// Column form when the map is a valid binary single-1-per-column matrix;
    /// nullopt otherwise.
    std::optional<std::vector<int>> column_form() const;

private:
    Eigen::MatrixXd matrix_;
};

struct Transition {
    int id = 0;
    int source = 0;
    int target = 0;
    double rate = 0.0;
    ResetMap reset;
};

struct Violation {
    int transition_id;
    std::string reason;
};

/// Piecewise-linear SHS: a finite discrete state space, an age vector of
/// fixed dimension growing at unit rate, and rate-labelled transitions each
/// carrying a binary reset map. Immutable after construction.
class ShsModel {
public:
    ShsModel(int num_states, int age_dim, std::vector<Transition> transitions);

    int num_states() const { return num_states_; }
    int age_dim() const { return age_dim_; }
    const std::vector<Transition>& transitions() const { return transitions_; }

    /// Structural checks; returns every violation with the offending
    /// transition id. Empty result means the model is valid.
    std::vector<Violation> validate() const;

    /// Throws kValidation listing the violations when validate() is nonempty.
    void require_valid() const;

    std::vector<Transition> outgoing(int state) const;
    std::vector<Transition> incoming(int state) const;

    double total_outgoing_rate(int state) const;

    std::string to_json() const;
    static ShsModel from_json(const std::string& text);
    void save(const std::string& path) const;
    static ShsModel load(const std::string& path);

    bool operator==(const ShsModel& other) const;

private:
    void check_state(int state) const;

    int num_states_;
    int age_dim_;
    std::vector<Transition> transitions_;
};

}  // namespace aoi
