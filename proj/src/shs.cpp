#include "aoi/shs.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "aoi/error.hpp"

namespace aoi {

ResetMap ResetMap::from_columns(const std::vector<int>& columns) {
    const int n = static_cast<int>(columns.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (int j = 0; j < n; ++j) {
        if (columns[j] < 0) continue;
        if (columns[j] >= n)
            fail(ErrorCode::kInvalidArgument,
                 "reset column " + std::to_string(j) + " points at row " +
                     std::to_string(columns[j]) + " outside dimension " + std::to_string(n));
        m(columns[j], j) = 1.0;
    }
    return ResetMap(std::move(m));
}

std::optional<std::vector<int>> ResetMap::column_form() const {
    const int n = dim();
    std::vector<int> cols(n, -1);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double v = matrix_(i, j);
            if (v == 0.0) continue;
            if (v != 1.0) return std::nullopt;
            if (cols[j] != -1) return std::nullopt;
            cols[j] = i;
        }
    }
    return cols;
}

ShsModel::ShsModel(int num_states, int age_dim, std::vector<Transition> transitions)
    : num_states_(num_states), age_dim_(age_dim), transitions_(std::move(transitions)) {
    if (num_states_ < 1) fail(ErrorCode::kInvalidArgument, "num_states must be >= 1");
    if (age_dim_ < 1) fail(ErrorCode::kInvalidArgument, "age_dim must be >= 1");
}

std::vector<Violation> ShsModel::validate() const {
    std::vector<Violation> out;
    for (const Transition& t : transitions_) {
        if (!(t.rate > 0.0) || !std::isfinite(t.rate))
            out.push_back({t.id, "non-positive rate"});
        if (t.source < 0 || t.source >= num_states_)
            out.push_back({t.id, "source state " + std::to_string(t.source) + " out of range"});
        if (t.target < 0 || t.target >= num_states_)
            out.push_back({t.id, "target state " + std::to_string(t.target) + " out of range"});
        const Eigen::MatrixXd& m = t.reset.matrix();
        if (m.rows() != age_dim_ || m.cols() != age_dim_) {
            out.push_back({t.id, "reset matrix is " + std::to_string(m.rows()) + "x" +
                                     std::to_string(m.cols()) + ", expected " +
                                     std::to_string(age_dim_) + "x" + std::to_string(age_dim_)});
            continue;
        }
        for (int j = 0; j < age_dim_; ++j) {
            int ones = 0;
            bool binary = true;
            for (int i = 0; i < age_dim_; ++i) {
                const double v = m(i, j);
                if (v == 1.0)
                    ++ones;
                else if (v != 0.0)
                    binary = false;
            }
            if (!binary)
                out.push_back({t.id, "reset column " + std::to_string(j) + " has a non-binary entry"});
            if (ones > 1)
                out.push_back({t.id, "reset column " + std::to_string(j) + " has " +
                                         std::to_string(ones) + " ones (at most one allowed)"});
        }
    }
    return out;
}

void ShsModel::require_valid() const {
    const auto violations = validate();
    if (violations.empty()) return;
    std::ostringstream oss;
    oss << "invalid model:";
    for (const Violation& v : violations)
        oss << " [transition " << v.transition_id << ": " << v.reason << "]";
    fail(ErrorCode::kValidation, oss.str());
}

void ShsModel::check_state(int state) const {
    if (state < 0 || state >= num_states_)
        fail(ErrorCode::kInvalidArgument, "state " + std::to_string(state) + " out of range");
}

std::vector<Transition> ShsModel::outgoing(int state) const {
    check_state(state);
    std::vector<Transition> out;
    for (const Transition& t : transitions_)
        if (t.source == state) out.push_back(t);
    return out;
}

std::vector<Transition> ShsModel::incoming(int state) const {
    check_state(state);
    std::vector<Transition> out;
    for (const Transition& t : transitions_)
        if (t.target == state) out.push_back(t);
    return out;
}

double ShsModel::total_outgoing_rate(int state) const {
    check_state(state);
    double sum = 0.0;
    for (const Transition& t : transitions_)
        if (t.source == state) sum += t.rate;
    return sum;
}

namespace {

nlohmann::json reset_to_json(const ResetMap& reset) {
    const auto cols = reset.column_form();
    if (!cols)
        fail(ErrorCode::kValidation, "reset map is not in binary single-1-per-column form");
    nlohmann::json arr = nlohmann::json::array();
    for (int c : *cols) {
        if (c < 0)
            arr.push_back(nullptr);
        else
            arr.push_back(c);
    }
    return arr;
}

ResetMap reset_from_json(const nlohmann::json& arr, int age_dim) {
    if (!arr.is_array() || static_cast<int>(arr.size()) != age_dim)
        fail(ErrorCode::kParse, "reset must be an array of " + std::to_string(age_dim) + " columns");
    std::vector<int> cols;
    cols.reserve(arr.size());
    for (const auto& e : arr) {
        if (e.is_null())
            cols.push_back(-1);
        else if (e.is_number_integer())
            cols.push_back(e.get<int>());
        else
            fail(ErrorCode::kParse, "reset column must be null or an integer row index");
    }
    return ResetMap::from_columns(cols);
}

}  // namespace

std::string ShsModel::to_json() const {
    nlohmann::json j;
    j["num_states"] = num_states_;
    j["age_dim"] = age_dim_;
    nlohmann::json arr = nlohmann::json::array();
    for (const Transition& t : transitions_) {
        nlohmann::json tj;
        tj["id"] = t.id;
        tj["source"] = t.source;
        tj["target"] = t.target;
        tj["rate"] = t.rate;
        tj["reset"] = reset_to_json(t.reset);
        arr.push_back(std::move(tj));
    }
    j["transitions"] = std::move(arr);
    return j.dump(2);
}

ShsModel ShsModel::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kParse, std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        const int num_states = j.at("num_states").get<int>();
        const int age_dim = j.at("age_dim").get<int>();
        std::vector<Transition> transitions;
        for (const auto& tj : j.at("transitions")) {
            Transition t;
            t.id = tj.at("id").get<int>();
            t.source = tj.at("source").get<int>();
            t.target = tj.at("target").get<int>();
            t.rate = tj.at("rate").get<double>();
            t.reset = reset_from_json(tj.at("reset"), age_dim);
            transitions.push_back(std::move(t));
        }
        return ShsModel(num_states, age_dim, std::move(transitions));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kParse, std::string("bad model document: ") + e.what());
    }
}

void ShsModel::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) fail(ErrorCode::kIo, "cannot open " + path + " for writing");
    out << to_json() << "\n";
    if (!out) fail(ErrorCode::kIo, "failed writing " + path);
}

ShsModel ShsModel::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::kIo, "cannot open " + path);
    std::ostringstream oss;
    oss << in.rdbuf();
    return from_json(oss.str());
}

bool ShsModel::operator==(const ShsModel& other) const {
    if (num_states_ != other.num_states_ || age_dim_ != other.age_dim_ ||
        transitions_.size() != other.transitions_.size())
        return false;
    for (std::size_t i = 0; i < transitions_.size(); ++i) {
        const Transition& a = transitions_[i];
        const Transition& b = other.transitions_[i];
        if (a.id != b.id || a.source != b.source || a.target != b.target || a.rate != b.rate)
            return false;
        if (a.reset.matrix() != b.reset.matrix()) return false;
    }
    return true;
}

}  // namespace aoi
