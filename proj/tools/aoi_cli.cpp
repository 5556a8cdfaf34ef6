// Command-line front end for the AoI joint-analysis library. Talks to the
// shared library exclusively through the C API in aoi/aoi.h.
//
// Exit codes: 0 ok, 2 config error, 3 out-of-region query, 4 solver
// instability or ergodicity failure, 5 simulation guard tripped.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "aoi/aoi.h"

using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitOutOfRegion = 3;
constexpr int kExitUnstable = 4;
constexpr int kExitSimGuard = 5;
constexpr int kExitInternal = 1;

int status_exit_code(aoi_status s) {
    switch (s) {
        case AOI_OK: return kExitOk;
        case AOI_ERR_INVALID_ARGUMENT:
        case AOI_ERR_PARSE:
        case AOI_ERR_VALIDATION:
        case AOI_ERR_IO: return kExitConfig;
        case AOI_ERR_OUT_OF_REGION: return kExitOutOfRegion;
        case AOI_ERR_UNSTABLE:
        case AOI_ERR_NOT_ERGODIC: return kExitUnstable;
        case AOI_ERR_SIM_GUARD: return kExitSimGuard;
        default: return kExitInternal;
    }
}

int emit_error(const std::string& code, const std::string& message, int exit_code,
               const std::string& field = "") {
    json err;
    err["error"]["code"] = code;
    err["error"]["message"] = message;
    err["error"]["exit"] = exit_code;
    if (!field.empty()) err["error"]["field"] = field;
    std::cerr << err.dump() << "\n";
    return exit_code;
}

int emit_status_error(aoi_status s) {
    return emit_error(aoi_status_name(s), aoi_last_error(), status_exit_code(s));
}

int write_output(const std::string& text, const std::string& path) {
    if (path.empty()) {
        std::cout << text;
        return kExitOk;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) return emit_error("io", "cannot open " + path + " for writing", kExitConfig);
    out << text;
    return out ? kExitOk : emit_error("io", "failed writing " + path, kExitConfig);
}

std::string format_sig(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

struct ModelHandle {
    aoi_model* ptr = nullptr;
    ~ModelHandle() { aoi_model_free(ptr); }
};

struct DisciplineArgs {
    std::string discipline;
    std::vector<double> lambdas;
    double mu = 0.0;

    aoi_discipline id() const {
        if (discipline == "np" || discipline == "lcfs-np") return AOI_LCFS_NP;
        if (discipline == "ps" || discipline == "lcfs-ps") return AOI_LCFS_PS;
        return AOI_LCFS_SA;
    }
};

bool check_pair(const std::vector<int>& pair, int n, std::string& problem) {
    if (pair.size() != 2) {
        problem = "exactly two sources required";
        return false;
    }
    for (int k : pair)
        if (k < 1 || k > n) {
            problem = "source " + std::to_string(k) + " out of range 1.." + std::to_string(n);
            return false;
        }
    if (pair[0] == pair[1]) {
        problem = "sources must be distinct";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// analyze: closed-form evaluation
// ---------------------------------------------------------------------------

int cmd_analyze(const DisciplineArgs& da, const std::vector<int>& k_sources,
                const std::vector<double>& s_raw, const std::vector<double>& s_bar,
                const std::vector<int>& corr_pair, const std::string& output) {
    const int n = static_cast<int>(da.lambdas.size());
    const aoi_discipline disc = da.id();
    const double* lam = da.lambdas.data();

    std::vector<int> k = k_sources;
    if (k.empty() && (!s_raw.empty() || !s_bar.empty())) {
        for (int i = 1; i <= n; ++i) k.push_back(i);
    }
    std::vector<double> s = s_raw;
    if (!s_bar.empty()) {
        s.clear();
        for (double v : s_bar) s.push_back(v * da.mu);
    }

    json report;
    report["discipline"] = da.discipline;
    report["lambdas"] = da.lambdas;
    report["mu"] = da.mu;

    if (!s.empty()) {
        if (s.size() != k.size())
            return emit_error("invalid_argument", "s must have one entry per element of K",
                              kExitConfig, "s");
        double mgf = 0.0;
        const aoi_status st = aoi_closed_mgf(disc, lam, n, da.mu, k.data(), s.data(),
                                             static_cast<int>(k.size()), &mgf);
        if (st != AOI_OK) return emit_status_error(st);
        report["K"] = k;
        report["s"] = s;
        report["mgf"] = mgf;
        report["region"] = "ok";
    }

    std::vector<int> moment_sources = k;
    for (int p : corr_pair)
        if (std::find(moment_sources.begin(), moment_sources.end(), p) == moment_sources.end())
            moment_sources.push_back(p);
    if (moment_sources.empty())
        for (int i = 1; i <= n; ++i) moment_sources.push_back(i);

    json means = json::object();
    json seconds = json::object();
    for (int src : moment_sources) {
        double mean = 0.0, second = 0.0;
        aoi_status st = aoi_closed_mean(disc, lam, n, da.mu, src, &mean);
        if (st != AOI_OK) return emit_status_error(st);
        st = aoi_closed_second_moment(disc, lam, n, da.mu, src, &second);
        if (st != AOI_OK) return emit_status_error(st);
        means[std::to_string(src)] = mean;
        seconds[std::to_string(src)] = second;
    }
    report["mean"] = means;
    report["second_moment"] = seconds;

    if (!corr_pair.empty()) {
        std::string problem;
        if (!check_pair(corr_pair, n, problem))
            return emit_error("invalid_argument", problem, kExitConfig, "corr");
        double cross = 0.0, corr = 0.0;
        aoi_status st =
            aoi_closed_cross_moment(disc, lam, n, da.mu, corr_pair[0], corr_pair[1], &cross);
        if (st != AOI_OK) return emit_status_error(st);
        st = aoi_closed_correlation(disc, lam, n, da.mu, corr_pair[0], corr_pair[1], &corr);
        if (st != AOI_OK) return emit_status_error(st);
        report["cross_moment"] = cross;
        report["correlation"] = corr;
    }

    return write_output(report.dump(2) + "\n", output);
}

// ---------------------------------------------------------------------------
// solve: generic solver on a model file
// ---------------------------------------------------------------------------

int cmd_solve(const std::string& model_path, const std::vector<int>& ages,
              const std::vector<int>& powers, const std::vector<double>& s,
              const std::string& output) {
    ModelHandle model;
    aoi_status st = aoi_model_load(model_path.c_str(), &model.ptr);
    if (st != AOI_OK) return emit_status_error(st);
    char* validation = nullptr;
    st = aoi_model_validate(model.ptr, &validation);
    if (st != AOI_OK) {
        aoi_string_free(validation);
        return emit_status_error(st);
    }

    const int num_states = aoi_model_num_states(model.ptr);
    std::vector<double> pi(static_cast<std::size_t>(num_states), 0.0);
    st = aoi_solve_stationary(model.ptr, pi.data());
    if (st != AOI_OK) return emit_status_error(st);

    json report;
    report["model"] = model_path;
    report["num_states"] = num_states;
    report["age_dim"] = aoi_model_age_dim(model.ptr);
    report["stationary_distribution"] = pi;

    const bool want_moment = !powers.empty();
    const bool want_mgf = !s.empty();
    if (want_moment && want_mgf)
        return emit_error("invalid_argument", "choose either --m or --s, not both", kExitConfig);
    if ((want_moment || want_mgf) && ages.empty())
        return emit_error("invalid_argument", "--K is required for a moment or mgf query",
                          kExitConfig, "K");

    int order = ages.empty() ? 1 : static_cast<int>(ages.size());
    if (want_moment) {
        if (powers.size() != ages.size())
            return emit_error("invalid_argument", "--m must match --K in length", kExitConfig, "m");
        for (std::size_t i = 0; i < ages.size(); ++i)
            for (std::size_t j = i + 1; j < ages.size(); ++j)
                if (ages[i] == ages[j])
                    return emit_error("invalid_argument", "K has duplicate indices", kExitConfig,
                                      "K");
        double value = 0.0;
        st = aoi_solve_moment(model.ptr, ages.data(), powers.data(),
                              static_cast<int>(ages.size()), &value);
        if (st != AOI_OK) return emit_status_error(st);
        report["K"] = ages;
        report["m"] = powers;
        report["moment"] = value;
        if (ages.size() == 1 && powers[0] == 1) report["mean"] = value;
    } else if (want_mgf) {
        if (s.size() != ages.size())
            return emit_error("invalid_argument", "--s must match --K in length", kExitConfig, "s");
        for (std::size_t i = 0; i < ages.size(); ++i)
            for (std::size_t j = i + 1; j < ages.size(); ++j)
                if (ages[i] == ages[j])
                    return emit_error("invalid_argument", "K has duplicate indices", kExitConfig,
                                      "K");
        double value = 0.0;
        st = aoi_solve_mgf(model.ptr, ages.data(), s.data(), static_cast<int>(ages.size()),
                           &value);
        if (st != AOI_OK) return emit_status_error(st);
        report["K"] = ages;
        report["s"] = s;
        report["mgf"] = value;
    }

    double max_eig = 0.0;
    int stable = 0, positive = 0;
    st = aoi_solve_stability(model.ptr, order, want_mgf ? s.data() : nullptr, &max_eig, &stable,
                             &positive);
    if (st != AOI_OK) return emit_status_error(st);
    report["max_eig_real"] = max_eig;
    report["stable"] = stable != 0;
    report["positive_first_moments"] = positive != 0;
    if (!stable)
        return emit_error("unstable", "configuration unstable: max eigenvalue real part " +
                                          format_sig(max_eig),
                          kExitUnstable);

    return write_output(report.dump(2) + "\n", output);
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int cmd_simulate(const DisciplineArgs& da, const std::string& model_path,
                 const std::vector<int>& sources, const std::vector<int>& ages_opt,
                 const std::vector<double>& s_raw, const std::vector<double>& s_bar,
                 std::uint64_t events, double horizon, double warmup, std::uint64_t seed, int reps,
                 int threads, const std::string& output) {
    const bool discipline_mode = model_path.empty();
    ModelHandle model;
    aoi_status st;
    if (discipline_mode) {
        st = aoi_model_build(da.id(), da.lambdas.data(), static_cast<int>(da.lambdas.size()),
                             da.mu, &model.ptr);
    } else {
        st = aoi_model_load(model_path.c_str(), &model.ptr);
    }
    if (st != AOI_OK) return emit_status_error(st);

    const int age_dim = aoi_model_age_dim(model.ptr);
    std::vector<int> ages;  // age indices under estimation
    if (discipline_mode) {
        std::vector<int> src = sources;
        if (src.empty()) {
            src.push_back(1);
            if (da.lambdas.size() > 1) src.push_back(2);
        }
        for (int k : src) {
            if (k < 1 || k >= age_dim)
                return emit_error("invalid_argument", "source out of range", kExitConfig,
                                  "sources");
            ages.push_back(k);  // source k's AoI lives at age index k
        }
    } else {
        ages = ages_opt;
        if (ages.empty()) ages.push_back(age_dim > 1 ? 1 : 0);
        for (int a : ages)
            if (a < 0 || a >= age_dim)
                return emit_error("invalid_argument", "age index out of range", kExitConfig,
                                  "ages");
    }

    std::vector<double> s = s_raw;
    if (!s_bar.empty()) {
        if (!discipline_mode)
            return emit_error("invalid_argument", "--s-bar needs discipline mode (uses mu)",
                              kExitConfig, "s-bar");
        s.clear();
        for (double v : s_bar) s.push_back(v * da.mu);
    }
    if (!s.empty() && s.size() != ages.size())
        return emit_error("invalid_argument", "s must have one entry per estimated age",
                          kExitConfig, "s");

    // out-of-region MGF queries are rejected before any simulation runs
    if (!s.empty()) {
        if (discipline_mode) {
            std::vector<int> src_labels = ages;  // labels == age indices here
            double probe = 0.0;
            st = aoi_closed_mgf(da.id(), da.lambdas.data(), static_cast<int>(da.lambdas.size()),
                                da.mu, src_labels.data(), s.data(),
                                static_cast<int>(src_labels.size()), &probe);
            if (st != AOI_OK) return emit_status_error(st);
        } else {
            double max_eig = 0.0;
            int stable = 0, positive = 0;
            st = aoi_solve_stability(model.ptr, static_cast<int>(ages.size()), s.data(), &max_eig,
                                     &stable, &positive);
            if (st != AOI_OK) return emit_status_error(st);
            if (!stable)
                return emit_error("out_of_region",
                                  "s outside stability region: max eigenvalue real part " +
                                      format_sig(max_eig),
                                  kExitOutOfRegion, "s");
        }
    }

    std::vector<aoi_sim_query> queries;
    std::vector<std::string> labels;
    for (int a : ages) {
        queries.push_back({AOI_SIM_MEAN, a, -1, nullptr, nullptr, 0});
        labels.push_back("mean[" + std::to_string(a) + "]");
        queries.push_back({AOI_SIM_SECOND_MOMENT, a, -1, nullptr, nullptr, 0});
        labels.push_back("second_moment[" + std::to_string(a) + "]");
    }
    if (ages.size() == 2) {
        queries.push_back({AOI_SIM_CROSS_MOMENT, ages[0], ages[1], nullptr, nullptr, 0});
        labels.push_back("cross_moment");
        queries.push_back({AOI_SIM_CORRELATION, ages[0], ages[1], nullptr, nullptr, 0});
        labels.push_back("correlation");
    }
    if (!s.empty()) {
        queries.push_back({AOI_SIM_MGF, -1, -1, ages.data(), s.data(),
                           static_cast<int>(ages.size())});
        labels.push_back("mgf");
    }

    aoi_sim_config config{seed, horizon, events, warmup, reps, threads};
    std::vector<aoi_sim_result> results(queries.size());
    st = aoi_simulate(model.ptr, &config, queries.data(), static_cast<int>(queries.size()),
                      results.data());
    if (st != AOI_OK) return emit_status_error(st);

    json report;
    report["seed"] = seed;
    report["replications"] = reps;
    if (events > 0) report["events"] = events;
    if (horizon > 0) report["horizon"] = horizon;
    json estimates = json::object();
    bool all_pass = true;
    bool any_reference = false;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        json entry;
        entry["estimate"] = results[i].estimate;
        entry["stderr"] = results[i].std_error;
        if (discipline_mode) {
            // analytic reference from the closed forms
            double ref = 0.0;
            bool have_ref = false;
            const aoi_sim_query& q = queries[i];
            const double* lam = da.lambdas.data();
            const int n = static_cast<int>(da.lambdas.size());
            switch (q.kind) {
                case AOI_SIM_MEAN:
                    have_ref = aoi_closed_mean(da.id(), lam, n, da.mu, q.i, &ref) == AOI_OK;
                    break;
                case AOI_SIM_SECOND_MOMENT:
                    have_ref =
                        aoi_closed_second_moment(da.id(), lam, n, da.mu, q.i, &ref) == AOI_OK;
                    break;
                case AOI_SIM_CROSS_MOMENT:
                    have_ref =
                        aoi_closed_cross_moment(da.id(), lam, n, da.mu, q.i, q.j, &ref) == AOI_OK;
                    break;
                case AOI_SIM_CORRELATION:
                    have_ref =
                        aoi_closed_correlation(da.id(), lam, n, da.mu, q.i, q.j, &ref) == AOI_OK;
                    break;
                case AOI_SIM_MGF:
                    have_ref = aoi_closed_mgf(da.id(), lam, n, da.mu, q.ages, q.s, q.count,
                                              &ref) == AOI_OK;
                    break;
                default: break;
            }
            if (have_ref) {
                any_reference = true;
                entry["analytic"] = ref;
                const bool pass =
                    std::abs(results[i].estimate - ref) <= 3.0 * results[i].std_error;
                entry["within_3se"] = pass;
                all_pass = all_pass && pass;
            }
        }
        estimates[labels[i]] = entry;
    }
    report["estimates"] = estimates;
    if (discipline_mode && any_reference) report["agreement"] = all_pass ? "pass" : "fail";

    return write_output(report.dump(2) + "\n", output);
}

// ---------------------------------------------------------------------------
// model: write a discipline's chain in the model file format
// ---------------------------------------------------------------------------

int cmd_model(const DisciplineArgs& da, const std::string& output) {
    ModelHandle model;
    aoi_status st = aoi_model_build(da.id(), da.lambdas.data(),
                                    static_cast<int>(da.lambdas.size()), da.mu, &model.ptr);
    if (st != AOI_OK) return emit_status_error(st);
    char* text = nullptr;
    st = aoi_model_to_json(model.ptr, &text);
    if (st != AOI_OK) return emit_status_error(st);
    const int rc = write_output(std::string(text) + "\n", output);
    aoi_string_free(text);
    return rc;
}

// ---------------------------------------------------------------------------
// sweep: CSV curves of the pairwise correlation
// ---------------------------------------------------------------------------

int cmd_sweep(const std::string& var, double min_v, double max_v, int steps, double mu,
              double rho_minus_frac, double lambda2, double rho_fixed,
              std::vector<std::string> disciplines, const std::string& output) {
    if (steps < 1 || !(max_v >= min_v))
        return emit_error("invalid_argument", "malformed grid: need steps >= 1 and max >= min",
                          kExitConfig, "steps");
    if (disciplines.empty()) disciplines = {"np", "ps", "sa"};
    std::vector<aoi_discipline> ids;
    for (const auto& d : disciplines) {
        if (d == "np")
            ids.push_back(AOI_LCFS_NP);
        else if (d == "ps")
            ids.push_back(AOI_LCFS_PS);
        else if (d == "sa")
            ids.push_back(AOI_LCFS_SA);
        else
            return emit_error("invalid_argument", "unknown discipline " + d, kExitConfig,
                              "disciplines");
    }

    auto lambdas_at = [&](double x, std::vector<double>& lambdas) -> std::optional<std::string> {
        lambdas.clear();
        if (var == "rho") {
            const double rho = x;
            if (!(rho > 0)) return "rho must be positive";
            const double frac = rho_minus_frac;
            if (frac < 0.0 || frac >= 1.0) return "rho-minus-frac must lie in [0, 1)";
            const double pair_each = (1.0 - frac) * rho * mu / 2.0;
            lambdas = {pair_each, pair_each};
            if (frac > 0.0) lambdas.push_back(frac * rho * mu);
        } else if (var == "lambda1") {
            if (!(x > 0)) return "lambda1 must be positive";
            if (!(lambda2 > 0)) return "--lambda2 must be positive";
            lambdas = {x, lambda2};
        } else if (var == "rho_minus") {
            const double frac = x;
            if (frac < 0.0 || frac >= 1.0) return "rho_minus fraction must lie in [0, 1)";
            if (!(rho_fixed > 0)) return "--rho must be positive";
            const double pair_each = (1.0 - frac) * rho_fixed * mu / 2.0;
            lambdas = {pair_each, pair_each};
            if (frac > 0.0) lambdas.push_back(frac * rho_fixed * mu);
        } else {
            return "unknown sweep variable " + var;
        }
        return std::nullopt;
    };

    std::string csv = "x";
    for (const auto& d : disciplines) csv += ",corr_" + d;
    csv += "\n";

    for (int i = 0; i < steps; ++i) {
        const double x =
            steps == 1 ? min_v : min_v + (max_v - min_v) * static_cast<double>(i) /
                                             static_cast<double>(steps - 1);
        std::vector<double> lambdas;
        if (auto problem = lambdas_at(x, lambdas))
            return emit_error("invalid_argument", "malformed grid: " + *problem, kExitConfig,
                              "var");
        csv += format_sig(x);
        for (aoi_discipline id : ids) {
            double corr = 0.0;
            const aoi_status st = aoi_closed_correlation(
                id, lambdas.data(), static_cast<int>(lambdas.size()), mu, 1, 2, &corr);
            if (st != AOI_OK) return emit_status_error(st);
            csv += "," + format_sig(corr);
        }
        csv += "\n";
    }

    return write_output(csv, output);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint Age-of-Information analysis: closed forms, generic solver, simulation, "
                 "and parameter sweeps"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from an INI/TOML file (sections per subcommand)");

    // shared discipline/param options
    DisciplineArgs da;
    auto add_discipline_opts = [&](CLI::App* cmd, bool required) {
        auto* d = cmd->add_option("--discipline", da.discipline, "np, ps, or sa")
                      ->check(CLI::IsMember({"np", "ps", "sa", "lcfs-np", "lcfs-ps", "lcfs-sa"}));
        auto* l = cmd->add_option("--lambdas", da.lambdas, "per-source arrival rates (1/time)")
                      ->delimiter(',');
        auto* m = cmd->add_option("--mu", da.mu, "service rate (1/time)");
        if (required) {
            d->required();
            l->required();
            m->required();
        }
        return std::make_tuple(d, l, m);
    };

    // analyze
    auto* analyze = app.add_subcommand("analyze", "evaluate the closed forms");
    std::vector<int> an_k, an_corr;
    std::vector<double> an_s, an_sbar;
    std::string an_output;
    add_discipline_opts(analyze, true);
    analyze->add_option("--K", an_k, "source set for the joint MGF (1-based)")->delimiter(',');
    auto* an_s_opt = analyze->add_option("--s", an_s, "raw MGF arguments (1/time)")->delimiter(',');
    auto* an_sbar_opt =
        analyze->add_option("--s-bar", an_sbar, "normalized MGF arguments s/mu")->delimiter(',');
    an_s_opt->excludes(an_sbar_opt);
    analyze->add_option("--corr", an_corr, "source pair for the correlation, e.g. 1,2")
        ->delimiter(',');
    analyze->add_option("--output", an_output, "write the JSON report here instead of stdout");

    // solve
    auto* solve = app.add_subcommand("solve", "run the generic solver on a model file");
    std::string so_model, so_output;
    std::vector<int> so_k, so_m;
    std::vector<double> so_s;
    solve->add_option("model", so_model, "model file (JSON)")->required();
    solve->add_option("--K", so_k, "age indices (0-based into the age vector)")->delimiter(',');
    auto* so_m_opt = solve->add_option("--m", so_m, "moment powers aligned to --K")->delimiter(',');
    auto* so_s_opt = solve->add_option("--s", so_s, "MGF arguments aligned to --K")->delimiter(',');
    so_m_opt->excludes(so_s_opt);
    solve->add_option("--output", so_output, "write the JSON report here instead of stdout");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo estimates with error bars");
    std::string si_model, si_output;
    std::vector<int> si_sources, si_ages;
    std::vector<double> si_s, si_sbar;
    std::uint64_t si_events = 0, si_seed = 1;
    double si_horizon = 0.0, si_warmup = -1.0;
    int si_reps = 10, si_threads = 0;
    add_discipline_opts(simulate, false);
    simulate->add_option("--model", si_model, "simulate a model file instead of a discipline");
    simulate->add_option("--sources", si_sources, "source labels to estimate (discipline mode)")
        ->delimiter(',');
    simulate->add_option("--ages", si_ages, "age indices to estimate (model mode)")
        ->delimiter(',');
    auto* si_s_opt =
        simulate->add_option("--s", si_s, "raw MGF arguments for an MGF estimate")->delimiter(',');
    auto* si_sbar_opt =
        simulate->add_option("--s-bar", si_sbar, "normalized MGF arguments s/mu")->delimiter(',');
    si_s_opt->excludes(si_sbar_opt);
    simulate->add_option("--events", si_events, "event budget per replication");
    simulate->add_option("--horizon", si_horizon, "simulated-time budget per replication");
    simulate->add_option("--warmup", si_warmup, "simulated time discarded (default 5%)");
    simulate->add_option("--seed", si_seed, "RNG seed");
    simulate->add_option("--reps", si_reps, "independent replications");
    simulate->add_option("--threads", si_threads, "max parallel replications (0 = auto)");
    simulate->add_option("--output", si_output, "write the JSON report here instead of stdout");

    // model
    auto* model_cmd =
        app.add_subcommand("model", "write a discipline's chain in the model file format");
    std::string mo_output;
    add_discipline_opts(model_cmd, false);
    model_cmd->add_option("--output", mo_output, "write the model here instead of stdout");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "CSV correlation curves over a parameter grid");
    std::string sw_var = "rho", sw_output;
    double sw_min = 0.1, sw_max = 5.0, sw_mu = 1.0;
    double sw_frac = 0.0, sw_lambda2 = 0.0, sw_rho = 0.0;
    int sw_steps = 50;
    std::vector<std::string> sw_disciplines;
    sweep->add_option("--var", sw_var, "sweep variable: rho, lambda1, or rho_minus")
        ->check(CLI::IsMember({"rho", "lambda1", "rho_minus"}));
    sweep->add_option("--min", sw_min, "grid start")->required();
    sweep->add_option("--max", sw_max, "grid end")->required();
    sweep->add_option("--steps", sw_steps, "number of grid points");
    sweep->add_option("--mu", sw_mu, "service rate");
    sweep->add_option("--rho-minus-frac", sw_frac,
                      "for --var rho: share of rho carried by a third source");
    sweep->add_option("--lambda2", sw_lambda2, "for --var lambda1: fixed second-source rate");
    sweep->add_option("--rho", sw_rho, "for --var rho_minus: fixed total utilization");
    sweep->add_option("--disciplines", sw_disciplines, "subset of np,ps,sa columns")
        ->delimiter(',');
    sweep->add_option("--output", sw_output, "write the CSV here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return emit_error("invalid_argument", e.what(), kExitConfig);
    }

    if (analyze->parsed())
        return cmd_analyze(da, an_k, an_s, an_sbar, an_corr, an_output);
    if (solve->parsed()) return cmd_solve(so_model, so_k, so_m, so_s, so_output);
    if (simulate->parsed()) {
        const bool discipline_mode = si_model.empty();
        if (discipline_mode && (da.discipline.empty() || da.lambdas.empty() || da.mu <= 0.0))
            return emit_error("invalid_argument",
                              "--discipline, --lambdas, and --mu are required without --model",
                              kExitConfig, "mu");
        if (si_events == 0 && si_horizon <= 0.0) si_events = 100000;
        return cmd_simulate(da, si_model, si_sources, si_ages, si_s, si_sbar, si_events,
                            si_horizon, si_warmup, si_seed, si_reps, si_threads, si_output);
    }
    if (model_cmd->parsed()) {
        if (da.discipline.empty() || da.lambdas.empty() || da.mu <= 0.0)
            return emit_error("invalid_argument",
                              "--discipline, --lambdas, and --mu are required", kExitConfig);
        return cmd_model(da, mo_output);
    }
    if (sweep->parsed())
        return cmd_sweep(sw_var, sw_min, sw_max, sw_steps, sw_mu, sw_frac, sw_lambda2, sw_rho,
                         sw_disciplines, sw_output);
    return kExitConfig;
}
