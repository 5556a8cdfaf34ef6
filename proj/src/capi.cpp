#include "aoi/aoi.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "aoi/disciplines.hpp"
#include "aoi/error.hpp"
#include "aoi/shs.hpp"
#include "aoi/simulator.hpp"
#include "aoi/solver.hpp"

struct aoi_model {
    aoi::ShsModel model;
};

namespace {

thread_local std::string g_last_error;

aoi_status code_to_status(aoi::ErrorCode code) {
    using aoi::ErrorCode;
    switch (code) {
        case ErrorCode::kInvalidArgument: return AOI_ERR_INVALID_ARGUMENT;
        case ErrorCode::kParse: return AOI_ERR_PARSE;
        case ErrorCode::kValidation: return AOI_ERR_VALIDATION;
        case ErrorCode::kNotErgodic: return AOI_ERR_NOT_ERGODIC;
        case ErrorCode::kUnstable: return AOI_ERR_UNSTABLE;
        case ErrorCode::kOutOfRegion: return AOI_ERR_OUT_OF_REGION;
        case ErrorCode::kSimGuard: return AOI_ERR_SIM_GUARD;
        case ErrorCode::kIo: return AOI_ERR_IO;
        case ErrorCode::kInternal: return AOI_ERR_INTERNAL;
    }
    return AOI_ERR_INTERNAL;
}

template <typename Fn>
aoi_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return AOI_OK;
    } catch (const aoi::Error& e) {
        g_last_error = e.what();
        return code_to_status(e.code());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return AOI_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return AOI_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return AOI_ERR_INTERNAL;
    }
}

aoi_status invalid(const char* message) {
    g_last_error = message;
    return AOI_ERR_INVALID_ARGUMENT;
}

aoi::Discipline to_discipline(aoi_discipline d) {
    switch (d) {
        case AOI_LCFS_NP: return aoi::Discipline::kLcfsNp;
        case AOI_LCFS_PS: return aoi::Discipline::kLcfsPs;
        case AOI_LCFS_SA: return aoi::Discipline::kLcfsSa;
    }
    aoi::fail(aoi::ErrorCode::kInvalidArgument, "unknown discipline enum value");
}

aoi::MultiSourceParams to_params(const double* lambdas, int num_sources, double mu) {
    if (!lambdas || num_sources < 1)
        aoi::fail(aoi::ErrorCode::kInvalidArgument, "lambdas must hold at least one rate");
    aoi::MultiSourceParams p;
    p.lambdas.assign(lambdas, lambdas + num_sources);
    p.mu = mu;
    p.validate();
    return p;
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* aoi_version(void) { return "0.1.0"; }

const char* aoi_status_name(aoi_status status) {
    switch (status) {
        case AOI_OK: return "ok";
        case AOI_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case AOI_ERR_PARSE: return "parse";
        case AOI_ERR_VALIDATION: return "validation";
        case AOI_ERR_NOT_ERGODIC: return "not_ergodic";
        case AOI_ERR_UNSTABLE: return "unstable";
        case AOI_ERR_OUT_OF_REGION: return "out_of_region";
        case AOI_ERR_SIM_GUARD: return "sim_guard";
        case AOI_ERR_IO: return "io";
        case AOI_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* aoi_last_error(void) { return g_last_error.c_str(); }

void aoi_string_free(char* text) { delete[] text; }

aoi_status aoi_model_build(aoi_discipline discipline, const double* lambdas, int num_sources,
                           double mu, aoi_model** out) {
    if (!out) return invalid("out pointer is NULL");
    return guarded([&] {
        auto params = to_params(lambdas, num_sources, mu);
        *out = new aoi_model{aoi::build_model(params, to_discipline(discipline))};
    });
}

aoi_status aoi_model_from_json(const char* text, aoi_model** out) {
    if (!out || !text) return invalid("text/out pointer is NULL");
    return guarded([&] { *out = new aoi_model{aoi::ShsModel::from_json(text)}; });
}

aoi_status aoi_model_load(const char* path, aoi_model** out) {
    if (!out || !path) return invalid("path/out pointer is NULL");
    return guarded([&] { *out = new aoi_model{aoi::ShsModel::load(path)}; });
}

aoi_status aoi_model_to_json(const aoi_model* model, char** out_text) {
    if (!model || !out_text) return invalid("model/out pointer is NULL");
    return guarded([&] { *out_text = dup_string(model->model.to_json()); });
}

aoi_status aoi_model_save(const aoi_model* model, const char* path) {
    if (!model || !path) return invalid("model/path pointer is NULL");
    return guarded([&] { model->model.save(path); });
}

void aoi_model_free(aoi_model* model) { delete model; }

int aoi_model_num_states(const aoi_model* model) { return model ? model->model.num_states() : 0; }

int aoi_model_age_dim(const aoi_model* model) { return model ? model->model.age_dim() : 0; }

int aoi_model_num_transitions(const aoi_model* model) {
    return model ? static_cast<int>(model->model.transitions().size()) : 0;
}

aoi_status aoi_model_validate(const aoi_model* model, char** report) {
    if (!model) return invalid("model pointer is NULL");
    return guarded([&] {
        const auto violations = model->model.validate();
        if (!violations.empty()) {
            if (report) {
                std::string text;
                for (const auto& v : violations) {
                    text += "transition " + std::to_string(v.transition_id) + ": " + v.reason;
                    text += "\n";
                }
                *report = dup_string(text);
            }
            model->model.require_valid();  // throws with the combined message
        }
        if (report) *report = nullptr;
    });
}

aoi_status aoi_solve_stationary(const aoi_model* model, double* pi) {
    if (!model || !pi) return invalid("model/pi pointer is NULL");
    return guarded([&] {
        const Eigen::VectorXd v = aoi::stationary_distribution(model->model);
        for (int i = 0; i < v.size(); ++i) pi[i] = v(i);
    });
}

aoi_status aoi_solve_moment(const aoi_model* model, const int* ages, const int* powers, int count,
                            double* out) {
    if (!model || !ages || !powers || !out || count < 1)
        return invalid("bad moment query arguments");
    return guarded([&] {
        const Eigen::VectorXd pi = aoi::stationary_distribution(model->model);
        // Collapse duplicate-age queries into one power per distinct age so
        // the tensor read below is well-posed.
        std::vector<int> distinct_ages;
        std::vector<int> m;
        for (int idx = 0; idx < count; ++idx) {
            bool merged = false;
            for (std::size_t k = 0; k < distinct_ages.size(); ++k) {
                if (distinct_ages[k] == ages[idx]) {
                    m[k] += powers[idx];
                    merged = true;
                    break;
                }
            }
            if (!merged) {
                distinct_ages.push_back(ages[idx]);
                m.push_back(powers[idx]);
            }
        }
        const auto solution =
            aoi::solve_joint_moments(model->model, pi, aoi::MomentQuery{m});
        *out = solution.aggregate.get(distinct_ages);
    });
}

aoi_status aoi_solve_mgf(const aoi_model* model, const int* ages, const double* s, int count,
                         double* out) {
    if (!model || !ages || !s || !out || count < 1) return invalid("bad mgf query arguments");
    return guarded([&] {
        const Eigen::VectorXd pi = aoi::stationary_distribution(model->model);
        aoi::MgfQuery query;
        query.ages.assign(ages, ages + count);
        query.s.assign(s, s + count);
        *out = aoi::solve_joint_mgf(model->model, pi, query).mgf;
    });
}

aoi_status aoi_solve_stability(const aoi_model* model, int order, const double* s,
                               double* max_eig_real, int* stable, int* positive_first_moments) {
    if (!model || !max_eig_real || !stable || !positive_first_moments)
        return invalid("bad stability arguments");
    return guarded([&] {
        std::optional<std::vector<double>> sv;
        if (s) sv = std::vector<double>(s, s + order);
        const auto report = aoi::stability_check(model->model, order, sv);
        *max_eig_real = report.max_eig_real;
        *stable = report.stable ? 1 : 0;
        *positive_first_moments = report.positive_first_moments ? 1 : 0;
    });
}

aoi_status aoi_closed_mgf(aoi_discipline discipline, const double* lambdas, int num_sources,
                          double mu, const int* sources, const double* s, int count, double* out) {
    if (!sources || !s || !out || count < 1) return invalid("bad closed-form mgf arguments");
    return guarded([&] {
        const auto params = to_params(lambdas, num_sources, mu);
        std::vector<int> k(sources, sources + count);
        std::vector<double> sv(s, s + count);
        *out = aoi::joint_mgf(params, to_discipline(discipline), k, sv);
    });
}

aoi_status aoi_closed_marginal_mgf(aoi_discipline discipline, const double* lambdas,
                                   int num_sources, double mu, int source, double s_bar,
                                   double* out) {
    if (!out) return invalid("out pointer is NULL");
    return guarded([&] {
        const auto params = to_params(lambdas, num_sources, mu);
        *out = aoi::marginal_mgf(params, to_discipline(discipline), source, s_bar);
    });
}

aoi_status aoi_closed_mean(aoi_discipline discipline, const double* lambdas, int num_sources,
                           double mu, int source, double* out) {
    if (!out) return invalid("out pointer is NULL");
    return guarded([&] {
        const auto params = to_params(lambdas, num_sources, mu);
        *out = aoi::moments(params, to_discipline(discipline), source).mean;
    });
}

aoi_status aoi_closed_second_moment(aoi_discipline discipline, const double* lambdas,
                                    int num_sources, double mu, int source, double* out) {
    if (!out) return invalid("out pointer is NULL");
    return guarded([&] {
        const auto params = to_params(lambdas, num_sources, mu);
        *out = aoi::moments(params, to_discipline(discipline), source).second_moment;
    });
}

aoi_status aoi_closed_cross_moment(aoi_discipline discipline, const double* lambdas,
                                   int num_sources, double mu, int source1, int source2,
                                   double* out) {
    if (!out) return invalid("out pointer is NULL");
    return guarded([&] {
        const auto params = to_params(lambdas, num_sources, mu);
        *out = aoi::cross_moment(params, to_discipline(discipline), source1, source2);
    });
}

aoi_status aoi_closed_correlation(aoi_discipline discipline, const double* lambdas,
                                  int num_sources, double mu, int source1, int source2,
                                  double* out) {
    if (!out) return invalid("out pointer is NULL");
    return guarded([&] {
        const auto params = to_params(lambdas, num_sources, mu);
        *out = aoi::correlation(params, to_discipline(discipline), source1, source2);
    });
}

double aoi_np_correlation_threshold(void) { return aoi::rho_threshold_np(); }

aoi_status aoi_simulate(const aoi_model* model, const aoi_sim_config* config,
                        const aoi_sim_query* queries, int num_queries, aoi_sim_result* results) {
    if (!model || !config || !queries || !results || num_queries < 1)
        return invalid("bad simulate arguments");
    return guarded([&] {
        aoi::SimConfig cfg;
        cfg.seed = config->seed;
        cfg.horizon = config->horizon;
        cfg.max_events = config->max_events;
        cfg.warmup = config->warmup;
        cfg.replications = config->replications;
        cfg.threads = config->threads;

        std::vector<aoi::SimQuery> qs;
        qs.reserve(static_cast<std::size_t>(num_queries));
        for (int i = 0; i < num_queries; ++i) {
            const aoi_sim_query& q = queries[i];
            aoi::SimQuery sq;
            switch (q.kind) {
                case AOI_SIM_MEAN: sq = aoi::SimQuery::mean(q.i); break;
                case AOI_SIM_SECOND_MOMENT: sq = aoi::SimQuery::second_moment(q.i); break;
                case AOI_SIM_CROSS_MOMENT: sq = aoi::SimQuery::cross_moment(q.i, q.j); break;
                case AOI_SIM_CORRELATION: sq = aoi::SimQuery::correlation(q.i, q.j); break;
                case AOI_SIM_OCCUPANCY: sq = aoi::SimQuery::occupancy(q.i); break;
                case AOI_SIM_MGF: {
                    if (!q.ages || !q.s || q.count < 1)
                        aoi::fail(aoi::ErrorCode::kInvalidArgument, "bad mgf sim query");
                    sq = aoi::SimQuery::mgf(std::vector<int>(q.ages, q.ages + q.count),
                                            std::vector<double>(q.s, q.s + q.count));
                    break;
                }
                default:
                    aoi::fail(aoi::ErrorCode::kInvalidArgument, "unknown sim quantity");
            }
            qs.push_back(std::move(sq));
        }

        const auto estimate = aoi::simulate(model->model, cfg, qs);
        for (int i = 0; i < num_queries; ++i) {
            results[i].estimate = estimate.values[static_cast<std::size_t>(i)].estimate;
            results[i].std_error = estimate.values[static_cast<std::size_t>(i)].std_error;
            results[i].accum_time = estimate.values[static_cast<std::size_t>(i)].accum_time;
        }
    });
}

}  // extern "C"
