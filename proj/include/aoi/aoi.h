/* C API of the AoI joint-analysis library.
 *
 * All functions return aoi_status; AOI_OK is 0. On failure the thread-local
 * message from aoi_last_error() describes the problem. Objects returned
 * through out-parameters are owned by the caller and released with the
 * matching *_free function.
 *
 * Conventions: age indices are 0-based positions in the age vector (for
 * discipline-built models, index 0 is the in-service age and source k's AoI
 * sits at index k). Source labels in the closed-form functions are 1-based.
 */
#ifndef AOI_AOI_H
#define AOI_AOI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define AOI_API __declspec(dllexport)
#else
#define AOI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aoi_status {
    AOI_OK = 0,
    AOI_ERR_INVALID_ARGUMENT = 1,
    AOI_ERR_PARSE = 2,
    AOI_ERR_VALIDATION = 3,
    AOI_ERR_NOT_ERGODIC = 4,
    AOI_ERR_UNSTABLE = 5,
    AOI_ERR_OUT_OF_REGION = 6,
    AOI_ERR_SIM_GUARD = 7,
    AOI_ERR_IO = 8,
    AOI_ERR_INTERNAL = 9
} aoi_status;

typedef enum aoi_discipline {
    AOI_LCFS_NP = 0,
    AOI_LCFS_PS = 1,
    AOI_LCFS_SA = 2
} aoi_discipline;

typedef struct aoi_model aoi_model;

AOI_API const char* aoi_version(void);
AOI_API const char* aoi_status_name(aoi_status status);
/* Message of the most recent failure on this thread (empty string if none). */
AOI_API const char* aoi_last_error(void);
AOI_API void aoi_string_free(char* text);

/* --- model lifecycle ----------------------------------------------------- */

AOI_API aoi_status aoi_model_build(aoi_discipline discipline, const double* lambdas,
                                   int num_sources, double mu, aoi_model** out);
AOI_API aoi_status aoi_model_from_json(const char* text, aoi_model** out);
AOI_API aoi_status aoi_model_load(const char* path, aoi_model** out);
AOI_API aoi_status aoi_model_to_json(const aoi_model* model, char** out_text);
AOI_API aoi_status aoi_model_save(const aoi_model* model, const char* path);
AOI_API void aoi_model_free(aoi_model* model);

AOI_API int aoi_model_num_states(const aoi_model* model);
AOI_API int aoi_model_age_dim(const aoi_model* model);
AOI_API int aoi_model_num_transitions(const aoi_model* model);
/* AOI_OK when valid; AOI_ERR_VALIDATION with the violation list in
 * aoi_last_error() (and in *report when non-NULL) otherwise. */
AOI_API aoi_status aoi_model_validate(const aoi_model* model, char** report);

/* --- generic solver ------------------------------------------------------ */

/* pi must hold aoi_model_num_states(model) doubles. */
AOI_API aoi_status aoi_solve_stationary(const aoi_model* model, double* pi);

/* Stationary joint moment E[prod_j x_{ages[j]}^{powers[j]}]; repeated ages
 * are merged by summing their powers. */
AOI_API aoi_status aoi_solve_moment(const aoi_model* model, const int* ages, const int* powers,
                                    int count, double* out);

/* Stationary joint MGF E[exp(sum_j s[j] * x_{ages[j]})]; ages distinct. */
AOI_API aoi_status aoi_solve_mgf(const aoi_model* model, const int* ages, const double* s,
                                 int count, double* out);

/* Spectrum of the order-r coupling matrix shifted by sum(s) (s may be NULL);
 * also reports strict positivity of the first-moment fixed points. */
AOI_API aoi_status aoi_solve_stability(const aoi_model* model, int order, const double* s,
                                       double* max_eig_real, int* stable,
                                       int* positive_first_moments);

/* --- closed forms (multi-source LCFS disciplines) ------------------------ */

/* sources: 1-based distinct labels; s aligned to sources, raw units. */
AOI_API aoi_status aoi_closed_mgf(aoi_discipline discipline, const double* lambdas,
                                  int num_sources, double mu, const int* sources, const double* s,
                                  int count, double* out);
AOI_API aoi_status aoi_closed_marginal_mgf(aoi_discipline discipline, const double* lambdas,
                                           int num_sources, double mu, int source, double s_bar,
                                           double* out);
AOI_API aoi_status aoi_closed_mean(aoi_discipline discipline, const double* lambdas,
                                   int num_sources, double mu, int source, double* out);
AOI_API aoi_status aoi_closed_second_moment(aoi_discipline discipline, const double* lambdas,
                                            int num_sources, double mu, int source, double* out);
AOI_API aoi_status aoi_closed_cross_moment(aoi_discipline discipline, const double* lambdas,
                                           int num_sources, double mu, int source1, int source2,
                                           double* out);
AOI_API aoi_status aoi_closed_correlation(aoi_discipline discipline, const double* lambdas,
                                          int num_sources, double mu, int source1, int source2,
                                          double* out);

/* Utilization at which the symmetric two-source non-preemptive correlation
 * changes sign (root of rho^3 - 4 rho - 2). */
AOI_API double aoi_np_correlation_threshold(void);

/* --- simulation ----------------------------------------------------------- */

typedef struct aoi_sim_config {
    uint64_t seed;
    double horizon;      /* simulated-time budget; 0 to use max_events */
    uint64_t max_events; /* per replication; 0 to use horizon */
    double warmup;       /* simulated time discarded; negative = 5% default */
    int replications;
    int threads; /* 0 = hardware default */
} aoi_sim_config;

typedef enum aoi_sim_quantity {
    AOI_SIM_MEAN = 0,
    AOI_SIM_SECOND_MOMENT = 1,
    AOI_SIM_CROSS_MOMENT = 2,
    AOI_SIM_MGF = 3,
    AOI_SIM_CORRELATION = 4,
    AOI_SIM_OCCUPANCY = 5
} aoi_sim_quantity;

typedef struct aoi_sim_query {
    aoi_sim_quantity kind;
    int i; /* age index (state index for occupancy) */
    int j; /* second age index for cross moment / correlation */
    const int* ages;
    const double* s;
    int count;
} aoi_sim_query;

typedef struct aoi_sim_result {
    double estimate;
    double std_error;
    double accum_time;
} aoi_sim_result;

AOI_API aoi_status aoi_simulate(const aoi_model* model, const aoi_sim_config* config,
                                const aoi_sim_query* queries, int num_queries,
                                aoi_sim_result* results);

#ifdef __cplusplus
}
#endif

#endif /* AOI_AOI_H */
