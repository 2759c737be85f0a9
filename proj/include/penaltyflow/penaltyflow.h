#ifndef PENALTYFLOW_H
#define PENALTYFLOW_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define PF_API __declspec(dllexport)
#else
#define PF_API __attribute__((visibility("default")))
#endif

typedef enum pf_status {
    PF_OK = 0,
    PF_ERR_INVALID_ARGUMENT = 1,
    PF_ERR_CONFIG = 2,
    PF_ERR_SOLVER = 3,
    PF_ERR_IO = 4,
    PF_ERR_NO_EXACT_SOLUTION = 5,
    PF_ERR_OUT_OF_RANGE = 6,
    PF_ERR_INTERNAL = 99
} pf_status;

typedef struct pf_config pf_config;
typedef struct pf_run pf_run;

/* Accepted time level. Optional values are NaN when absent. */
typedef struct pf_step {
    double t;
    double k;
    double eps;
    int order;
    double est_e;
    double test1;
    double test2;
    double div_u;
    double grad_u;
    double ut_norm;
    int rejects;
    int forced;
    double u_err_l2;
    double u_err_linf;
    double p_err_linf;
    double energy_residual;
    double penalty_residual;
    double solve_residual;
} pf_step;

typedef struct pf_summary {
    size_t steps;
    long total_rejects;
    long forced_accepts;
    long solves;
    double t_final;
    double u_err_l2;
    double u_err_linf;
    double p_err_linf;
    double wall_seconds;
} pf_summary;

typedef struct pf_rate {
    double k;
    long steps;
    double u_err_l2;
    double rate_l2;
    double u_err_linf;
    double rate_linf;
    double p_err_linf;
    double rate_p;
} pf_rate;

/* Message of the last failed call on this thread; "" after a success. */
PF_API const char* pf_last_error(void);
PF_API const char* pf_status_string(pf_status status);
PF_API const char* pf_version(void);

/* Default configuration. */
PF_API pf_status pf_config_new(pf_config** out);
/* Reads a `key = value` file; relative mesh paths resolve against its directory. */
PF_API pf_status pf_config_load(const char* path, pf_config** out);
PF_API pf_status pf_config_parse(const char* text, pf_config** out);
PF_API pf_status pf_config_set(pf_config* cfg, const char* key, const char* value);
PF_API pf_status pf_config_validate(const pf_config* cfg);
PF_API void pf_config_free(pf_config* cfg);

/* Runs in memory. */
PF_API pf_status pf_run_simulation(const pf_config* cfg, pf_run** out);
/* Runs and writes timeseries.csv and summary.csv into the output directory. */
PF_API pf_status pf_run_experiment(const pf_config* cfg, pf_run** out);
PF_API size_t pf_run_step_count(const pf_run* run);
PF_API pf_status pf_run_step(const pf_run* run, size_t index, pf_step* out);
PF_API pf_status pf_run_summary(const pf_run* run, pf_summary* out);
PF_API void pf_run_free(pf_run* run);

/* One run per step size; rows_out holds n_steps entries. Writes rates.csv when write_csv != 0. */
PF_API pf_status pf_convergence_study(const pf_config* cfg, const double* steps, size_t n_steps, int write_csv,
                                      pf_rate* rows_out);

/* Forcing-consistency residual of a named problem. */
PF_API pf_status pf_verify_forcing(const char* problem, int n_samples, uint64_t seed, double* residual);

/* Number of names and the i-th problem name. */
PF_API size_t pf_problem_count(void);
PF_API const char* pf_problem_name(size_t index);

#ifdef __cplusplus
}
#endif

#endif
