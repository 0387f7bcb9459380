/* C interface to the elmeta library. All handles are opaque; every function that can fail
 * returns an elmeta_status and leaves a message retrievable with elmeta_last_error().
 * Strings returned through char** out-parameters are owned by the caller and must be
 * released with elmeta_string_free(). */
#ifndef ELMETA_ELMETA_H
#define ELMETA_ELMETA_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ELMETA_BUILDING)
#    define ELMETA_API __declspec(dllexport)
#  else
#    define ELMETA_API __declspec(dllimport)
#  endif
#else
#  define ELMETA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum elmeta_status {
    ELMETA_OK = 0,
    ELMETA_ERR_EMPTY_DATASET = 1,
    ELMETA_ERR_TOO_FEW_STUDIES = 2,
    ELMETA_ERR_DEGENERATE_INTERVAL = 3,
    ELMETA_ERR_MIXED_LEVELS = 4,
    ELMETA_ERR_BAD_LEVEL = 5,
    ELMETA_ERR_BAD_SAMPLE_SIZE = 6,
    ELMETA_ERR_BAD_ARGUMENT = 7,
    ELMETA_ERR_INFEASIBLE_HULL = 8,
    ELMETA_ERR_NO_CONVERGENCE = 9,
    ELMETA_ERR_NO_FEASIBLE_THETA = 10,
    ELMETA_ERR_PARSE = 11,
    ELMETA_ERR_IO = 12,
    ELMETA_ERR_BAD_CONFIG = 13,
    ELMETA_ERR_INTERNAL = 99
} elmeta_status;

typedef enum elmeta_scale { ELMETA_SCALE_LINEAR = 0, ELMETA_SCALE_LOG = 1 } elmeta_scale;

typedef enum elmeta_format {
    ELMETA_FORMAT_AUTO = 0,
    ELMETA_FORMAT_CSV = 1,
    ELMETA_FORMAT_JSON = 2
} elmeta_format;

typedef struct elmeta_dataset elmeta_dataset;
typedef struct elmeta_report elmeta_report;
typedef struct elmeta_el_model elmeta_el_model;

/* Message of the last failure on the calling thread; empty after success. */
ELMETA_API const char* elmeta_last_error(void);
/* Symbolic name such as "ParseError". */
ELMETA_API const char* elmeta_status_name(elmeta_status status);
/* Nonzero for malformed input, zero for numeric failures and success. */
ELMETA_API int elmeta_status_is_input_error(elmeta_status status);
ELMETA_API void elmeta_string_free(char* s);

/* Datasets. `level`, `sample_size` and `labels` may be NULL; sample_size <= 0 means unknown. */
ELMETA_API elmeta_status elmeta_dataset_create(const double* lower, const double* upper,
                                               const double* level, const int64_t* sample_size,
                                               const char* const* labels, size_t count,
                                               elmeta_scale scale, elmeta_dataset** out);
/* With input_ratio != 0 (log scale only) the file holds ratios and the natural log is taken. */
ELMETA_API elmeta_status elmeta_dataset_read(const char* path, elmeta_format format,
                                             elmeta_scale scale, int input_ratio,
                                             elmeta_dataset** out);
ELMETA_API elmeta_status elmeta_dataset_write(const elmeta_dataset* data, const char* path,
                                              elmeta_format format);
ELMETA_API size_t elmeta_dataset_size(const elmeta_dataset* data);
ELMETA_API elmeta_status elmeta_dataset_interval(const elmeta_dataset* data, size_t index,
                                                 double* lower, double* upper);
ELMETA_API void elmeta_dataset_free(elmeta_dataset* data);

/* Analysis. `methods` is a comma list of method names or "all"; report_ratio != 0 exponentiates
 * the report of a log-scale dataset. cd_reml != 0 backs CD-RE with REML instead of DL. */
ELMETA_API elmeta_status elmeta_analyze(const elmeta_dataset* data, const char* methods,
                                        double beta, int report_ratio, int cd_reml,
                                        elmeta_report** out);
ELMETA_API size_t elmeta_report_count(const elmeta_report* report);
ELMETA_API const char* elmeta_report_method(const elmeta_report* report, size_t index);
/* ELMETA_OK when the method produced an interval, else the error that stopped it. */
ELMETA_API elmeta_status elmeta_report_status(const elmeta_report* report, size_t index);
ELMETA_API elmeta_status elmeta_report_values(const elmeta_report* report, size_t index,
                                              double* estimate, double* ci_lower,
                                              double* ci_upper);
/* Returns 1 and writes tau2 when the method estimates one, else 0. */
ELMETA_API int elmeta_report_tau2(const elmeta_report* report, size_t index, double* tau2);
/* Number of pieces in the full confidence set (0 when only the interval is reported). */
ELMETA_API size_t elmeta_report_level_set_size(const elmeta_report* report, size_t index);
ELMETA_API elmeta_status elmeta_report_level_set_piece(const elmeta_report* report, size_t index,
                                                       size_t piece, double* lower, double* upper);
/* Nonzero when every requested method failed numerically. */
ELMETA_API int elmeta_report_all_failed(const elmeta_report* report);
ELMETA_API elmeta_status elmeta_report_json(const elmeta_report* report, char** out);
ELMETA_API elmeta_status elmeta_report_table(const elmeta_report* report, char** out);
ELMETA_API void elmeta_report_free(elmeta_report* report);

/* Empirical likelihood models; variant is one of "EL-RE", "EL1", "EL2", "EL3". */
ELMETA_API elmeta_status elmeta_el_model_create(const elmeta_dataset* data, const char* variant,
                                                elmeta_el_model** out);
ELMETA_API elmeta_status elmeta_el_model_estimate(const elmeta_el_model* model, double* theta);
/* -2 log R(theta); +inf outside the feasible range. */
ELMETA_API elmeta_status elmeta_el_model_neg2logr(const elmeta_el_model* model, double theta,
                                                  double* value);
ELMETA_API elmeta_status elmeta_el_model_ci(const elmeta_el_model* model, double beta,
                                            double* lower, double* upper);
ELMETA_API void elmeta_el_model_free(elmeta_el_model* model);

/* Experiments. simulate writes one CSV per cell plus manifest.json into out_dir (NULL: the
 * config's out_dir, else ELMETA_OUTPUT_DIR, else "."); manifest receives the manifest text. */
ELMETA_API elmeta_status elmeta_simulate(const char* config_path, const char* out_dir,
                                         char** manifest);
/* Fixed-effect chi-square QQ study; variants is a comma list of EL variants. */
ELMETA_API elmeta_status elmeta_qq(int64_t n, int64_t studies, int64_t replicates, uint64_t seed,
                                   const char* variants, char** csv);
/* KS distance of the same study, one value per requested variant in order. */
ELMETA_API elmeta_status elmeta_qq_ks(int64_t n, int64_t studies, int64_t replicates,
                                      uint64_t seed, const char* variants, double* ks,
                                      size_t ks_capacity);
/* gaussian != 0 selects the Gaussian control. */
ELMETA_API elmeta_status elmeta_diverge(const int64_t* studies, size_t studies_count,
                                        const int64_t* sizes, size_t sizes_count,
                                        int64_t replicates, uint64_t seed, int gaussian,
                                        char** csv);

#ifdef __cplusplus
}
#endif

#endif
