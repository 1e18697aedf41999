/*
 * kalium: ECG-feature potassium estimation with ANFIS / FCM-ANFIS models.
 *
 * C interface to the shared library. Objects are opaque handles created by
 * the library and released with the matching *_free function. Every
 * function returning kalium_status leaves a message for
 * kalium_last_error() on failure (per calling thread). Strings returned
 * through char** are heap copies owned by the caller; release them with
 * kalium_string_free().
 */
#ifndef KALIUM_KALIUM_H
#define KALIUM_KALIUM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(KALIUM_BUILDING_LIBRARY)
#    define KALIUM_API __declspec(dllexport)
#  else
#    define KALIUM_API __declspec(dllimport)
#  endif
#else
#  define KALIUM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as CLI exit codes. */
typedef enum kalium_status {
  KALIUM_OK = 0,
  KALIUM_ERR_VALIDATION = 1,
  KALIUM_ERR_IO = 2,
  KALIUM_ERR_INTERNAL = 3
} kalium_status;

typedef enum kalium_label { KALIUM_HYPO = 0, KALIUM_NORMAL = 1, KALIUM_HYPER = 2 } kalium_label;

typedef enum kalium_variant { KALIUM_CONVENTIONAL = 0, KALIUM_FCM_ANFIS = 1 } kalium_variant;

typedef struct kalium_cohort kalium_cohort;
typedef struct kalium_model kalium_model;
typedef struct kalium_evaluation kalium_evaluation;

KALIUM_API const char* kalium_version(void);
KALIUM_API const char* kalium_last_error(void);
KALIUM_API void kalium_string_free(char* s);

/* ---- labeling --------------------------------------------------------- */

/* < 3.5 mM hypo, 3.5..5.0 mM normal (both inclusive), > 5.0 mM hyper. */
KALIUM_API kalium_status kalium_label_potassium(double k_mm, kalium_label* out);
/* Same thresholds for model estimates; only non-finite input is rejected. */
KALIUM_API kalium_status kalium_classify_estimate(double k_mm, kalium_label* out);
KALIUM_API const char* kalium_label_name(kalium_label label);

/* ---- cohort ----------------------------------------------------------- */

/* Parse ecg/labs CSV and keep, per patient, the complete ECG closest to a
 * potassium value within +/- window_s seconds. */
KALIUM_API kalium_status kalium_cohort_join_files(const char* ecg_csv_path, const char* labs_csv_path,
                                                  int64_t window_s, kalium_cohort** out);
KALIUM_API kalium_status kalium_cohort_join_text(const char* ecg_csv, const char* labs_csv, int64_t window_s,
                                                 kalium_cohort** out);
KALIUM_API void kalium_cohort_free(kalium_cohort* cohort);
KALIUM_API size_t kalium_cohort_size(const kalium_cohort* cohort);
/* counts[0..2] = hypo, normal, hyper */
KALIUM_API void kalium_cohort_class_counts(const kalium_cohort* cohort, size_t counts[3]);
/* Skipped or suspicious input rows ("ecg line 7: ..."). */
KALIUM_API size_t kalium_cohort_diagnostic_count(const kalium_cohort* cohort);
KALIUM_API const char* kalium_cohort_diagnostic(const kalium_cohort* cohort, size_t index);
KALIUM_API kalium_status kalium_cohort_csv(const kalium_cohort* cohort, char** out);
KALIUM_API kalium_status kalium_cohort_json(const kalium_cohort* cohort, char** out);

/* Synthetic ecg.csv / labs.csv contents. */
KALIUM_API kalium_status kalium_synthesize(size_t n, double noise_sd, uint64_t seed, char** ecg_csv,
                                           char** labs_csv);

/* ---- feature selection ------------------------------------------------ */

KALIUM_API kalium_status kalium_feature_report_json(const kalium_cohort* cohort, double alpha, char** out);
/* Box statistics per significant feature and class. */
KALIUM_API kalium_status kalium_boxplots_json(const kalium_cohort* cohort, double alpha, char** out);

/* ---- training and cross-validation ------------------------------------ */

typedef struct kalium_train_config {
  kalium_variant variant;
  size_t epochs;
  double learning_rate;
  size_t mfs_per_dim;   /* conventional */
  size_t clusters;      /* FCM-ANFIS */
  double fuzziness;     /* FCM m */
  double fcm_tol;
  size_t phase_split;   /* FCM-ANFIS: epochs spent on the clustered rule base */
  size_t folds;
  int stratified;
  uint64_t seed;
  const char* features; /* comma-separated column names, e.g. "t_axis_deg" */
  int parallel;         /* train folds concurrently */
} kalium_train_config;

/* Defaults: FCM-ANFIS, 200 epochs, lr 0.01, 5 MFs, 3 clusters, m 2,
 * tol 1e-5, split 100, 10 stratified folds, seed 42, "t_axis_deg". */
KALIUM_API void kalium_train_config_init(kalium_train_config* config);

typedef struct kalium_eval_summary {
  size_t n;
  double error_mean_mm;
  double error_sd_mm;      /* NaN when undefined */
  double abs_error_mean_mm;
  double abs_error_sd_mm;  /* NaN when undefined */
  double mape_percent;
  double pearson_r;        /* NaN when undefined */
  double accuracy;
  double sensitivity[3];   /* NaN when the class is absent */
  double specificity[3];
} kalium_eval_summary;

KALIUM_API kalium_status kalium_evaluate(const kalium_cohort* cohort, const kalium_train_config* config,
                                         kalium_evaluation** out);
KALIUM_API void kalium_evaluation_free(kalium_evaluation* evaluation);
KALIUM_API kalium_status kalium_evaluation_summary(const kalium_evaluation* evaluation, kalium_eval_summary* out);
KALIUM_API kalium_status kalium_evaluation_report_json(const kalium_evaluation* evaluation, char** out);
KALIUM_API kalium_status kalium_evaluation_confusion_csv(const kalium_evaluation* evaluation, char** out);
KALIUM_API size_t kalium_evaluation_fold_count(const kalium_evaluation* evaluation);
KALIUM_API kalium_status kalium_evaluation_fold_model_json(const kalium_evaluation* evaluation, size_t fold,
                                                           char** out);
KALIUM_API kalium_status kalium_evaluation_fold_history_csv(const kalium_evaluation* evaluation, size_t fold,
                                                            char** out);
/* Side-by-side text table of several evaluations. */
KALIUM_API kalium_status kalium_comparison_table(const kalium_evaluation* const* evaluations, size_t count,
                                                 char** out);

/* Fit one model on the whole cohort. */
KALIUM_API kalium_status kalium_train(const kalium_cohort* cohort, const kalium_train_config* config,
                                      kalium_model** out);

/* ---- models ----------------------------------------------------------- */

KALIUM_API kalium_status kalium_model_from_json(const char* json, kalium_model** out);
KALIUM_API kalium_status kalium_model_load(const char* path, kalium_model** out);
KALIUM_API void kalium_model_free(kalium_model* model);
KALIUM_API kalium_status kalium_model_to_json(const kalium_model* model, char** out);
KALIUM_API size_t kalium_model_input_count(const kalium_model* model);
KALIUM_API const char* kalium_model_input_name(const kalium_model* model, size_t index);
KALIUM_API size_t kalium_model_rule_count(const kalium_model* model);

typedef struct kalium_prediction {
  double estimate_mm;
  kalium_label label;
  int zero_firing; /* nonzero when no rule fired and the nearest rule was used */
} kalium_prediction;

KALIUM_API kalium_status kalium_model_predict(const kalium_model* model, const double* inputs, size_t input_count,
                                              kalium_prediction* out);
/* Estimate, class and per-rule firing breakdown as JSON. */
KALIUM_API kalium_status kalium_model_trace_json(const kalium_model* model, const double* inputs,
                                                 size_t input_count, char** out);
/* Predict every row of a headered CSV holding the model's input columns;
 * returns a JSON array of traces. A missing column is a validation error
 * naming it. */
KALIUM_API kalium_status kalium_model_predict_csv(const kalium_model* model, const char* csv, char** out);

#ifdef __cplusplus
}
#endif

#endif /* KALIUM_KALIUM_H */
