/* Copyright 2026 The NCSL Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the ncsl library. Every call that can fail returns an
 * ncsl_status; on failure the message is available from ncsl_last_error on
 * the same context. Successful commands leave a JSON summary in
 * ncsl_last_result. Strings returned by the library stay valid until the next
 * call on the same context. A context must not be shared between threads.
 */
#ifndef NCSL_NCSL_H_
#define NCSL_NCSL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NCSL_API __declspec(dllexport)
#else
#define NCSL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ncsl_status {
  NCSL_OK = 0,
  NCSL_ERR_INVALID_ARGUMENT = 1,
  NCSL_ERR_SHAPE = 2,
  NCSL_ERR_NUMERIC = 3,
  NCSL_ERR_CONFIG = 4,
  NCSL_ERR_IO = 5,
  NCSL_ERR_FORMAT = 6,
  NCSL_ERR_STATE = 7,
  NCSL_ERR_INTERNAL = 8,
  /* A sweep finished but at least one of its runs failed. */
  NCSL_ERR_PARTIAL = 9
} ncsl_status;

typedef struct ncsl_context ncsl_context;
typedef struct ncsl_repr ncsl_repr;
typedef struct ncsl_model ncsl_model;

NCSL_API const char* ncsl_version(void);
NCSL_API const char* ncsl_status_string(ncsl_status status);

NCSL_API ncsl_status ncsl_context_create(ncsl_context** out);
NCSL_API void ncsl_context_destroy(ncsl_context* ctx);
NCSL_API const char* ncsl_last_error(const ncsl_context* ctx);
NCSL_API const char* ncsl_last_result(const ncsl_context* ctx);

/* Commands. Optional string arguments may be NULL. */
NCSL_API ncsl_status ncsl_pretrain(ncsl_context* ctx, const char* config_path, const char* resume_checkpoint);
NCSL_API ncsl_status ncsl_extract(ncsl_context* ctx, const char* config_path, const char* checkpoint,
                                  const char* out_path, const char* split);
NCSL_API ncsl_status ncsl_diagnose(ncsl_context* ctx, const char* repr_path, int center, const char* out_prefix);
NCSL_API ncsl_status ncsl_knn(ncsl_context* ctx, const char* train_repr, const char* val_repr,
                              const char* train_labels, const char* val_labels, const int* k_candidates,
                              size_t num_k, const char* out_json);
NCSL_API ncsl_status ncsl_probe(ncsl_context* ctx, const char* config_path, const char* checkpoint,
                                const char* out_json);
NCSL_API ncsl_status ncsl_predict(ncsl_context* ctx, const char* records_csv, const char* fit_json,
                                  const char* out_dir);
NCSL_API ncsl_status ncsl_distill(ncsl_context* ctx, const char* config_path, const char* teacher_checkpoint);
NCSL_API ncsl_status ncsl_evaluate(ncsl_context* ctx, const char* config_path, const char* checkpoint);
NCSL_API ncsl_status ncsl_sweep(ncsl_context* ctx, const char* sweep_config, int jobs);
NCSL_API ncsl_status ncsl_report(ncsl_context* ctx, const char* records_csv, const char* out_prefix);

/* Representation matrices. */
NCSL_API ncsl_status ncsl_repr_load(ncsl_context* ctx, const char* path, ncsl_repr** out);
NCSL_API void ncsl_repr_free(ncsl_repr* repr);
NCSL_API int64_t ncsl_repr_rows(const ncsl_repr* repr);
NCSL_API int64_t ncsl_repr_cols(const ncsl_repr* repr);
/* Row-major rows x cols. */
NCSL_API const float* ncsl_repr_data(const ncsl_repr* repr);
NCSL_API ncsl_status ncsl_repr_auc(ncsl_context* ctx, const ncsl_repr* repr, int center, double* out_auc);

/* Trained models. */
NCSL_API ncsl_status ncsl_model_load(ncsl_context* ctx, const char* checkpoint, ncsl_model** out);
NCSL_API void ncsl_model_free(ncsl_model* model);
NCSL_API ncsl_status ncsl_model_info(const ncsl_model* model, int* repr_dim, int* in_channels, int* image_size);
/* images: n x in_channels x image_size x image_size, already normalised.
 * out: n x repr_dim. Eval mode. */
NCSL_API ncsl_status ncsl_model_represent(ncsl_context* ctx, ncsl_model* model, const float* images, int64_t n,
                                          float* out);

#ifdef __cplusplus
}
#endif

#endif /* NCSL_NCSL_H_ */
