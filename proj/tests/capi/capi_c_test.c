/* Copyright 2026 The NCSL Authors
 * SPDX-License-Identifier: Apache-2.0 */

#include <stdio.h>
#include <string.h>

#include "ncsl/ncsl.h"

static int failures = 0;

#define EXPECT(cond)                                                   \
  do {                                                                 \
    if (!(cond)) {                                                     \
      fprintf(stderr, "%s:%d: expectation failed: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                      \
    }                                                                  \
  } while (0)

int main(void) {
  ncsl_context* ctx = NULL;
  ncsl_repr* repr = NULL;
  ncsl_model* model = NULL;
  ncsl_status st;

  EXPECT(ncsl_context_create(&ctx) == NCSL_OK);
  EXPECT(ctx != NULL);
  EXPECT(strlen(ncsl_version()) > 0);
  EXPECT(strcmp(ncsl_status_string(NCSL_ERR_CONFIG), "config error") == 0);
  EXPECT(strcmp(ncsl_last_error(ctx), "") == 0);

  st = ncsl_repr_load(ctx, "/nonexistent/file.repr", &repr);
  EXPECT(st == NCSL_ERR_IO);
  EXPECT(repr == NULL);
  EXPECT(strstr(ncsl_last_error(ctx), "file.repr") != NULL);

  st = ncsl_model_load(ctx, NULL, &model);
  EXPECT(st == NCSL_ERR_INVALID_ARGUMENT);
  EXPECT(ncsl_pretrain(NULL, "x", NULL) == NCSL_ERR_INVALID_ARGUMENT);
  EXPECT(ncsl_model_info(NULL, NULL, NULL, NULL) == NCSL_ERR_INVALID_ARGUMENT);
  EXPECT(ncsl_repr_rows(NULL) == 0);

  ncsl_context_destroy(ctx);
  if (failures == 0) printf("capi_c_test: all expectations met\n");
  return failures == 0 ? 0 : 1;
}
