// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "ncsl/ncsl.h"

#include <memory>
#include <new>
#include <optional>
#include <string>

#include "app/commands.hpp"
#include "common/error.hpp"
#include "diag/collapse.hpp"
#include "diag/repr.hpp"
#include "train/checkpoint.hpp"

struct ncsl_context {
  std::string error;
  std::string result;
};

struct ncsl_repr {
  ncsl::diag::ReprMatrix m;
};

struct ncsl_model {
  std::unique_ptr<ncsl::train::Model> model;
};

namespace {

std::optional<std::filesystem::path> opt_path(const char* s) {
  if (s == nullptr || *s == '\0') return std::nullopt;
  return std::filesystem::path(s);
}

std::string required(const char* s, const char* what) {
  NCSL_CHECK(s != nullptr && *s != '\0', ncsl::InvalidArgument, what, " is required");
  return s;
}

template <class F>
ncsl_status guarded(ncsl_context* ctx, F&& fn) {
  if (ctx == nullptr) return NCSL_ERR_INVALID_ARGUMENT;
  ctx->error.clear();
  try {
    return fn();
  } catch (const ncsl::InvalidArgument& e) {
    ctx->error = e.what();
    return NCSL_ERR_INVALID_ARGUMENT;
  } catch (const ncsl::ShapeError& e) {
    ctx->error = e.what();
    return NCSL_ERR_SHAPE;
  } catch (const ncsl::NumericError& e) {
    ctx->error = e.what();
    return NCSL_ERR_NUMERIC;
  } catch (const ncsl::ConfigError& e) {
    ctx->error = e.what();
    return NCSL_ERR_CONFIG;
  } catch (const ncsl::IoError& e) {
    ctx->error = e.what();
    return NCSL_ERR_IO;
  } catch (const ncsl::FormatError& e) {
    ctx->error = e.what();
    return NCSL_ERR_FORMAT;
  } catch (const ncsl::StateError& e) {
    ctx->error = e.what();
    return NCSL_ERR_STATE;
  } catch (const std::filesystem::filesystem_error& e) {
    ctx->error = e.what();
    return NCSL_ERR_IO;
  } catch (const std::exception& e) {
    ctx->error = e.what();
    return NCSL_ERR_INTERNAL;
  } catch (...) {
    ctx->error = "unknown error";
    return NCSL_ERR_INTERNAL;
  }
}

template <class F>
ncsl_status command(ncsl_context* ctx, F&& fn) {
  return guarded(ctx, [&] {
    ctx->result = fn().dump();
    return NCSL_OK;
  });
}

}  // namespace

extern "C" {

const char* ncsl_version(void) { return "0.1.0"; }

const char* ncsl_status_string(ncsl_status status) {
  switch (status) {
    case NCSL_OK: return "ok";
    case NCSL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case NCSL_ERR_SHAPE: return "shape error";
    case NCSL_ERR_NUMERIC: return "numeric error";
    case NCSL_ERR_CONFIG: return "config error";
    case NCSL_ERR_IO: return "io error";
    case NCSL_ERR_FORMAT: return "format error";
    case NCSL_ERR_STATE: return "state error";
    case NCSL_ERR_INTERNAL: return "internal error";
    case NCSL_ERR_PARTIAL: return "partial failure";
  }
  return "unknown status";
}

ncsl_status ncsl_context_create(ncsl_context** out) {
  if (out == nullptr) return NCSL_ERR_INVALID_ARGUMENT;
  *out = new (std::nothrow) ncsl_context();
  return *out == nullptr ? NCSL_ERR_INTERNAL : NCSL_OK;
}

void ncsl_context_destroy(ncsl_context* ctx) { delete ctx; }

const char* ncsl_last_error(const ncsl_context* ctx) { return ctx == nullptr ? "null context" : ctx->error.c_str(); }

const char* ncsl_last_result(const ncsl_context* ctx) { return ctx == nullptr ? "" : ctx->result.c_str(); }

ncsl_status ncsl_pretrain(ncsl_context* ctx, const char* config_path, const char* resume_checkpoint) {
  return command(ctx, [&] { return ncsl::app::cmd_pretrain(required(config_path, "config"), opt_path(resume_checkpoint)); });
}

ncsl_status ncsl_extract(ncsl_context* ctx, const char* config_path, const char* checkpoint, const char* out_path,
                         const char* split) {
  return command(ctx, [&] {
    return ncsl::app::cmd_extract(required(config_path, "config"), required(checkpoint, "checkpoint"),
                                  required(out_path, "output path"), split == nullptr ? "val" : split);
  });
}

ncsl_status ncsl_diagnose(ncsl_context* ctx, const char* repr_path, int center, const char* out_prefix) {
  return command(ctx, [&] { return ncsl::app::cmd_diagnose(required(repr_path, "repr path"), center != 0, opt_path(out_prefix)); });
}

ncsl_status ncsl_knn(ncsl_context* ctx, const char* train_repr, const char* val_repr, const char* train_labels,
                     const char* val_labels, const int* k_candidates, size_t num_k, const char* out_json) {
  return command(ctx, [&] {
    NCSL_CHECK(num_k == 0 || k_candidates != nullptr, ncsl::InvalidArgument, "k_candidates is NULL");
    std::vector<int> ks(k_candidates, k_candidates + num_k);
    return ncsl::app::cmd_knn(required(train_repr, "train repr"), required(val_repr, "val repr"), opt_path(train_labels),
                              opt_path(val_labels), ks, opt_path(out_json));
  });
}

ncsl_status ncsl_probe(ncsl_context* ctx, const char* config_path, const char* checkpoint, const char* out_json) {
  return command(ctx, [&] {
    return ncsl::app::cmd_probe(required(config_path, "config"), required(checkpoint, "checkpoint"), opt_path(out_json));
  });
}

ncsl_status ncsl_predict(ncsl_context* ctx, const char* records_csv, const char* fit_json, const char* out_dir) {
  return command(ctx, [&] {
    return ncsl::app::cmd_predict(required(records_csv, "records"), opt_path(fit_json), opt_path(out_dir));
  });
}

ncsl_status ncsl_distill(ncsl_context* ctx, const char* config_path, const char* teacher_checkpoint) {
  return command(ctx, [&] {
    return ncsl::app::cmd_distill(required(config_path, "config"), required(teacher_checkpoint, "teacher checkpoint"));
  });
}

ncsl_status ncsl_evaluate(ncsl_context* ctx, const char* config_path, const char* checkpoint) {
  return command(ctx, [&] { return ncsl::app::cmd_evaluate(required(config_path, "config"), opt_path(checkpoint)); });
}

ncsl_status ncsl_sweep(ncsl_context* ctx, const char* sweep_config, int jobs) {
  return guarded(ctx, [&] {
    const auto j = ncsl::app::cmd_sweep(required(sweep_config, "sweep config"), jobs);
    ctx->result = j.dump();
    if (!j.at("failed").empty()) {
      ctx->error = std::to_string(j.at("failed").size()) + " of " + std::to_string(j.at("runs").get<int>()) +
                   " runs failed; see " + j.at("records").get<std::string>();
      return NCSL_ERR_PARTIAL;
    }
    return NCSL_OK;
  });
}

ncsl_status ncsl_report(ncsl_context* ctx, const char* records_csv, const char* out_prefix) {
  return command(ctx, [&] { return ncsl::app::cmd_report(required(records_csv, "records"), opt_path(out_prefix)); });
}

ncsl_status ncsl_repr_load(ncsl_context* ctx, const char* path, ncsl_repr** out) {
  return guarded(ctx, [&] {
    NCSL_CHECK(out != nullptr, ncsl::InvalidArgument, "out is NULL");
    auto r = std::make_unique<ncsl_repr>();
    r->m = ncsl::diag::read_repr_file(required(path, "repr path"));
    *out = r.release();
    return NCSL_OK;
  });
}

void ncsl_repr_free(ncsl_repr* repr) { delete repr; }
int64_t ncsl_repr_rows(const ncsl_repr* repr) { return repr == nullptr ? 0 : repr->m.rows; }
int64_t ncsl_repr_cols(const ncsl_repr* repr) { return repr == nullptr ? 0 : repr->m.cols; }
const float* ncsl_repr_data(const ncsl_repr* repr) { return repr == nullptr ? nullptr : repr->m.values.data(); }

ncsl_status ncsl_repr_auc(ncsl_context* ctx, const ncsl_repr* repr, int center, double* out_auc) {
  return guarded(ctx, [&] {
    NCSL_CHECK(repr != nullptr && out_auc != nullptr, ncsl::InvalidArgument, "NULL argument");
    *out_auc = ncsl::diag::collapse_auc(ncsl::diag::singular_spectrum(repr->m, center != 0));
    return NCSL_OK;
  });
}

ncsl_status ncsl_model_load(ncsl_context* ctx, const char* checkpoint, ncsl_model** out) {
  return guarded(ctx, [&] {
    NCSL_CHECK(out != nullptr, ncsl::InvalidArgument, "out is NULL");
    auto m = std::make_unique<ncsl_model>();
    m->model = ncsl::train::load_model(required(checkpoint, "checkpoint"));
    *out = m.release();
    return NCSL_OK;
  });
}

void ncsl_model_free(ncsl_model* model) { delete model; }

ncsl_status ncsl_model_info(const ncsl_model* model, int* repr_dim, int* in_channels, int* image_size) {
  if (model == nullptr) return NCSL_ERR_INVALID_ARGUMENT;
  const auto& e = model->model->config().encoder;
  if (repr_dim != nullptr) *repr_dim = e.repr_dim;
  if (in_channels != nullptr) *in_channels = e.in_channels;
  if (image_size != nullptr) *image_size = e.image_size;
  return NCSL_OK;
}

ncsl_status ncsl_model_represent(ncsl_context* ctx, ncsl_model* model, const float* images, int64_t n, float* out) {
  return guarded(ctx, [&] {
    NCSL_CHECK(model != nullptr && images != nullptr && out != nullptr, ncsl::InvalidArgument, "NULL argument");
    NCSL_CHECK(n >= 1, ncsl::InvalidArgument, "n must be >= 1");
    const auto& e = model->model->config().encoder;
    const std::int64_t per = static_cast<std::int64_t>(e.in_channels) * e.image_size * e.image_size;
    ncsl::diff::Tensor<float> x({n, e.in_channels, e.image_size, e.image_size},
                                std::vector<float>(images, images + n * per));
    const auto h = model->model->represent(x);
    std::copy(h.ptr(), h.ptr() + h.size(), out);
    return NCSL_OK;
  });
}

}  // extern "C"
