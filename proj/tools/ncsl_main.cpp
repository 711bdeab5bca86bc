// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ncsl/ncsl.h"

namespace {

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

int finish(ncsl_context* ctx, ncsl_status st) {
  const std::string result = ncsl_last_result(ctx);
  if (!result.empty()) std::printf("%s\n", result.c_str());
  if (st != NCSL_OK) std::fprintf(stderr, "error (%s): %s\n", ncsl_status_string(st), ncsl_last_error(ctx));
  return st == NCSL_OK ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-contrastive siamese learning: pretraining, diagnostics and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ncsl_version()));

  std::string config, checkpoint, out, split = "val", resume, repr, prefix, train_repr, val_repr, labels,
                                   val_labels, records, fit, out_dir, teacher, sweep_cfg;
  bool no_center = false;
  int jobs = 1;
  std::vector<int> ks;

  auto* pretrain = app.add_subcommand("pretrain", "Run self-supervised pretraining");
  pretrain->add_option("-c,--config", config, "Run config (JSON)")->required();
  pretrain->add_option("--resume", resume, "Checkpoint to resume from");

  auto* extract = app.add_subcommand("extract", "Write encoder representations to a REPR file");
  extract->add_option("-c,--config", config, "Run config (JSON)")->required();
  extract->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  extract->add_option("--out", out, "Output .repr path")->required();
  extract->add_option("--split", split, "train or val")->check(CLI::IsMember({"train", "val"}));

  auto* diagnose = app.add_subcommand("diagnose", "Singular spectrum, CEV and collapse AUC of a REPR file");
  diagnose->add_option("repr", repr, "Input .repr file")->required();
  diagnose->add_flag("--no-center", no_center, "Do not subtract the column means");
  diagnose->add_option("--out-prefix", prefix, "Prefix for .collapse.json and .spectrum.csv");

  auto* knn = app.add_subcommand("knn", "Cosine k-NN accuracy between two REPR files");
  knn->add_option("--train", train_repr, "Training representations")->required();
  knn->add_option("--val", val_repr, "Validation representations")->required();
  knn->add_option("--labels", labels, "Training labels, one per line (default: stored labels)");
  knn->add_option("--val-labels", val_labels, "Validation labels, one per line (default: stored labels)");
  knn->add_option("--k", ks, "Candidate k values");
  knn->add_option("--out", out, "Write the accuracy JSON here");

  auto* probe = app.add_subcommand("probe", "Linear probe on a frozen encoder");
  probe->add_option("-c,--config", config, "Run config (JSON)")->required();
  probe->add_option("--checkpoint", checkpoint, "Model checkpoint")->required();
  probe->add_option("--out", out, "Write the accuracy JSON here");

  auto* predict = app.add_subcommand("predict", "Fit or apply the label-free accuracy predictor");
  predict->add_option("--records", records, "ModelRecord CSV")->required();
  predict->add_option("--fit", fit, "Existing predictor fit JSON to apply");
  predict->add_option("--out-dir", out_dir, "Output directory (default: next to the records)");

  auto* distill = app.add_subcommand("distill", "Distil a teacher encoder into a student");
  distill->add_option("-c,--config", config, "Run config (JSON)")->required();
  distill->add_option("--teacher", teacher, "Teacher checkpoint")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Losses, collapse, k-NN (and probe) for a finished run");
  evaluate->add_option("-c,--config", config, "Run config (JSON)")->required();
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint (default: the final one)");

  auto* sweep = app.add_subcommand("sweep", "Run and evaluate a set of configs, collating records.csv");
  sweep->add_option("-c,--config", sweep_cfg, "Sweep config (JSON)")->required();
  sweep->add_option("--jobs", jobs, "Parallel runs")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Methods x architectures tables from a records CSV");
  report->add_option("--records", records, "ModelRecord CSV")->required();
  report->add_option("--out-prefix", prefix, "Prefix for the .md and .csv outputs");

  CLI11_PARSE(app, argc, argv);

  ncsl_context* ctx = nullptr;
  if (ncsl_context_create(&ctx) != NCSL_OK) {
    std::fprintf(stderr, "error: cannot create context\n");
    return 1;
  }
  ncsl_status st = NCSL_ERR_INVALID_ARGUMENT;
  if (*pretrain) {
    st = ncsl_pretrain(ctx, config.c_str(), opt(resume));
  } else if (*extract) {
    st = ncsl_extract(ctx, config.c_str(), checkpoint.c_str(), out.c_str(), split.c_str());
  } else if (*diagnose) {
    st = ncsl_diagnose(ctx, repr.c_str(), no_center ? 0 : 1, opt(prefix));
  } else if (*knn) {
    st = ncsl_knn(ctx, train_repr.c_str(), val_repr.c_str(), opt(labels), opt(val_labels), ks.data(), ks.size(),
                  opt(out));
  } else if (*probe) {
    st = ncsl_probe(ctx, config.c_str(), checkpoint.c_str(), opt(out));
  } else if (*predict) {
    st = ncsl_predict(ctx, records.c_str(), opt(fit), opt(out_dir));
  } else if (*distill) {
    st = ncsl_distill(ctx, config.c_str(), teacher.c_str());
  } else if (*evaluate) {
    st = ncsl_evaluate(ctx, config.c_str(), opt(checkpoint));
  } else if (*sweep) {
    st = ncsl_sweep(ctx, sweep_cfg.c_str(), jobs);
  } else if (*report) {
    st = ncsl_report(ctx, records.c_str(), opt(prefix));
  }
  const int code = finish(ctx, st);
  ncsl_context_destroy(ctx);
  return code;
}
