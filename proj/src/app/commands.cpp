// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#include "app/commands.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "common/fs.hpp"
#include "diag/collapse.hpp"
#include "diag/repr.hpp"
#include "distill/distill.hpp"
#include "eval/knn.hpp"
#include "train/evaluate.hpp"
#include "train/trainer.hpp"

namespace ncsl::app {

using nlohmann::json;

namespace {

std::string fmt_g(double v) {
  std::ostringstream o;
  o << std::setprecision(6) << v;
  return o.str();
}

std::vector<int> read_labels_file(const fs::path& path) {
  std::ifstream in(path);
  NCSL_CHECK(in.good(), IoError, "cannot open labels file '", path.string(), "'");
  std::vector<int> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(line, &used);
    } catch (const std::logic_error&) {
      used = 0;
    }
    NCSL_CHECK(used > 0 && v >= 0, FormatError, "labels file '", path.string(), "' line ", lineno,
               ": expected a non-negative integer, got '", line, "'");
    out.push_back(v);
  }
  return out;
}

void write_json(const fs::path& path, const json& j) { write_text_atomic(path, j.dump(2) + "\n"); }

fs::path final_checkpoint(const RunConfig& cfg) {
  return train::checkpoint_path(cfg.output_dir, cfg.ordering.total_steps);
}

json knn_json(const eval::KnnResult& r) {
  return {{"best_k", r.best_k}, {"accuracy", r.accuracy}, {"k", r.ks}, {"per_k_accuracy", r.per_k_accuracy}};
}

json probe_json(const eval::ProbeResult& r, const eval::ProbeConfig& pc) {
  return {{"val_acc", r.val_acc},
          {"train_acc", r.train_acc},
          {"final_loss", r.final_loss},
          {"steps", r.steps},
          {"protocol", {{"optimizer", "sgd-momentum"},
                        {"epochs", pc.epochs},
                        {"batch_size", pc.batch_size},
                        {"base_lr", pc.base_lr},
                        {"momentum", pc.momentum},
                        {"weight_decay", pc.weight_decay}}}};
}

}  // namespace

std::string method_label(const RunConfig& cfg) {
  return std::string(models::to_string(cfg.model.variant)) + "/" + data::to_string(cfg.ordering.mode);
}

std::string arch_label(const models::EncoderConfig& e) {
  std::string s = models::to_string(e.kind);
  if (e.kind == models::EncoderKind::conv) s += std::string("-") + models::to_string(e.block);
  return s + "-d" + std::to_string(e.depth) + "-w" + fmt_g(e.width_multiplier) + "-r" + std::to_string(e.repr_dim);
}

json cmd_pretrain(const fs::path& config, const std::optional<fs::path>& resume) {
  const auto cfg = load_run_config(config);
  train::PretrainOptions opts;
  opts.resume_from = resume;
  const auto r = train::pretrain(cfg, opts);
  json cks = json::array();
  for (const auto& p : r.checkpoints) cks.push_back(p.string());
  return {{"steps", r.steps_done},
          {"final_checkpoint", r.final_checkpoint.string()},
          {"checkpoints", cks},
          {"metrics", r.metrics_log.string()},
          {"output_dir", cfg.output_dir}};
}

json cmd_extract(const fs::path& config, const fs::path& checkpoint, const fs::path& out, const std::string& split) {
  const auto cfg = load_run_config(config);
  NCSL_CHECK(split == "train" || split == "val", InvalidArgument, "split must be train or val, got '", split, "'");
  auto model = train::load_model(checkpoint);
  NCSL_CHECK(model->config().encoder.in_channels == cfg.model.encoder.in_channels &&
                 model->config().encoder.image_size == cfg.augmentation.out_size,
             ConfigError, "checkpoint input shape does not match the config");
  const auto ds = split == "train" ? train::load_training_set(cfg) : train::load_validation_set(cfg);
  auto m = train::extract_representations(*model, ds, cfg);
  m.checkpoint_id = checkpoint.string();
  m.dataset_id = (split == "train" || cfg.dataset.val_path.empty() ? cfg.dataset.path : cfg.dataset.val_path) + ":" + split;
  diag::write_repr_file(out, m);
  return {{"repr", out.string()}, {"rows", m.rows}, {"cols", m.cols}};
}

json cmd_diagnose(const fs::path& repr, bool center, const std::optional<fs::path>& out_prefix) {
  const auto m = diag::read_repr_file(repr);
  const auto report = diag::diagnose(m, center);
  auto prefix = out_prefix ? *out_prefix : fs::path(repr).replace_extension();
  const fs::path json_path = prefix.string() + ".collapse.json";
  const fs::path csv_path = prefix.string() + ".spectrum.csv";
  auto j = diag::to_json(report);
  j["source"] = repr.string();
  j["checkpoint_id"] = m.checkpoint_id;
  j["dataset_id"] = m.dataset_id;
  write_json(json_path, j);
  write_text_atomic(csv_path, diag::spectrum_csv(report));
  return {{"auc", report.auc},
          {"effective_rank_90", report.effective_rank_90},
          {"report", json_path.string()},
          {"spectrum", csv_path.string()},
          {"warnings", report.warnings}};
}

json cmd_knn(const fs::path& train_repr, const fs::path& val_repr, const std::optional<fs::path>& train_labels,
             const std::optional<fs::path>& val_labels, const std::vector<int>& k_candidates,
             const std::optional<fs::path>& out) {
  const auto a = diag::read_repr_file(train_repr);
  const auto b = diag::read_repr_file(val_repr);
  NCSL_CHECK(a.cols == b.cols, ShapeError, "representation dims differ: ", a.cols, " vs ", b.cols);
  const auto la = train_labels ? read_labels_file(*train_labels) : a.labels;
  const auto lb = val_labels ? read_labels_file(*val_labels) : b.labels;
  NCSL_CHECK(static_cast<std::int64_t>(la.size()) == a.rows, InvalidArgument, "train labels: ", la.size(),
             " entries for ", a.rows, " rows", train_labels ? "" : " (repr file carries no labels; pass --labels)");
  NCSL_CHECK(static_cast<std::int64_t>(lb.size()) == b.rows, InvalidArgument, "val labels: ", lb.size(),
             " entries for ", b.rows, " rows", val_labels ? "" : " (repr file carries no labels; pass --val-labels)");
  const auto ks = k_candidates.empty() ? eval::default_k_candidates() : k_candidates;
  const auto r = eval::knn_evaluate(a.values, la, b.values, lb, a.cols, ks);
  auto j = knn_json(r);
  j["train"] = train_repr.string();
  j["val"] = val_repr.string();
  if (out) write_json(*out, j);
  return j;
}

json cmd_probe(const fs::path& config, const fs::path& checkpoint, const std::optional<fs::path>& out) {
  const auto cfg = load_run_config(config);
  auto model = train::load_model(checkpoint);
  const auto tr = train::load_training_set(cfg);
  const auto va = train::load_validation_set(cfg);
  const auto r = train::linear_probe(*model, tr, va, cfg);
  auto j = probe_json(r, cfg.probe);
  j["checkpoint"] = checkpoint.string();
  write_json(out ? *out : fs::path(cfg.output_dir) / "probe.json", j);
  return j;
}

json cmd_predict(const fs::path& records_path, const std::optional<fs::path>& fit_path,
                 const std::optional<fs::path>& out_dir) {
  const auto records = eval::read_records_csv(records_path);
  const auto dir = out_dir ? *out_dir : records_path.parent_path();
  json summary;
  eval::PredictorFit fit;
  if (fit_path) {
    const auto j = json::parse(read_text(*fit_path));
    fit = eval::predictor_fit_from_json(j.contains("primary") ? j.at("primary") : j);
    summary["fit"] = fit_path->string();
  } else {
    const bool have_probe = std::any_of(records.begin(), records.end(),
                                        [](const auto& r) { return r.status == "ok" && r.probe_acc.has_value(); });
    const auto target = have_probe ? eval::AccuracyTarget::probe_acc : eval::AccuracyTarget::knn_acc;
    fit = eval::fit_accuracy_predictor(records, eval::LossFeature::val_loss, target);
    json out = {{"primary", eval::to_json(fit)}};
    const bool have_train = std::all_of(records.begin(), records.end(), [&](const auto& r) {
      const auto& acc = have_probe ? r.probe_acc : r.knn_acc;
      return r.status != "ok" || !acc || r.train_loss.has_value();
    });
    if (have_train) {
      try {
        out["train_loss_fit"] = eval::to_json(eval::fit_accuracy_predictor(records, eval::LossFeature::train_loss, target));
      } catch (const NumericError& e) {
        out["train_loss_fit_error"] = e.what();
      }
    }
    const auto fp = dir / "predictor_fit.json";
    write_json(fp, out);
    summary = out;
    summary["fit"] = fp.string();
  }
  const auto ranked = eval::rank_candidates(fit, records);
  std::ostringstream csv;
  csv << "rank,model_id,predicted_acc\n" << std::setprecision(17);
  for (const auto& c : ranked) csv << c.rank << "," << c.model_id << "," << c.predicted << "\n";
  const auto rp = dir / "ranking.csv";
  write_text_atomic(rp, csv.str());
  summary["ranking"] = rp.string();
  summary["candidates"] = ranked.size();
  return summary;
}

json cmd_distill(const fs::path& config, const fs::path& teacher) {
  const auto cfg = load_run_config(config);
  const auto r = distill::run_distill(cfg, teacher);
  return {{"steps", r.steps_done},
          {"initial_loss", r.initial_loss},
          {"final_checkpoint", r.final_checkpoint.string()},
          {"metrics", r.metrics_log.string()}};
}

eval::ModelRecord evaluate_run(const RunConfig& cfg, const std::optional<fs::path>& checkpoint) {
  const fs::path dir = cfg.output_dir;
  const auto ckpt = checkpoint ? *checkpoint : final_checkpoint(cfg);
  auto model = train::load_model(ckpt);
  const auto tr = train::load_training_set(cfg);
  const auto va = train::load_validation_set(cfg);

  eval::ModelRecord rec;
  rec.model_id = dir.filename().string();
  rec.method = method_label(cfg);
  rec.arch = arch_label(model->config().encoder);
  rec.subset = fmt_g(cfg.dataset.subset_fraction);
  rec.seed = std::to_string(cfg.seed);
  rec.val_loss = train::evaluation_loss(*model, va, cfg);
  rec.train_loss = train::evaluation_loss(*model, tr, cfg);

  auto rt = train::extract_representations(*model, tr, cfg);
  auto rv = train::extract_representations(*model, va, cfg);
  rt.checkpoint_id = rv.checkpoint_id = ckpt.string();
  rt.dataset_id = cfg.dataset.path + ":train";
  rv.dataset_id = (cfg.dataset.val_path.empty() ? cfg.dataset.path : cfg.dataset.val_path) + ":val";
  diag::write_repr_file(dir / "train.repr", rt);
  diag::write_repr_file(dir / "val.repr", rv);

  const auto report = diag::diagnose(rv, cfg.eval.center);
  rec.auc = report.auc;
  write_json(dir / "collapse.json", diag::to_json(report));
  write_text_atomic(dir / "spectrum.csv", diag::spectrum_csv(report));

  const auto knn = eval::knn_evaluate(rt.values, rt.labels, rv.values, rv.labels, rt.cols, cfg.eval.k_candidates);
  rec.knn_acc = knn.accuracy;
  json j = {{"checkpoint", ckpt.string()},
            {"val_loss", rec.val_loss},
            {"train_loss", *rec.train_loss},
            {"auc", rec.auc},
            {"knn", knn_json(knn)}};
  if (cfg.eval.run_probe) {
    const auto pr = train::linear_probe(*model, tr, va, cfg);
    rec.probe_acc = pr.val_acc;
    j["probe"] = probe_json(pr, cfg.probe);
  }
  write_json(dir / "eval.json", j);
  eval::write_records_csv(dir / "record.csv", {rec});
  return rec;
}

json cmd_evaluate(const fs::path& config, const std::optional<fs::path>& checkpoint) {
  const auto cfg = load_run_config(config);
  const auto r = evaluate_run(cfg, checkpoint);
  json j = {{"model_id", r.model_id}, {"val_loss", r.val_loss}, {"auc", r.auc}, {"knn_acc", *r.knn_acc},
            {"train_loss", *r.train_loss}, {"record", (fs::path(cfg.output_dir) / "record.csv").string()}};
  if (r.probe_acc) j["probe_acc"] = *r.probe_acc;
  return j;
}

namespace {

json dotted_patch(const std::string& path, const json& value) {
  json patch = value;
  std::string rest = path;
  std::vector<std::string> parts;
  std::size_t pos;
  while ((pos = rest.find('.')) != std::string::npos) {
    parts.push_back(rest.substr(0, pos));
    rest = rest.substr(pos + 1);
  }
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    NCSL_CHECK(!it->empty(), ConfigError, "sweep grid key '", path, "' has an empty component");
    patch = json{{*it, patch}};
  }
  return patch;
}

std::string value_label(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return fmt_g(v.get<double>());
  return v.dump();
}

bool safe_name(const std::string& s) {
  if (s.empty() || s == "." || s == "..") return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '=')) return false;
  return true;
}

}  // namespace

SweepPlan parse_sweep(const json& j) {
  NCSL_CHECK(j.is_object(), ConfigError, "sweep config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    NCSL_CHECK(it.key() == "output_dir" || it.key() == "base" || it.key() == "runs" || it.key() == "grid",
               ConfigError, "unknown sweep key '", it.key(), "'");
  NCSL_CHECK(j.contains("output_dir") && j["output_dir"].is_string(), ConfigError,
             "sweep needs a string 'output_dir'");
  NCSL_CHECK(j.contains("base") && j["base"].is_object(), ConfigError, "sweep needs an object 'base'");
  NCSL_CHECK(!j["base"].contains("output_dir"), ConfigError,
             "'base.output_dir' is not allowed; run directories live under the sweep output_dir");
  SweepPlan plan;
  plan.output_dir = j["output_dir"].get<std::string>();

  std::vector<std::pair<std::string, json>> runs;
  if (j.contains("runs")) {
    NCSL_CHECK(j["runs"].is_array(), ConfigError, "'runs' must be an array");
    int i = 0;
    for (const auto& r : j["runs"]) {
      const auto where = "runs[" + std::to_string(i++) + "]";
      NCSL_CHECK(r.is_object(), ConfigError, where, " must be an object");
      for (auto it = r.begin(); it != r.end(); ++it)
        NCSL_CHECK(it.key() == "name" || it.key() == "overrides", ConfigError, "unknown key '", where, ".",
                   it.key(), "'");
      NCSL_CHECK(r.contains("name") && r["name"].is_string(), ConfigError, where, " needs a string 'name'");
      const auto ov = r.value("overrides", json::object());
      NCSL_CHECK(ov.is_object(), ConfigError, where, ".overrides must be an object");
      runs.emplace_back(r["name"].get<std::string>(), ov);
    }
  }
  if (runs.empty()) runs.emplace_back("", json::object());

  if (j.contains("grid")) {
    NCSL_CHECK(j["grid"].is_object(), ConfigError, "'grid' must be an object");
    for (auto it = j["grid"].begin(); it != j["grid"].end(); ++it) {
      NCSL_CHECK(it.value().is_array() && !it.value().empty(), ConfigError, "grid.", it.key(),
                 " must be a non-empty array");
      const auto leaf = it.key().substr(it.key().rfind('.') + 1);
      std::vector<std::pair<std::string, json>> next;
      for (const auto& [name, ov] : runs) {
        for (const auto& v : it.value()) {
          auto merged = ov;
          merged.merge_patch(dotted_patch(it.key(), v));
          const auto tag = leaf + "=" + value_label(v);
          next.emplace_back(name.empty() ? tag : name + "_" + tag, merged);
        }
      }
      runs = std::move(next);
    }
  }

  std::set<std::string> seen;
  for (const auto& [name, ov] : runs) {
    NCSL_CHECK(!name.empty(), ConfigError, "sweep needs 'runs' or 'grid'");
    NCSL_CHECK(safe_name(name), ConfigError, "run name '", name, "' must use only [A-Za-z0-9._=-]");
    NCSL_CHECK(seen.insert(name).second, ConfigError, "duplicate run name '", name, "'");
    auto cfg_json = j["base"];
    cfg_json.merge_patch(ov);
    cfg_json["output_dir"] = (plan.output_dir / name).string();
    try {
      plan.runs.push_back({name, parse_run_config(cfg_json)});
    } catch (const ConfigError& e) {
      fail<ConfigError>("sweep run '", name, "': ", e.what());
    }
  }
  return plan;
}

SweepPlan load_sweep(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    fail<ConfigError>("sweep config '", path.string(), "' is not valid JSON: ", e.what());
  }
  auto plan = parse_sweep(j);
  for (auto& r : plan.runs) apply_env_overrides(r.config);
  return plan;
}

json cmd_sweep(const fs::path& sweep_config, int jobs) {
  NCSL_CHECK(jobs >= 1, InvalidArgument, "--jobs must be >= 1, got ", jobs);
  const auto plan = load_sweep(sweep_config);
  fs::create_directories(plan.output_dir);
  json resolved = json::array();
  for (const auto& r : plan.runs) resolved.push_back({{"name", r.name}, {"config", to_json(r.config)}});
  write_json(plan.output_dir / "sweep.json", {{"runs", resolved}});

  std::cout.flush();
  std::cerr.flush();
  std::fflush(nullptr);
  std::map<pid_t, std::size_t> running;
  std::vector<int> exit_codes(plan.runs.size(), -1);
  std::size_t next = 0;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = ::waitpid(-1, &status, 0);
    NCSL_CHECK(pid > 0, IoError, "waitpid failed");
    const auto it = running.find(pid);
    if (it == running.end()) return;
    exit_codes[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    running.erase(it);
  };
  while (next < plan.runs.size() || !running.empty()) {
    while (next < plan.runs.size() && static_cast<int>(running.size()) < jobs) {
      const auto& run = plan.runs[next];
      fs::create_directories(run.config.output_dir);
      const pid_t pid = ::fork();
      NCSL_CHECK(pid >= 0, IoError, "fork failed for run '", run.name, "'");
      if (pid == 0) {
        int code = 0;
        try {
          train::pretrain(run.config);
          evaluate_run(run.config);
        } catch (const std::exception& e) {
          std::ofstream(fs::path(run.config.output_dir) / "error.txt") << e.what() << "\n";
          code = 1;
        }
        ::_exit(code);
      }
      running[pid] = next++;
    }
    if (!running.empty()) reap_one();
  }

  std::vector<eval::ModelRecord> records;
  json failed = json::array();
  for (std::size_t i = 0; i < plan.runs.size(); ++i) {
    const auto& run = plan.runs[i];
    const auto rec_path = fs::path(run.config.output_dir) / "record.csv";
    if (exit_codes[i] == 0 && fs::exists(rec_path)) {
      auto rs = eval::read_records_csv(rec_path);
      for (auto& r : rs) {
        r.model_id = run.name;
        records.push_back(r);
      }
      continue;
    }
    eval::ModelRecord r;
    r.model_id = run.name;
    r.val_loss = NAN;
    r.auc = NAN;
    r.method = method_label(run.config);
    r.arch = arch_label(run.config.model.encoder);
    r.subset = fmt_g(run.config.dataset.subset_fraction);
    r.seed = std::to_string(run.config.seed);
    r.status = "failed";
    records.push_back(r);
    std::string why = "exit code " + std::to_string(exit_codes[i]);
    const auto err = fs::path(run.config.output_dir) / "error.txt";
    if (fs::exists(err)) why = read_text(err);
    while (!why.empty() && why.back() == '\n') why.pop_back();
    failed.push_back({{"name", run.name}, {"error", why}});
  }
  const auto out = plan.output_dir / "records.csv";
  eval::write_records_csv(out, records);
  return {{"runs", plan.runs.size()}, {"failed", failed}, {"records", out.string()}};
}

std::string report_markdown(const std::vector<eval::ModelRecord>& records) {
  std::set<std::string> subsets;
  for (const auto& r : records)
    if (r.status == "ok") subsets.insert(r.subset);
  const bool by_subset = subsets.size() > 1;
  auto row_key = [&](const eval::ModelRecord& r) {
    return by_subset ? r.method + " @ " + r.subset : r.method;
  };

  std::vector<std::string> rows, cols;
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    if (std::find(rows.begin(), rows.end(), row_key(r)) == rows.end()) rows.push_back(row_key(r));
    if (std::find(cols.begin(), cols.end(), r.arch) == cols.end()) cols.push_back(r.arch);
  }

  using Getter = std::optional<double> (*)(const eval::ModelRecord&);
  const std::vector<std::pair<std::string, Getter>> metrics = {
      {"knn_acc", [](const eval::ModelRecord& r) { return r.knn_acc; }},
      {"probe_acc", [](const eval::ModelRecord& r) { return r.probe_acc; }},
      {"auc", [](const eval::ModelRecord& r) { return std::optional<double>(r.auc); }},
      {"val_loss", [](const eval::ModelRecord& r) { return std::optional<double>(r.val_loss); }},
      {"train_loss", [](const eval::ModelRecord& r) { return r.train_loss; }},
  };
  std::ostringstream md;
  md << std::fixed;
  for (const auto& [name, get] : metrics) {
    bool any = false;
    for (const auto& r : records)
      if (r.status == "ok" && get(r)) any = true;
    if (!any) continue;
    md << "## " << name << "\n\n| method |";
    for (const auto& c : cols) md << " " << c << " |";
    md << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& row : rows) {
      md << "| " << row << " |";
      for (const auto& c : cols) {
        std::vector<double> v;
        for (const auto& r : records)
          if (r.status == "ok" && row_key(r) == row && r.arch == c && get(r)) v.push_back(*get(r));
        if (v.empty()) {
          md << " - |";
          continue;
        }
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
        md << " " << std::setprecision(4) << mean << " ± " << sd << " (n=" << v.size() << ") |";
      }
      md << "\n";
    }
    md << "\n";
  }
  std::vector<std::string> failed;
  for (const auto& r : records)
    if (r.status != "ok") failed.push_back(r.model_id);
  if (!failed.empty()) {
    md << "Failed runs:";
    for (const auto& f : failed) md << " " << f;
    md << "\n";
  }
  return md.str();
}

json cmd_report(const fs::path& records_path, const std::optional<fs::path>& out_prefix) {
  const auto records = eval::read_records_csv(records_path);
  const fs::path prefix = out_prefix ? *out_prefix : fs::path(fs::path(records_path).replace_extension().string() + "_report");
  const fs::path md_path = prefix.string() + ".md";
  const fs::path csv_path = prefix.string() + ".csv";
  const auto md = report_markdown(records);
  write_text_atomic(md_path, md);

  std::ostringstream csv;
  csv << "method,arch,subset,metric,mean,std,n\n" << std::setprecision(17);
  std::map<std::tuple<std::string, std::string, std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : records) {
    if (r.status != "ok") continue;
    auto add = [&](const char* m, std::optional<double> v) {
      if (v) groups[{r.method, r.arch, r.subset, m}].push_back(*v);
    };
    add("knn_acc", r.knn_acc);
    add("probe_acc", r.probe_acc);
    add("auc", r.auc);
    add("val_loss", r.val_loss);
    add("train_loss", r.train_loss);
  }
  for (const auto& [key, v] : groups) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
    csv << std::get<0>(key) << "," << std::get<1>(key) << "," << std::get<2>(key) << "," << std::get<3>(key) << ","
        << mean << "," << sd << "," << v.size() << "\n";
  }
  write_text_atomic(csv_path, csv.str());
  return {{"markdown", md_path.string()}, {"csv", csv_path.string()}, {"table", md}};
}

}  // namespace ncsl::app
