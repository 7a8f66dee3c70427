/*
 * Copyright 2026 The redist Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*!@file
 * The redist command line: audit, unlearn, geometry, sweep and synth.
 *
 * Options may also come from a JSON config file (--config); keys are option
 * names without the leading dashes and flags on the command line win.
 * REDIST_OUT_DIR sets the default output directory.
 *
 * Exit codes: 0 success, 2 validation error, 3 data/format error,
 * 4 numeric degeneracy. Errors are reported as one JSON object on stderr.
 */

#pragma once

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "redist/redist.hpp"

namespace redist::cli {

namespace fs = std::filesystem;

struct InputOptions {
  std::string embeddings;
  std::string labels;
  std::string groups;
  std::string head;
  std::string synth_spec;
  std::string forget;
};

struct RunConfig {
  std::string command;
  InputOptions input;
  std::string out_dir;
  std::string model = "unknown";
  std::string method = "pe";
  double alpha = 1.0;
  double tau = 0.07;
  double lambda = 1.0;
  bool project_head = true;
  bool balanced_retain_mean = false;
  bool renormalize_means = false;
  double epsilon = kDefaultEpsilon;
  std::string lambdas;
  std::size_t per_group_cap = 0;
  std::optional<std::uint64_t> seed;
  std::optional<double> head_perturb;
  std::string spec;
};

namespace detail {

inline std::string default_out_dir() {
  if (const char* env = std::getenv("REDIST_OUT_DIR"); env != nullptr && *env != '\0') return env;
  return ".";
}

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " is required");
  if (!fs::is_regular_file(path)) throw ValidationError(what + " '" + path + "' does not exist");
}

inline fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ValidationError("output directory '" + dir + "' is not writable");
  }
  return fs::path(dir);
}

inline std::vector<double> parse_lambda_list(const std::string& text) {
  if (text.empty()) return default_lambda_grid();
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string_view field = redist::detail::trim(item);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
      throw ValidationError("cannot parse lambda '" + std::string(field) + "'");
    }
    out.push_back(value);
  }
  validate_lambdas(out);
  return out;
}

struct LoadedInputs {
  EmbeddingDataset dataset;
  PromptHead head;
};

inline LoadedInputs load_inputs(const RunConfig& cfg, bool need_head = true) {
  LoadedInputs in;
  if (!cfg.input.synth_spec.empty()) {
    require_file(cfg.input.synth_spec, "--synth-spec");
    auto data = generate(load_spec(cfg.input.synth_spec));
    in.dataset = std::move(data.dataset);
    in.head = std::move(data.head);
  } else {
    require_file(cfg.input.embeddings, "--embeddings");
    require_file(cfg.input.labels, "--labels");
    if (need_head) require_file(cfg.input.head, "--head");
    GroupTable groups = standard_group_table();
    if (!cfg.input.groups.empty()) {
      require_file(cfg.input.groups, "--groups");
      groups = load_group_table(cfg.input.groups);
    }
    in.dataset = assemble_dataset(load_embeddings(cfg.input.embeddings),
                                  fs::path(cfg.input.labels), groups);
    if (need_head) {
      in.head = load_head(cfg.input.head, groups);
    } else {
      in.head.weights = Matrix::Zero(0, in.dataset.dim());
      in.head.groups = groups;
    }
  }
  if (!cfg.input.forget.empty()) {
    const auto index = in.dataset.groups.index_of(cfg.input.forget);
    if (!index) throw ValidationError("unknown forget group '" + cfg.input.forget + "'");
    in.dataset.groups = in.dataset.groups.with_forget(*index);
    in.head.groups = in.dataset.groups;
  }
  if (need_head && in.dataset.dim() != in.head.dim()) {
    throw DimensionError("embedding dimension " + std::to_string(in.dataset.dim()) +
                         " does not match head dimension " + std::to_string(in.head.dim()));
  }
  return in;
}

inline void validate_method_params(const RunConfig& cfg) {
  parse_method(cfg.method);
  if (!std::isfinite(cfg.alpha)) throw ValidationError("--alpha must be finite");
  if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) throw ValidationError("--tau must be positive");
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw ValidationError("--lambda must be finite and non-negative");
  }
  if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon)) {
    throw ValidationError("--epsilon must be finite and non-negative");
  }
}

inline MethodConfig method_config(const RunConfig& cfg) {
  MethodConfig m;
  m.method = parse_method(cfg.method);
  m.reweight = {cfg.alpha, cfg.tau};
  m.lambda = cfg.lambda;
  m.refusal.project_head = cfg.project_head;
  m.refusal.means = {cfg.balanced_retain_mean, cfg.renormalize_means};
  return m;
}

inline void log_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << "\n";
}

}  // namespace detail

inline int cmd_audit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::validate_method_params(cfg);
  const auto in = detail::load_inputs(cfg);
  const fs::path dir = detail::prepare_out_dir(cfg.out_dir);
  const int t = in.dataset.groups.forget_index();
  const UnlearnResult result = apply_method(in.dataset, in.head, t, detail::method_config(cfg));
  AuditReport report = run_audit(in.dataset, in.head, result, cfg.epsilon);
  report.model = cfg.model;
  report.method = cfg.method;
  detail::log_warnings(report.warnings, err);
  write_text(dir / "audit.json", dump(audit_to_json(report)));
  write_text(dir / "audit.csv", audit_to_csv(report));
  out << audit_csv_row(report) << "\n";
  return 0;
}

inline int cmd_unlearn(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  detail::validate_method_params(cfg);
  const auto in = detail::load_inputs(cfg);
  const fs::path dir = detail::prepare_out_dir(cfg.out_dir);
  const int t = in.dataset.groups.forget_index();
  const MethodConfig mc = detail::method_config(cfg);
  const UnlearnResult result = apply_method(in.dataset, in.head, t, mc);
  detail::log_warnings(in.dataset.warnings, err);

  write_embeddings(dir / "head.emb1", result.head.weights);
  std::vector<bool> active = result.mask.bits();
  nlohmann::json summary = {{"schema_version", kSchemaVersion},
                            {"method", cfg.method},
                            {"forget", in.dataset.groups.name(t)},
                            {"groups", in.dataset.groups.names()},
                            {"active", active}};
  if (mc.method == Method::kPromptReweighting) {
    summary["alpha"] = cfg.alpha;
    summary["tau"] = cfg.tau;
    summary["masses"] = reweight_masses(in.head, t, cfg.tau);
  }
  if (result.image_projector) {
    write_text(dir / "projector.json",
               dump(projector_to_json(*result.image_projector, cfg.project_head)));
    summary["lambda"] = cfg.lambda;
    summary["project_head"] = cfg.project_head;
  }
  write_text(dir / "unlearn.json", dump(summary));
  out << "wrote " << (dir / "head.emb1").string() << "\n";
  return 0;
}

inline int cmd_geometry(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto in = detail::load_inputs(cfg, /*need_head=*/false);
  const fs::path dir = detail::prepare_out_dir(cfg.out_dir);
  GeometryOptions options;
  options.means = {cfg.balanced_retain_mean, cfg.renormalize_means};
  options.per_group_cap = cfg.per_group_cap;
  const GeometryReport report = geometry_report(in.dataset, options);
  detail::log_warnings(in.dataset.warnings, err);
  write_text(dir / "geometry.json", dump(geometry_to_json(report)));
  write_text(dir / "cosines.csv", cosine_matrix_csv(report.cosine_matrix, report.groups));
  out << "collinearity " << format_double(report.collinearity) << ", predicted target "
      << report.groups.name(report.predicted_target) << "\n";
  return 0;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const std::vector<double> lambdas = detail::parse_lambda_list(cfg.lambdas);
  if (!(cfg.epsilon >= 0.0)) throw ValidationError("--epsilon must be non-negative");
  const auto in = detail::load_inputs(cfg);
  const fs::path dir = detail::prepare_out_dir(cfg.out_dir);
  SweepOptions options;
  options.refusal.project_head = cfg.project_head;
  options.refusal.means = {cfg.balanced_retain_mean, cfg.renormalize_means};
  options.epsilon = cfg.epsilon;
  const SweepResult result = run_lambda_sweep(in.dataset, in.head, lambdas, options);
  detail::log_warnings(in.dataset.warnings, err);
  write_text(dir / "sweep.csv", sweep_to_csv(result));
  write_text(dir / "sweep.json", dump(sweep_to_json(result)));
  out << result.points.size() << " sweep points, " << result.pareto.size() << " on the front\n";
  return 0;
}

inline int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  GeometrySpec spec = reference_spec();
  if (!cfg.spec.empty()) {
    detail::require_file(cfg.spec, "--spec");
    spec = load_spec(cfg.spec);
  }
  if (cfg.seed) spec.seed = *cfg.seed;
  if (cfg.head_perturb) spec.head_perturb_sigma = *cfg.head_perturb;
  validate_spec(spec);
  const fs::path dir = detail::prepare_out_dir(cfg.out_dir);
  const SyntheticData data = generate(spec);
  write_embeddings(dir / "embeddings.emb1", data.dataset.embeddings);
  write_labels(dir / "labels.csv", data.dataset.labels, data.dataset.groups);
  write_embeddings(dir / "head.emb1", data.head.weights);
  write_embeddings(dir / "means.emb1", data.means);
  write_text(dir / "groups.json", dump(group_table_to_json(data.dataset.groups)));
  write_text(dir / "spec.json", dump(spec_to_json(spec)));
  out << "wrote " << data.dataset.size() << " samples to " << dir.string() << "\n";
  return 0;
}

namespace detail {

inline std::string config_value(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_array()) {
    std::string s;
    for (const auto& x : v) {
      if (!s.empty()) s += ",";
      s += config_value(x);
    }
    return s;
  }
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return format_double(v.get<double>());
  throw ValidationError("unsupported config value " + v.dump());
}

inline bool has_flag(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

/// Appends "--key=value" for every config entry not given explicitly.
inline std::vector<std::string> merge_config(std::vector<std::string> args) {
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
  }
  if (config_path.empty()) return args;
  require_file(config_path, "--config");
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(redist::detail::read_text(config_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("config '" + config_path + "': " + e.what());
  }
  if (!cfg.is_object()) throw FormatError("config must be a JSON object");
  for (const auto& [key, value] : cfg.items()) {
    const std::string flag = "--" + key;
    if (key == "config" || has_flag(args, flag)) continue;
    if (key == "project-head" && has_flag(args, "--no-project-head")) continue;
    args.push_back(flag + "=" + config_value(value));
  }
  return args;
}

inline void add_input_options(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--embeddings", cfg.input.embeddings, "Image embeddings (EMB1 or CSV)");
  sub.add_option("--labels", cfg.input.labels, "Labels CSV with header index,group");
  sub.add_option("--groups", cfg.input.groups, "Group manifest JSON");
  sub.add_option("--head", cfg.input.head, "Prompt head (EMB1 or CSV)");
  sub.add_option("--synth-spec", cfg.input.synth_spec,
                 "Generate inputs from a geometry spec instead of files");
  sub.add_option("--forget", cfg.input.forget, "Override the forget group by name");
}

inline void add_mean_options(CLI::App& sub, RunConfig& cfg) {
  sub.add_flag("--balanced-retain-mean", cfg.balanced_retain_mean,
               "Average retained group means instead of pooling samples");
  sub.add_flag("--renormalize-means", cfg.renormalize_means,
               "Normalize forget/retain means before differencing");
}

inline void add_common(CLI::App& sub, RunConfig& cfg) {
  sub.add_option("--out", cfg.out_dir, "Output directory");
  sub.add_option("--config", "JSON config mirroring these options");
}

}  // namespace detail

inline int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  const auto report_error = [&err](std::string_view kind, const std::string& message, int code) {
    nlohmann::json j = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
    err << j.dump() << "\n";
    return code;
  };

  RunConfig cfg;
  cfg.out_dir = detail::default_out_dir();
  CLI::App app{"Zero-shot unlearning and bias redistribution audit", "redist"};
  app.require_subcommand(1);

  auto* audit = app.add_subcommand("audit", "Apply a method and audit per-group accuracy");
  auto* unlearn = app.add_subcommand("unlearn", "Apply a method and save the modified head");
  auto* geometry = app.add_subcommand("geometry", "Group-mean cosine geometry");
  auto* sweep = app.add_subcommand("sweep", "Refusal-vector strength sweep");
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");

  for (auto* sub : {audit, unlearn}) {
    detail::add_common(*sub, cfg);
    detail::add_input_options(*sub, cfg);
    detail::add_mean_options(*sub, cfg);
    sub->add_option("--method", cfg.method, "none, pe, pr or rv");
    sub->add_option("--alpha", cfg.alpha, "Reweighting scale");
    sub->add_option("--tau", cfg.tau, "Reweighting temperature");
    sub->add_option("--lambda", cfg.lambda, "Refusal projection strength");
    sub->add_flag("--project-head,!--no-project-head", cfg.project_head,
                  "Apply the refusal projection to the head as well");
    sub->add_option("--model", cfg.model, "Model name recorded in reports");
    sub->add_option("--epsilon", cfg.epsilon, "Redistribution threshold (pp)");
  }
  detail::add_common(*geometry, cfg);
  detail::add_input_options(*geometry, cfg);
  detail::add_mean_options(*geometry, cfg);
  geometry->add_option("--per-group-cap", cfg.per_group_cap, "Use at most N samples per group");

  detail::add_common(*sweep, cfg);
  detail::add_input_options(*sweep, cfg);
  detail::add_mean_options(*sweep, cfg);
  sweep->add_option("--lambdas", cfg.lambdas, "Comma-separated strengths (default grid)");
  sweep->add_flag("--project-head,!--no-project-head", cfg.project_head,
                  "Apply the refusal projection to the head as well");
  sweep->add_option("--epsilon", cfg.epsilon, "Redistribution threshold (pp)");

  detail::add_common(*synth, cfg);
  synth->add_option("--spec", cfg.spec, "Geometry spec JSON (default: reference fixture)");
  synth->add_option("--seed", cfg.seed, "Override the spec seed");
  synth->add_option("--head-perturb", cfg.head_perturb, "Override head perturbation sigma");

  try {
    std::vector<std::string> args = detail::merge_config(raw_args);
    std::vector<char*> argv;
    std::string prog = "redist";
    argv.push_back(prog.data());
    for (auto& a : args) argv.push_back(a.data());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return report_error("ValidationError", e.what(), 2);
  } catch (const Error& e) {
    return report_error(e.name(), e.what(), exit_code(e.kind()));
  }

  try {
    if (audit->parsed()) return cmd_audit(cfg, out, err);
    if (unlearn->parsed()) return cmd_unlearn(cfg, out, err);
    if (geometry->parsed()) return cmd_geometry(cfg, out, err);
    if (sweep->parsed()) return cmd_sweep(cfg, out, err);
    if (synth->parsed()) return cmd_synth(cfg, out, err);
  } catch (const Error& e) {
    return report_error(e.name(), e.what(), exit_code(e.kind()));
  } catch (const std::exception& e) {
    return report_error("InternalError", e.what(), 1);
  }
  return 2;
}

}  // namespace redist::cli
