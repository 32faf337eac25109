// Copyright 2026 The HClip Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end. Subcommands: run, sweep, calibrate, verify-lemma,
// regimes, stepsize. Exit status 0 on success, 1 on invalid input, 2 when an
// experiment fails (too many diverged trials, failed lemma rows).
#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hclip/config.hpp"
#include "hclip/error.hpp"
#include "hclip/harness.hpp"
#include "hclip/privacy.hpp"
#include "hclip/schedule.hpp"
#include "hclip/verifier.hpp"

namespace hclip {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitFailed = 2;

namespace cli_detail {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

struct Context {
  Settings settings;
  bool json = false;
  std::ostream& out;
  std::ostream& err;
};

inline void print_kv(std::ostream& out, const std::string& k, const std::string& v) {
  out << k << " = " << v << "\n";
}

inline Json summary_block(const QuantileSummary& s) { return summary_to_json(s); }

inline void print_summary(std::ostream& out, const QuantileSummary& s) {
  print_kv(out, "statistic", s.statistic_name);
  print_kv(out, "K", std::to_string(s.K));
  print_kv(out, "lambda", num(s.lambda));
  print_kv(out, "gamma", num(s.gamma));
  print_kv(out, "trials", std::to_string(s.values.size()));
  print_kv(out, "diverged", std::to_string(s.diverged));
  print_kv(out, "level", num(s.level));
  print_kv(out, "quantile", num(s.quantile_value));
  print_kv(out, "bound", num(s.bound));
  print_kv(out, "pass", s.pass ? "true" : "false");
  if (s.containment) print_kv(out, "containment", num(*s.containment));
}

inline PersistOptions persist_options(const Settings& s) {
  PersistOptions opt;
  opt.timestamp = s.boolean("experiment.timestamp");
  opt.config_echo = s.to_json();
  return opt;
}

inline int cmd_run(Context& c) {
  const ExperimentConfig cfg = build_experiment(c.settings);
  const auto records = run_trials(cfg);
  const ResolvedPoint p = resolve_point(cfg, cfg.theory.K, cfg.theory.lambda);
  const QuantileSummary s = check_bound(records, p.theory, p.gamma);
  if (c.settings.has("experiment.output")) {
    persist(records, c.settings.text("experiment.output"), c.settings.text("experiment.format"),
            persist_options(c.settings));
  }
  if (c.json) {
    Json j = summary_block(s);
    j["seed"] = cfg.seed;
    j["sigma_omega"] = p.sigma_omega;
    c.out << j.dump(2) << "\n";
  } else {
    print_kv(c.out, "seed", std::to_string(cfg.seed));
    print_kv(c.out, "sigma_omega", num(p.sigma_omega));
    print_summary(c.out, s);
  }
  return kExitOk;
}

inline int cmd_sweep(Context& c) {
  const ExperimentConfig cfg = build_experiment(c.settings);
  const auto cells = sweep(cfg);
  std::vector<RunRecord> all;
  Json jcells = Json::array();
  for (const auto& cell : cells) {
    all.insert(all.end(), cell.records.begin(), cell.records.end());
    jcells.push_back(summary_block(cell.summary));
  }
  if (c.settings.has("experiment.output")) {
    persist(all, c.settings.text("experiment.output"), c.settings.text("experiment.format"),
            persist_options(c.settings));
  }
  std::optional<RateFit> fit;
  if (cfg.K_grid.size() >= 4 && cfg.lambda_grid.size() <= 1) {
    std::vector<double> q;
    for (const auto& cell : cells) q.push_back(cell.summary.quantile_value);
    try {
      fit = fit_rate(cfg.K_grid, q);
    } catch (const Error& e) {
      c.err << "rate fit skipped: " << e.what() << "\n";
    }
  }
  if (c.json) {
    Json j = {{"seed", cfg.seed}, {"cells", jcells}};
    if (fit) {
      j["rate_fit"] = {{"floor", detail::json_double(fit->floor)},
                       {"slope", detail::json_double(fit->floored.slope)},
                       {"r2", detail::json_double(fit->floored.r2)},
                       {"raw_slope", detail::json_double(fit->raw.slope)},
                       {"diagnostic", fit->diagnostic}};
    }
    c.out << j.dump(2) << "\n";
  } else {
    print_kv(c.out, "seed", std::to_string(cfg.seed));
    c.out << "K,lambda,gamma,quantile,bound,pass\n";
    for (const auto& cell : cells) {
      c.out << cell.K << ',' << num(cell.lambda) << ',' << num(cell.summary.gamma) << ','
            << num(cell.summary.quantile_value) << ',' << num(cell.summary.bound) << ','
            << (cell.summary.pass ? 1 : 0) << "\n";
    }
    if (fit) {
      print_kv(c.out, "floor", num(fit->floor));
      print_kv(c.out, "slope", num(fit->floored.slope));
      print_kv(c.out, "raw_slope", num(fit->raw.slope));
      if (!fit->diagnostic.empty()) print_kv(c.out, "diagnostic", fit->diagnostic);
    }
  }
  return kExitOk;
}

inline int cmd_calibrate(Context& c) {
  const Settings& s = c.settings;
  const auto target = build_privacy(s, s.uint("K"));
  if (!target) throw detail::field_error("epsilon", "required by calibrate");
  const double lambda = s.real("lambda");
  const double sigma_omega = calibrate_sigma_omega(*target, ClipLevel(lambda));
  if (c.json) {
    Json j = {{"seed", s.uint("seed")}, {"sigma_omega", sigma_omega}, {"warnings", target->warnings()}};
    c.out << j.dump(2) << "\n";
  } else {
    print_kv(c.out, "seed", std::to_string(s.uint("seed")));
    print_kv(c.out, "sigma_omega", num(sigma_omega));
    for (const auto& w : target->warnings()) c.out << "warning: " << w << "\n";
  }
  return kExitOk;
}

inline int cmd_verify_lemma(Context& c) {
  const auto rows = sweep_lemma(lemma_grid(build_lemma_spec(c.settings)), c.settings.uint("workers"));
  const auto failed = std::count_if(rows.begin(), rows.end(), [](const LemmaRow& r) { return !r.pass; });
  const bool to_file = c.settings.has("lemma.output");
  if (to_file) {
    const std::string path = c.settings.text("lemma.output");
    std::ofstream f(path);
    if (!f) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
    write_lemma_csv(rows, f);
    if (!f) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
  }
  if (c.json) {
    Json j = {{"seed", c.settings.uint("seed")}, {"rows", rows.size()}, {"failed", failed}};
    c.out << j.dump(2) << "\n";
  } else if (to_file) {
    print_kv(c.out, "seed", std::to_string(c.settings.uint("seed")));
    print_kv(c.out, "rows", std::to_string(rows.size()));
    print_kv(c.out, "failed", std::to_string(failed));
  } else {
    // CSV owns stdout; the summary goes to stderr.
    write_lemma_csv(rows, c.out);
    c.err << "seed = " << c.settings.uint("seed") << "\nrows = " << rows.size()
          << "\nfailed = " << failed << "\n";
  }
  return failed == 0 ? kExitOk : kExitFailed;
}

inline int cmd_regimes(Context& c) {
  const TheoryParams t = build_theory(c.settings);
  const RegimeReport r = classify_regime(t);
  std::optional<std::pair<double, double>> dp;
  if (auto target = build_privacy(c.settings, t.K)) {
    dp = {optimal_lambda_dp(t, *target, LambdaBranch::kLarge),
          optimal_lambda_dp(t, *target, LambdaBranch::kSmall)};
  }
  const std::uint64_t seed = c.settings.uint("seed");
  if (c.json) {
    Json j = {{"seed", seed},
              {"regime", r.regime_id},
              {"sub_row", r.sub_row},
              {"zeta", r.zeta},
              {"neighborhood", r.neighborhood},
              {"rate", r.rate_label},
              {"optimal_lambda", r.optimal_lambda ? Json(*r.optimal_lambda) : Json(nullptr)},
              {"notes", r.notes}};
    if (dp) j["dp_optimal_lambda"] = {{"large", dp->first}, {"small", dp->second}};
    c.out << j.dump(2) << "\n";
  } else {
    print_kv(c.out, "seed", std::to_string(seed));
    print_kv(c.out, "regime", std::to_string(r.regime_id));
    if (r.regime_id == 3) print_kv(c.out, "sub_row", std::to_string(r.sub_row));
    print_kv(c.out, "zeta", num(r.zeta));
    print_kv(c.out, "neighborhood", num(r.neighborhood));
    print_kv(c.out, "rate", r.rate_label);
    print_kv(c.out, "optimal_lambda", r.optimal_lambda ? num(*r.optimal_lambda) : "none");
    if (!r.notes.empty()) print_kv(c.out, "notes", r.notes);
    if (dp) {
      print_kv(c.out, "dp_optimal_lambda_large", num(dp->first));
      print_kv(c.out, "dp_optimal_lambda_small", num(dp->second));
    }
  }
  return kExitOk;
}

inline int cmd_stepsize(Context& c) {
  TheoryParams t = build_theory(c.settings);
  if (auto target = build_privacy(c.settings, t.K)) {
    t.sigma_omega = calibrate_sigma_omega(*target, ClipLevel(t.lambda));
  }
  const StepSize full = stepsize_full(t);
  const StepSize red = stepsize_reduced(t);
  const std::uint64_t seed = c.settings.uint("seed");
  if (c.json) {
    Json parts = Json::array();
    for (double g : full.parts) parts.push_back(detail::json_double(g));
    Json j = {{"seed", seed},
              {"sigma_omega", t.sigma_omega},
              {"ceiling", full.ceiling},
              {"parts", parts},
              {"gamma_full", full.gamma},
              {"binding_full", full.binding},
              {"gamma_reduced", red.gamma},
              {"binding_reduced", red.binding},
              {"warnings", red.warnings},
              {"bound", theory_bound(t, full.gamma)}};
    c.out << j.dump(2) << "\n";
  } else {
    print_kv(c.out, "seed", std::to_string(seed));
    print_kv(c.out, "sigma_omega", num(t.sigma_omega));
    print_kv(c.out, "ceiling", num(full.ceiling));
    for (int i = 0; i < 6; ++i) print_kv(c.out, "gamma_" + std::to_string(i + 1), num(full.parts[i]));
    print_kv(c.out, "gamma_full", num(full.gamma));
    print_kv(c.out, "binding_full", full.binding == 0 ? "ceiling" : "gamma_" + std::to_string(full.binding));
    print_kv(c.out, "gamma_reduced", num(red.gamma));
    print_kv(c.out, "bound", num(theory_bound(t, full.gamma)));
    for (const auto& w : red.warnings) c.out << "warning: " << w << "\n";
  }
  return kExitOk;
}

}  // namespace cli_detail

// args excludes the program name.
inline int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out,
                              std::ostream& err) {
  CLI::App app{"Clipped SGD with differential privacy under heavy-tailed noise", "hclip"};
  app.require_subcommand(1);

  struct Options {
    std::map<std::string, std::string> fields;
    std::string config;
    std::vector<std::string> sets;
    bool json = false;
    bool dry_run = false;
    bool no_timestamp = false;
  };
  Options opt;
  const std::vector<std::pair<const char*, const char*>> commands = {
      {"run", "run T trials and compare the quantile with the bound"},
      {"sweep", "run T trials over K_grid x lambda_grid, with a rate fit"},
      {"calibrate", "privacy noise for a clipping level"},
      {"verify-lemma", "Monte Carlo check of the clipped bias / variance bounds"},
      {"regimes", "regime, neighbourhood and optimal lambda"},
      {"stepsize", "step-size components and the resulting bound"},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    for (const auto& f : config_schema()) {
      sub->add_option(std::string("--") + f.path, opt.fields[f.path], f.help);
    }
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--set", opt.sets, "override path=value (repeatable)");
    sub->add_flag("--json", opt.json, "machine-readable output");
    sub->add_flag("--dry-run", opt.dry_run, "print the resolved config and exit");
    sub->add_flag("--no-timestamp", opt.no_timestamp, "omit timestamps for byte-stable output");
    subs[name] = sub;
  }

  if (args.empty()) {
    err << app.help();
    return kExitInvalid;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInvalid;
  }

  try {
    cli_detail::Context ctx{Settings{}, opt.json, out, err};
    if (!opt.config.empty()) ctx.settings.merge_file(opt.config);
    for (const auto& s : opt.sets) ctx.settings.set_assignment(s);
    for (const auto& f : config_schema()) {
      const auto* o = app.get_subcommands().front()->get_option(std::string("--") + f.path);
      if (o->count() > 0) ctx.settings.set_text(f.path, opt.fields[f.path]);
    }
    if (opt.no_timestamp) ctx.settings.set("experiment.timestamp", false);

    if (opt.dry_run) {
      out << ctx.settings.to_json().dump(2) << "\n";
      return kExitOk;
    }
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "run") return cli_detail::cmd_run(ctx);
    if (name == "sweep") return cli_detail::cmd_sweep(ctx);
    if (name == "calibrate") return cli_detail::cmd_calibrate(ctx);
    if (name == "verify-lemma") return cli_detail::cmd_verify_lemma(ctx);
    if (name == "regimes") return cli_detail::cmd_regimes(ctx);
    if (name == "stepsize") return cli_detail::cmd_stepsize(ctx);
    err << "unknown subcommand " << name << "\n";
    return kExitInvalid;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::kExperimentFailed ? kExitFailed : kExitInvalid;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
}

}  // namespace hclip
