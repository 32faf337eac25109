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

// Multi-trial experiments: T independent runs, empirical (1 - beta)-quantiles
// of the best-iterate statistics, comparison against the theoretical bound,
// empirical rate fits over a K grid, and CSV / JSON persistence.
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hclip/error.hpp"
#include "hclip/optimizer.hpp"
#include "hclip/parallel.hpp"

namespace hclip {

enum class StepRule { kFixed, kTheoryFull, kTheoryReduced };

inline std::string StepRuleName(StepRule r) {
  switch (r) {
    case StepRule::kFixed: return "fixed";
    case StepRule::kTheoryFull: return "theory-full";
    case StepRule::kTheoryReduced: return "theory-reduced";
  }
  return "?";
}

inline StepRule ParseStepRule(const std::string& s) {
  if (s == "fixed") return StepRule::kFixed;
  if (s == "theory-full") return StepRule::kTheoryFull;
  if (s == "theory-reduced") return StepRule::kTheoryReduced;
  throw Error(ErrorCode::kInvalidConfig, "step_rule: unknown value '" + s + "'");
}

struct ExperimentConfig {
  ProblemSpec problem;
  NoiseModel noise;
  Vector x0{0.0};
  TheoryParams theory;  // K and lambda here are the single-point defaults
  std::optional<PrivacyTarget> privacy;
  StepRule step_rule = StepRule::kTheoryFull;
  std::optional<double> gamma;  // required for StepRule::kFixed
  std::uint64_t trials = 200;
  std::vector<std::uint64_t> K_grid;
  std::vector<double> lambda_grid;
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  RecordLevel record = RecordLevel::kNone;

  void validate() const {
    if (trials == 0) throw Error(ErrorCode::kInvalidConfig, "trials must be >= 1");
    theory.validate();
    if (step_rule == StepRule::kFixed && !gamma) {
      throw Error(ErrorCode::kInvalidConfig, "gamma is required with step_rule fixed");
    }
    for (std::size_t i = 0; i < K_grid.size(); ++i) {
      if (K_grid[i] == 0 || (i > 0 && K_grid[i] <= K_grid[i - 1])) {
        throw Error(ErrorCode::kInvalidConfig, "K_grid must be positive and strictly increasing");
      }
    }
    for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
      if (!(lambda_grid[i] > 0.0) || (i > 0 && lambda_grid[i] <= lambda_grid[i - 1])) {
        throw Error(ErrorCode::kInvalidConfig,
                    "lambda_grid must be positive and strictly increasing");
      }
    }
    require_same_dim(x0.size(), problem.dim, "experiment x0");
    require_same_dim(noise.d, problem.dim, "experiment noise");
  }
};

// Everything a single (K, lambda) cell needs, resolved from the config.
struct ResolvedPoint {
  TheoryParams theory;
  double gamma = 0.0;
  double sigma_omega = 0.0;
  StepSize step;
};

inline ResolvedPoint resolve_point(const ExperimentConfig& c, std::uint64_t K, double lambda) {
  ResolvedPoint r;
  r.theory = c.theory;
  r.theory.K = K;
  r.theory.lambda = lambda;
  if (c.privacy) {
    PrivacyTarget t = *c.privacy;
    t.K = K;
    r.theory.sigma_omega = calibrate_sigma_omega(t, ClipLevel(lambda));
  }
  r.sigma_omega = r.theory.sigma_omega;
  r.theory.validate();
  switch (c.step_rule) {
    case StepRule::kFixed:
      r.gamma = *c.gamma;
      break;
    case StepRule::kTheoryFull:
      r.step = stepsize_full(r.theory);
      r.gamma = r.step.gamma;
      break;
    case StepRule::kTheoryReduced:
      r.step = stepsize_reduced(r.theory);
      r.gamma = r.step.gamma;
      break;
  }
  return r;
}

inline constexpr double kMaxDivergedFraction = 0.5;

// T trials at one (K, lambda); trial i uses stream id i. A diverged trial is
// kept as a record with +inf statistics.
inline std::vector<RunRecord> run_trials(const ExperimentConfig& c, std::uint64_t K, double lambda) {
  c.validate();
  const ResolvedPoint point = resolve_point(c, K, lambda);
  RunConfig base;
  base.problem = c.problem;
  base.noise = c.noise;
  base.lambda = ClipLevel(lambda);
  base.gamma = point.gamma;
  base.K = K;
  base.sigma_omega = point.sigma_omega;
  base.seed = c.seed;
  base.record = c.record;
  base.validate();

  std::vector<RunRecord> out(c.trials);
  parallel_for(c.trials, c.workers, [&](std::size_t i) {
    RunConfig rc = base;
    rc.stream_id = i;
    try {
      out[i] = run(rc, c.x0);
    } catch (const DivergedError& e) {
      RunRecord r;
      r.trial = i;
      r.K = K;
      r.lambda = lambda;
      r.gamma = point.gamma;
      r.sigma_omega = point.sigma_omega;
      r.best_suboptimality = std::numeric_limits<double>::infinity();
      r.best_grad_norm_sq = std::numeric_limits<double>::infinity();
      r.max_dist_to_opt = std::numeric_limits<double>::infinity();
      r.diverged = true;
      r.diverged_step = static_cast<std::int64_t>(e.step());
      out[i] = std::move(r);
    }
  });
  const auto failed = std::count_if(out.begin(), out.end(), [](const RunRecord& r) { return r.diverged; });
  if (static_cast<double>(failed) > kMaxDivergedFraction * static_cast<double>(c.trials)) {
    throw Error(ErrorCode::kExperimentFailed, std::to_string(failed) + " of " +
                                                  std::to_string(c.trials) + " trials diverged");
  }
  return out;
}

inline std::vector<RunRecord> run_trials(const ExperimentConfig& c) {
  return run_trials(c, c.theory.K, c.theory.lambda);
}

// ceil(level * n)-th smallest value, no interpolation.
inline double quantile(std::vector<double> values, double level) {
  if (values.empty()) throw Error(ErrorCode::kPrecondition, "quantile of an empty sample");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::kPrecondition, "quantile level must lie in (0, 1)");
  }
  const auto n = values.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(level * static_cast<double>(n)));
  k = std::clamp<std::size_t>(k, 1, n);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1), values.end());
  return values[k - 1];
}

struct QuantileSummary {
  std::string statistic_name;
  std::vector<double> values;  // sorted
  double level = 0.0;
  double quantile_value = 0.0;
  double bound = 0.0;
  bool pass = false;
  double gamma = 0.0;
  std::uint64_t K = 0;
  double lambda = 0.0;
  std::optional<double> containment;  // fraction of trials inside the sqrt(2) R ball
  std::uint64_t diverged = 0;
};

// Compares the (1 - beta)-quantile of best_suboptimality (convex) or
// best_grad_norm_sq (non-convex) with the theoretical bound at the same gamma.
inline QuantileSummary check_bound(const std::vector<RunRecord>& records, const TheoryParams& theory,
                                   double gamma) {
  if (records.empty()) throw Error(ErrorCode::kPrecondition, "check_bound: no records");
  const RunRecord& first = records.front();
  for (const RunRecord& r : records) {
    if (r.K != first.K || r.lambda != first.lambda || r.gamma != first.gamma ||
        r.sigma_omega != first.sigma_omega) {
      throw Error(ErrorCode::kPrecondition, "check_bound: records come from mixed configurations");
    }
  }
  if (first.gamma != gamma) {
    throw Error(ErrorCode::kPrecondition, "check_bound: gamma differs from the one used by the runs");
  }
  if (first.K != theory.K || first.lambda != theory.lambda) {
    throw Error(ErrorCode::kPrecondition, "check_bound: theory K / lambda differ from the runs");
  }
  QuantileSummary s;
  s.statistic_name = theory.convex ? "best_suboptimality" : "best_grad_norm_sq";
  s.level = 1.0 - theory.beta;
  s.gamma = gamma;
  s.K = first.K;
  s.lambda = first.lambda;
  std::size_t inside = 0;
  for (const RunRecord& r : records) {
    s.values.push_back(theory.convex ? r.best_suboptimality : r.best_grad_norm_sq);
    if (r.diverged) ++s.diverged;
    if (theory.convex && r.max_dist_to_opt <= std::sqrt(2.0) * theory.radius) ++inside;
  }
  std::sort(s.values.begin(), s.values.end());
  s.quantile_value = theory.beta >= 1.0 ? s.values.front() : quantile(s.values, s.level);
  s.bound = theory_bound(theory, gamma);
  s.pass = s.quantile_value <= s.bound;
  if (theory.convex) s.containment = static_cast<double>(inside) / static_cast<double>(records.size());
  return s;
}

struct LineFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  double r2 = std::numeric_limits<double>::quiet_NaN();
};

inline LineFit least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

struct RateFit {
  std::vector<std::uint64_t> K;
  std::vector<double> quantiles;
  double floor = 0.0;  // quantile at the largest K
  LineFit floored;     // log(q - floor) vs log K over all but the largest K
  LineFit raw;         // log q vs log K over all points
  std::string diagnostic;
};

// Pure part of the rate fit, exposed for testing.
inline RateFit fit_rate(const std::vector<std::uint64_t>& K, const std::vector<double>& q) {
  if (K.size() != q.size()) throw Error(ErrorCode::kPrecondition, "rate fit: size mismatch");
  if (K.size() < 4) throw Error(ErrorCode::kPrecondition, "rate fit needs at least 4 K values");
  for (std::size_t i = 1; i < K.size(); ++i) {
    if (K[i] <= K[i - 1]) throw Error(ErrorCode::kPrecondition, "rate fit: K grid must increase");
  }
  if (static_cast<double>(K.back()) < 100.0 * static_cast<double>(K.front())) {
    throw Error(ErrorCode::kPrecondition, "rate fit: K grid must span at least two decades");
  }
  RateFit f;
  f.K = K;
  f.quantiles = q;
  f.floor = q.back();
  std::vector<double> lx, ly;
  bool finite = true;
  for (std::size_t i = 0; i < K.size(); ++i) {
    finite = finite && std::isfinite(q[i]) && q[i] > 0.0;
    lx.push_back(std::log(static_cast<double>(K[i])));
    ly.push_back(std::log(q[i]));
  }
  if (finite) {
    f.raw = least_squares(lx, ly);
  } else {
    f.diagnostic = "non-finite or nonpositive quantile; ";
  }
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i + 1 < K.size(); ++i) {
    const double diff = q[i] - f.floor;
    if (!(diff > 0.0) || !std::isfinite(diff)) {
      std::ostringstream msg;
      msg << std::setprecision(6) << "quantile at K=" << K[i] << " (" << q[i]
          << ") is not above the floor " << f.floor;
      f.diagnostic += msg.str();
      return f;
    }
    fx.push_back(lx[i]);
    fy.push_back(std::log(diff));
  }
  f.floored = least_squares(fx, fy);
  return f;
}

// Runs T trials per K in the grid at the config's lambda and fits the rate.
inline RateFit rate_fit(const ExperimentConfig& c) {
  std::vector<double> q;
  // Check the grid before spending any compute.
  fit_rate(c.K_grid, std::vector<double>(c.K_grid.size(), 1.0));
  for (std::uint64_t K : c.K_grid) {
    const auto records = run_trials(c, K, c.theory.lambda);
    TheoryParams t = resolve_point(c, K, c.theory.lambda).theory;
    q.push_back(check_bound(records, t, records.front().gamma).quantile_value);
  }
  return fit_rate(c.K_grid, q);
}

struct SweepCell {
  std::uint64_t K = 0;
  double lambda = 0.0;
  QuantileSummary summary;
  std::vector<RunRecord> records;
};

// Cartesian sweep over K_grid x lambda_grid; empty grids fall back to the
// single value in theory.
inline std::vector<SweepCell> sweep(const ExperimentConfig& c) {
  const std::vector<std::uint64_t> Ks = c.K_grid.empty() ? std::vector<std::uint64_t>{c.theory.K} : c.K_grid;
  const std::vector<double> lams = c.lambda_grid.empty() ? std::vector<double>{c.theory.lambda} : c.lambda_grid;
  std::vector<SweepCell> cells;
  for (std::uint64_t K : Ks) {
    for (double lam : lams) {
      SweepCell cell;
      cell.K = K;
      cell.lambda = lam;
      cell.records = run_trials(c, K, lam);
      const ResolvedPoint p = resolve_point(c, K, lam);
      cell.summary = check_bound(cell.records, p.theory, p.gamma);
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

// -------------------------------------------------------------------------
// Persistence.

inline constexpr const char* kSchemaVersion = "hclip-v1";

enum class OutputFormat { kCsv, kJson };

inline OutputFormat ParseOutputFormat(const std::string& s) {
  if (s == "csv") return OutputFormat::kCsv;
  if (s == "json") return OutputFormat::kJson;
  throw Error(ErrorCode::kInvalidConfig, "format: unknown value '" + s + "' (csv or json)");
}

struct PersistOptions {
  // Off: no "# created" line and wall_time written as 0, so output is
  // byte-stable across identical invocations.
  bool timestamp = true;
  nlohmann::json config_echo;  // JSON only
};

namespace detail {

inline std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline nlohmann::json json_double(double v) {
  if (std::isfinite(v)) return v;
  return fmt_double(v);
}

inline double parse_double(const nlohmann::json& j) {
  if (j.is_string()) return std::strtod(j.get<std::string>().c_str(), nullptr);
  return j.get<double>();
}

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

inline constexpr const char* kRecordCsvHeader =
    "trial,K,lambda,gamma,sigma_omega,best_subopt,best_gradsq,max_dist,diverged,wall_time";

inline void write_records_csv(const std::vector<RunRecord>& records, std::ostream& out,
                              const PersistOptions& opt = {}) {
  using detail::fmt_double;
  if (opt.timestamp) out << "# created " << detail::utc_now() << "\n";
  out << kRecordCsvHeader << "\n";
  for (const RunRecord& r : records) {
    out << r.trial << ',' << r.K << ',' << fmt_double(r.lambda) << ',' << fmt_double(r.gamma) << ','
        << fmt_double(r.sigma_omega) << ',' << fmt_double(r.best_suboptimality) << ','
        << fmt_double(r.best_grad_norm_sq) << ',' << fmt_double(r.max_dist_to_opt) << ','
        << (r.diverged ? 1 : 0) << ',' << fmt_double(opt.timestamp ? r.wall_time : 0.0) << "\n";
  }
}

inline nlohmann::json records_to_json(const std::vector<RunRecord>& records,
                                      const PersistOptions& opt = {}) {
  using detail::json_double;
  nlohmann::json j;
  j["schema"] = kSchemaVersion;
  if (opt.timestamp) j["created"] = detail::utc_now();
  j["config"] = opt.config_echo;
  j["records"] = nlohmann::json::array();
  for (const RunRecord& r : records) {
    j["records"].push_back({{"trial", r.trial},
                            {"K", r.K},
                            {"lambda", json_double(r.lambda)},
                            {"gamma", json_double(r.gamma)},
                            {"sigma_omega", json_double(r.sigma_omega)},
                            {"best_subopt", json_double(r.best_suboptimality)},
                            {"best_gradsq", json_double(r.best_grad_norm_sq)},
                            {"max_dist", json_double(r.max_dist_to_opt)},
                            {"diverged", r.diverged},
                            {"wall_time", json_double(opt.timestamp ? r.wall_time : 0.0)}});
  }
  return j;
}

inline nlohmann::json summary_to_json(const QuantileSummary& s) {
  using detail::json_double;
  nlohmann::json j = {{"statistic", s.statistic_name},
                      {"K", s.K},
                      {"lambda", json_double(s.lambda)},
                      {"gamma", json_double(s.gamma)},
                      {"level", s.level},
                      {"trials", s.values.size()},
                      {"diverged", s.diverged},
                      {"quantile", json_double(s.quantile_value)},
                      {"bound", json_double(s.bound)},
                      {"pass", s.pass}};
  if (s.containment) j["containment"] = *s.containment;
  return j;
}

inline void persist(const std::vector<RunRecord>& records, const std::string& path,
                    const std::string& format, const PersistOptions& opt = {}) {
  const OutputFormat f = ParseOutputFormat(format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  if (f == OutputFormat::kCsv) {
    write_records_csv(records, out, opt);
  } else {
    out << records_to_json(records, opt).dump(2) << "\n";
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
}

namespace detail {

inline std::vector<RunRecord> parse_records_csv(std::istream& in, const std::string& path) {
  std::vector<RunRecord> out;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != kRecordCsvHeader) throw Error(ErrorCode::kIo, "'" + path + "': unexpected CSV header");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw Error(ErrorCode::kIo, "'" + path + "': malformed row '" + line + "'");
    auto num = [](const std::string& s) { return std::strtod(s.c_str(), nullptr); };
    RunRecord r;
    r.trial = std::stoull(f[0]);
    r.K = std::stoull(f[1]);
    r.lambda = num(f[2]);
    r.gamma = num(f[3]);
    r.sigma_omega = num(f[4]);
    r.best_suboptimality = num(f[5]);
    r.best_grad_norm_sq = num(f[6]);
    r.max_dist_to_opt = num(f[7]);
    r.diverged = f[8] == "1";
    r.wall_time = num(f[9]);
    out.push_back(std::move(r));
  }
  if (!header) throw Error(ErrorCode::kIo, "'" + path + "': missing CSV header");
  return out;
}

}  // namespace detail

inline std::vector<RunRecord> records_from_json(const nlohmann::json& j) {
  if (j.value("schema", "") != kSchemaVersion) {
    throw Error(ErrorCode::kIo, "unsupported schema (expected hclip-v1)");
  }
  std::vector<RunRecord> out;
  for (const auto& e : j.at("records")) {
    RunRecord r;
    r.trial = e.at("trial").get<std::uint64_t>();
    r.K = e.at("K").get<std::uint64_t>();
    r.lambda = detail::parse_double(e.at("lambda"));
    r.gamma = detail::parse_double(e.at("gamma"));
    r.sigma_omega = detail::parse_double(e.at("sigma_omega"));
    r.best_suboptimality = detail::parse_double(e.at("best_subopt"));
    r.best_grad_norm_sq = detail::parse_double(e.at("best_gradsq"));
    r.max_dist_to_opt = detail::parse_double(e.at("max_dist"));
    r.diverged = e.at("diverged").get<bool>();
    r.wall_time = detail::parse_double(e.at("wall_time"));
    out.push_back(std::move(r));
  }
  return out;
}

// Loads either format; JSON is recognised by a leading '{'.
inline std::vector<RunRecord> load_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
  in >> std::ws;
  if (in.peek() == '{') {
    try {
      return records_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kIo, "'" + path + "': " + e.what());
    }
  }
  return detail::parse_records_csv(in, path);
}

}  // namespace hclip
