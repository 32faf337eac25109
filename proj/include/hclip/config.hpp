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

// One flat, versioned JSON schema shared by config files and command-line
// flags. Every field has a dotted path ("problem.kind", "K", ...); values are
// resolved as defaults <- config file <- overrides, each step type-checked.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hclip/error.hpp"
#include "hclip/harness.hpp"
#include "hclip/oracles.hpp"
#include "hclip/privacy.hpp"
#include "hclip/schedule.hpp"
#include "hclip/verifier.hpp"

namespace hclip {

using Json = nlohmann::json;

enum class FieldKind { kUint, kReal, kBool, kString, kUintList, kRealList };

struct FieldSpec {
  const char* path;
  FieldKind kind;
  Json default_value;  // null = unset / derived
  const char* help;
};

inline const std::vector<FieldSpec>& config_schema() {
  using K = FieldKind;
  static const std::vector<FieldSpec> fields = {
      {"schema", K::kString, "hclip-v1", "schema version"},
      {"seed", K::kUint, 0, "top-level seed; every stream derives from it"},
      {"workers", K::kUint, 0, "worker threads (0: HCLIP_WORKERS or logical cores)"},
      {"L", K::kReal, nullptr, "smoothness constant (default: from the problem)"},
      {"R", K::kReal, nullptr, "radius bound, convex (default: |x0 - x*|)"},
      {"Delta", K::kReal, nullptr, "gap bound, non-convex (default: f(x0) - f*)"},
      {"sigma", K::kReal, nullptr, "noise moment sigma (default: from the noise model)"},
      {"alpha", K::kReal, 1.5, "moment order in (1, 2]"},
      {"K", K::kUint, 1000, "number of updates"},
      {"beta", K::kReal, 0.1, "failure probability"},
      {"lambda", K::kReal, nullptr, "clipping level"},
      {"sigma_omega", K::kReal, 0.0, "privacy noise std (overridden by epsilon)"},
      {"d", K::kUint, nullptr, "dimension (default: problem.d)"},
      {"convex", K::kBool, nullptr, "convex analysis (default: from problem.kind)"},
      {"eta", K::kReal, nullptr, "offset for the open table cells (default 1e-3 * scale)"},
      {"epsilon", K::kReal, nullptr, "privacy budget; unset disables privacy"},
      {"delta", K::kReal, 1e-5, "privacy delta"},
      {"dp_regime", K::kString, "expectation", "expectation or finite-sum"},
      {"q", K::kReal, 1.0, "sampling ratio for finite-sum"},
      {"c_dp", K::kReal, 1.0, "calibration constant"},
      {"gamma", K::kReal, nullptr, "step size for step_rule fixed"},
      {"step_rule", K::kString, "theory-full", "fixed, theory-full or theory-reduced"},
      {"problem.kind", K::kString, "quadratic", "quadratic, nonconvex or logistic"},
      {"problem.d", K::kUint, 10, "problem dimension"},
      {"problem.eig_min", K::kReal, 0.1, "quadratic: smallest eigenvalue"},
      {"problem.eig_max", K::kReal, 1.0, "quadratic: largest eigenvalue"},
      {"problem.scale", K::kReal, 1.0, "nonconvex: scale"},
      {"problem.n", K::kUint, 1000, "logistic: samples"},
      {"problem.reg", K::kReal, 0.01, "logistic: ridge"},
      {"problem.data_seed", K::kUint, 0, "logistic: data seed"},
      {"problem.x0_dist", K::kReal, 1.0, "convex: |x0 - x*| along the diagonal"},
      {"problem.x0_coord", K::kReal, 1.0, "nonconvex: every coordinate of x0"},
      {"noise.kind", K::kString, "pareto", "pareto, student-t, gaussian or none"},
      {"noise.tail_p", K::kReal, 2.5, "pareto: tail index (> alpha)"},
      {"noise.nu", K::kReal, 3.0, "student-t: degrees of freedom (> alpha)"},
      {"noise.scale", K::kReal, 1.0, "noise scale"},
      {"noise.sigma_alpha", K::kReal, nullptr, "rescale noise to this alpha-moment"},
      {"experiment.trials", K::kUint, 200, "independent trials T"},
      {"experiment.K_grid", K::kUintList, Json::array(), "K values for sweep"},
      {"experiment.lambda_grid", K::kRealList, Json::array(), "lambda values for sweep"},
      {"experiment.output", K::kString, nullptr, "records output path"},
      {"experiment.format", K::kString, "csv", "csv or json"},
      {"experiment.timestamp", K::kBool, true, "write a creation timestamp"},
      {"experiment.record", K::kString, "none", "none, scalars or full"},
      {"lemma.n_samples", K::kUint, 1000000, "draws per lemma row"},
      {"lemma.d", K::kUint, 4, "lemma dimension"},
      {"lemma.alphas", K::kRealList, Json::array({1.2, 1.5, 2.0}), "alpha values"},
      {"lemma.lambda_over_sigma", K::kRealList, Json::array({0.5, 1.0, 2.0, 4.0, 8.0}), "lambda / sigma"},
      {"lemma.x_over_lambda", K::kRealList, Json::array({0.0, 0.25, 0.5, 1.0, 4.0}), "|x| / lambda"},
      {"lemma.tail_gap", K::kReal, 0.5, "pareto tail index minus alpha"},
      {"lemma.output", K::kString, nullptr, "CSV output path (default: stdout)"},
  };
  return fields;
}

inline const FieldSpec* find_field(const std::string& path) {
  for (const auto& f : config_schema()) {
    if (path == f.path) return &f;
  }
  return nullptr;
}

namespace detail {

inline Error field_error(const std::string& path, const std::string& msg) {
  return Error(ErrorCode::kInvalidConfig, path + ": " + msg);
}

// Checks a JSON value against the field kind, normalising where lossless.
inline Json check_value(const FieldSpec& f, const Json& v) {
  const std::string path = f.path;
  if (v.is_null()) return v;
  switch (f.kind) {
    case FieldKind::kUint:
      if (v.is_number_unsigned()) return v;
      if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
      if (v.is_number_float()) {
        const double d = v.get<double>();
        if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
      }
      throw field_error(path, "expected a nonnegative integer");
    case FieldKind::kReal:
      if (v.is_number()) return v.get<double>();
      throw field_error(path, "expected a number");
    case FieldKind::kBool:
      if (v.is_boolean()) return v;
      throw field_error(path, "expected true or false");
    case FieldKind::kString:
      if (v.is_string()) return v;
      throw field_error(path, "expected a string");
    case FieldKind::kUintList:
    case FieldKind::kRealList: {
      if (!v.is_array()) throw field_error(path, "expected a list");
      Json out = Json::array();
      FieldSpec elem{f.path, f.kind == FieldKind::kUintList ? FieldKind::kUint : FieldKind::kReal,
                     nullptr, ""};
      for (const auto& e : v) {
        if (e.is_null()) throw field_error(path, "list entries must not be null");
        out.push_back(check_value(elem, e));
      }
      return out;
    }
  }
  return v;
}

inline void flatten(const Json& j, const std::string& prefix, Json& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object()) {
      flatten(*it, key, out);
    } else {
      out[key] = *it;
    }
  }
}

inline Json parse_scalar_text(const FieldSpec& f, const std::string& text) {
  const std::string path = f.path;
  auto as_number = [&](const std::string& s) -> Json {
    try {
      std::size_t pos = 0;
      const double d = std::stod(s, &pos);
      if (pos != s.size()) throw field_error(path, "cannot parse '" + s + "' as a number");
      return d;
    } catch (const std::invalid_argument&) {
      throw field_error(path, "cannot parse '" + s + "' as a number");
    } catch (const std::out_of_range&) {
      throw field_error(path, "'" + s + "' is out of range");
    }
  };
  if (text == "null") return nullptr;
  switch (f.kind) {
    case FieldKind::kUint:
    case FieldKind::kReal:
      return check_value(f, as_number(text));
    case FieldKind::kBool:
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw field_error(path, "expected true or false, got '" + text + "'");
    case FieldKind::kString:
      return text;
    case FieldKind::kUintList:
    case FieldKind::kRealList: {
      if (!text.empty() && text.front() == '[') {
        try {
          return check_value(f, Json::parse(text));
        } catch (const Json::exception&) {
          throw field_error(path, "malformed list '" + text + "'");
        }
      }
      Json arr = Json::array();
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) arr.push_back(as_number(item));
      }
      return check_value(f, arr);
    }
  }
  return nullptr;
}

}  // namespace detail

// Resolved configuration: one JSON object keyed by dotted field paths.
class Settings {
 public:
  Settings() {
    for (const auto& f : config_schema()) values_[f.path] = f.default_value;
  }

  // Merges a config document; nested objects and dotted keys are both accepted.
  void merge(const Json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
    Json flat = Json::object();
    detail::flatten(doc, "", flat);
    for (auto it = flat.begin(); it != flat.end(); ++it) set(it.key(), *it);
    if (values_["schema"] != kSchemaVersion) {
      throw Error(ErrorCode::kInvalidConfig, "schema: expected hclip-v1");
    }
  }

  void merge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open config '" + path + "'");
    Json doc;
    try {
      doc = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, "config '" + path + "': " + e.what());
    }
    merge(doc);
  }

  void set(const std::string& path, const Json& value) {
    const FieldSpec* f = find_field(path);
    if (!f) throw Error(ErrorCode::kInvalidConfig, path + ": unknown field");
    values_[path] = detail::check_value(*f, value);
  }

  // Override from text such as "--K 1000" or "--set experiment.K_grid=1e3,1e4".
  void set_text(const std::string& path, const std::string& text) {
    const FieldSpec* f = find_field(path);
    if (!f) throw Error(ErrorCode::kInvalidConfig, path + ": unknown field");
    values_[path] = detail::parse_scalar_text(*f, text);
  }

  void set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::kInvalidConfig, "--set expects path=value, got '" + assignment + "'");
    }
    set_text(assignment.substr(0, eq), assignment.substr(eq + 1));
  }

  bool has(const std::string& path) const { return !values_.at(path).is_null(); }
  const Json& raw(const std::string& path) const { return values_.at(path); }

  double real(const std::string& path) const {
    if (!has(path)) throw detail::field_error(path, "required but not set");
    return values_.at(path).get<double>();
  }
  std::uint64_t uint(const std::string& path) const {
    if (!has(path)) throw detail::field_error(path, "required but not set");
    return values_.at(path).get<std::uint64_t>();
  }
  bool boolean(const std::string& path) const {
    if (!has(path)) throw detail::field_error(path, "required but not set");
    return values_.at(path).get<bool>();
  }
  std::string text(const std::string& path) const {
    if (!has(path)) throw detail::field_error(path, "required but not set");
    return values_.at(path).get<std::string>();
  }
  std::optional<double> opt_real(const std::string& path) const {
    return has(path) ? std::optional<double>(real(path)) : std::nullopt;
  }

  // Nested rendering for --dry-run and the JSON config echo.
  Json to_json() const {
    Json out = Json::object();
    for (const auto& f : config_schema()) {
      std::string ptr = "/" + std::string(f.path);
      std::replace(ptr.begin(), ptr.end(), '.', '/');
      out[Json::json_pointer(ptr)] = values_.at(f.path);
    }
    return out;
  }

 private:
  Json values_ = Json::object();
};

// -------------------------------------------------------------------------
// Builders from resolved settings.

inline bool problem_is_convex(const std::string& kind) {
  if (kind == "quadratic" || kind == "logistic") return true;
  if (kind == "nonconvex") return false;
  throw detail::field_error("problem.kind", "unknown value '" + kind + "'");
}

inline ProblemSpec build_problem(const Settings& s) {
  const std::string kind = s.text("problem.kind");
  const std::size_t d = s.uint("problem.d");
  if (d == 0) throw detail::field_error("problem.d", "must be >= 1");
  if (kind == "quadratic") {
    return make_quadratic(d, linear_spectrum(d, s.real("problem.eig_min"), s.real("problem.eig_max")),
                          Vector::Zeros(d));
  }
  if (kind == "nonconvex") return make_nonconvex_smooth(d, s.real("problem.scale"));
  if (kind == "logistic") {
    return make_logistic_regression(s.uint("problem.n"), d, s.real("problem.reg"),
                                    s.uint("problem.data_seed"));
  }
  problem_is_convex(kind);  // throws with the field name
  return {};
}

// Convex: x* + x0_dist along the normalised diagonal. Non-convex: x0_coord in
// every coordinate.
inline Vector build_x0(const Settings& s, const ProblemSpec& p) {
  const Vector ones = Vector::Filled(p.dim, 1.0);
  if (p.convex) {
    const double r = s.real("problem.x0_dist");
    return *p.x_star + (r / std::sqrt(static_cast<double>(p.dim))) * ones;
  }
  return s.real("problem.x0_coord") * ones;
}

inline NoiseModel build_noise(const Settings& s, std::size_t d) {
  const std::string kind = s.text("noise.kind");
  const double alpha = s.real("alpha");
  NoiseModel m;
  if (kind == "pareto") {
    m = make_pareto_noise(alpha, s.real("noise.tail_p"), s.real("noise.scale"), d);
  } else if (kind == "student-t") {
    m = make_student_t_noise(alpha, s.real("noise.nu"), s.real("noise.scale"), d);
  } else if (kind == "gaussian") {
    m = make_gaussian_noise(alpha, s.real("noise.scale"), d);
  } else if (kind == "none") {
    m = make_zero_noise(d, alpha);
  } else {
    throw detail::field_error("noise.kind", "unknown value '" + kind + "'");
  }
  if (auto target = s.opt_real("noise.sigma_alpha")) m = with_sigma_alpha(m, *target);
  return m;
}

inline std::optional<PrivacyTarget> build_privacy(const Settings& s, std::uint64_t K) {
  if (!s.has("epsilon")) return std::nullopt;
  PrivacyTarget t;
  t.epsilon = s.real("epsilon");
  t.delta = s.real("delta");
  t.K = K;
  t.regime = ParseDpRegime(s.text("dp_regime"));
  t.q = s.real("q");
  t.c_dp = s.real("c_dp");
  t.validate();
  return t;
}

// Theory parameters without privacy calibration. Explicit L / R / Delta / sigma / d / convex win; anything
// unset is derived from the configured problem, start point and noise.
inline TheoryParams build_theory(const Settings& s) {
  TheoryParams t;
  t.alpha = s.real("alpha");
  t.K = s.uint("K");
  t.beta = s.real("beta");
  t.lambda = s.real("lambda");
  t.sigma_omega = s.real("sigma_omega");
  t.eta = s.opt_real("eta");
  t.convex = s.has("convex") ? s.boolean("convex") : problem_is_convex(s.text("problem.kind"));
  const char* radius_field = t.convex ? "R" : "Delta";
  const bool derive = !s.has("L") || !s.has(radius_field) || !s.has("sigma");
  std::optional<ProblemSpec> p;
  if (derive) p = build_problem(s);
  if (p && p->convex != t.convex && !(s.has("L") && s.has(radius_field))) {
    throw detail::field_error("convex", "does not match problem.kind; set L and R/Delta explicitly");
  }
  t.L = s.has("L") ? s.real("L") : p->L;
  t.radius = s.has(radius_field) ? s.real(radius_field) : initial_gap(*p, build_x0(s, *p));
  t.d = s.has("d") ? s.uint("d") : s.uint("problem.d");
  t.sigma = s.has("sigma") ? s.real("sigma") : build_noise(s, s.uint("problem.d")).sigma();
  t.validate();
  return t;
}

inline ExperimentConfig build_experiment(const Settings& s) {
  ExperimentConfig c;
  c.problem = build_problem(s);
  if (s.has("convex") && s.boolean("convex") != c.problem.convex) {
    throw detail::field_error("convex", "does not match problem.kind");
  }
  c.noise = build_noise(s, c.problem.dim);
  c.x0 = build_x0(s, c.problem);
  c.theory = theory_for(c.problem, c.noise, c.x0, s.real("lambda"), s.uint("K"), s.real("beta"));
  if (s.has("L")) c.theory.L = s.real("L");
  const char* radius_field = c.problem.convex ? "R" : "Delta";
  if (s.has(radius_field)) c.theory.radius = s.real(radius_field);
  if (s.has("sigma")) c.theory.sigma = s.real("sigma");
  c.theory.sigma_omega = s.real("sigma_omega");
  c.theory.eta = s.opt_real("eta");
  c.privacy = build_privacy(s, c.theory.K);
  c.step_rule = ParseStepRule(s.text("step_rule"));
  c.gamma = s.opt_real("gamma");
  c.trials = s.uint("experiment.trials");
  for (const auto& k : s.raw("experiment.K_grid")) c.K_grid.push_back(k.get<std::uint64_t>());
  for (const auto& l : s.raw("experiment.lambda_grid")) c.lambda_grid.push_back(l.get<double>());
  c.seed = s.uint("seed");
  c.workers = s.uint("workers");
  c.record = ParseRecordLevel(s.text("experiment.record"));
  c.validate();
  return c;
}

inline LemmaGridSpec build_lemma_spec(const Settings& s) {
  LemmaGridSpec g;
  g.alphas = s.raw("lemma.alphas").get<std::vector<double>>();
  g.lambda_over_sigma = s.raw("lemma.lambda_over_sigma").get<std::vector<double>>();
  g.x_over_lambda = s.raw("lemma.x_over_lambda").get<std::vector<double>>();
  g.d = s.uint("lemma.d");
  g.n_samples = s.uint("lemma.n_samples");
  g.seed = s.uint("seed");
  g.scale = s.real("noise.scale");
  g.tail_gap = s.real("lemma.tail_gap");
  return g;
}

}  // namespace hclip
