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

// Test problems with known smoothness and heavy-tailed gradient oracles with a
// certified bound on the alpha-th moment of the noise norm.
#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>

#include "hclip/error.hpp"
#include "hclip/numkit.hpp"

namespace hclip {

using Objective = std::function<double(std::span<const double>)>;
using GradientFn = std::function<void(std::span<const double>, std::span<double>)>;

struct ProblemSpec {
  std::string name;
  std::size_t dim = 0;
  Objective objective;
  GradientFn gradient;  // writes grad f(x) into the second argument
  double L = 0.0;
  std::optional<Vector> x_star;
  double f_star = 0.0;
  bool convex = false;
  // R >= |x0 - x*| for convex problems, Delta >= f(x0) - f* otherwise.
  // Zero until a starting point is attached with with_start().
  double r_or_delta = 0.0;

  double value(const Vector& x) const {
    require_same_dim(x.size(), dim, name.c_str());
    return objective(x.span());
  }
  Vector grad(const Vector& x) const {
    require_same_dim(x.size(), dim, name.c_str());
    std::vector<double> g(dim);
    gradient(x.span(), g);
    return Vector(std::move(g));
  }
};

// Distance (convex, needs x*) or initial gap f(x0) - f* (non-convex) at x0.
inline double initial_gap(const ProblemSpec& p, const Vector& x0) {
  if (p.convex) {
    if (!p.x_star) {
      throw Error(ErrorCode::kInvalidProblem, p.name + ": convex problem has no x_star");
    }
    return norm(x0 - *p.x_star);
  }
  return p.value(x0) - p.f_star;
}

inline ProblemSpec with_start(ProblemSpec p, const Vector& x0) {
  p.r_or_delta = initial_gap(p, x0);
  return p;
}

// f(x) = 1/2 sum a_i (x_i - x*_i)^2.
inline ProblemSpec make_quadratic(std::size_t d, std::vector<double> eigenvalues, Vector x_star) {
  if (d == 0) throw Error(ErrorCode::kInvalidDimension, "quadratic: d must be >= 1");
  if (eigenvalues.size() != d) {
    throw Error(ErrorCode::kInvalidProblem, "quadratic: need exactly d eigenvalues");
  }
  require_same_dim(x_star.size(), d, "quadratic x_star");
  double L = 0.0;
  for (double a : eigenvalues) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      throw Error(ErrorCode::kInvalidProblem, "quadratic: eigenvalues must be positive and finite");
    }
    L = std::max(L, a);
  }
  auto a = std::make_shared<const std::vector<double>>(std::move(eigenvalues));
  auto xs = std::make_shared<const std::vector<double>>(x_star.entries());
  ProblemSpec p;
  p.name = "quadratic";
  p.dim = d;
  p.objective = [a, xs](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double r = x[i] - (*xs)[i];
      s += (*a)[i] * r * r;
    }
    return 0.5 * s;
  };
  p.gradient = [a, xs](std::span<const double> x, std::span<double> g) {
    for (std::size_t i = 0; i < x.size(); ++i) g[i] = (*a)[i] * (x[i] - (*xs)[i]);
  };
  p.L = L;
  p.x_star = std::move(x_star);
  p.f_star = 0.0;
  p.convex = true;
  return p;
}

// Eigenvalues evenly spaced on [lo, hi] (a single value lo when d == 1).
inline std::vector<double> linear_spectrum(std::size_t d, double lo, double hi) {
  std::vector<double> a(d);
  for (std::size_t i = 0; i < d; ++i) {
    a[i] = d == 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(d - 1);
  }
  return a;
}

// f(x) = scale * sum x_i^2 / (1 + x_i^2). |f''| <= 2 * scale per coordinate.
inline ProblemSpec make_nonconvex_smooth(std::size_t d, double scale) {
  if (d == 0) throw Error(ErrorCode::kInvalidDimension, "nonconvex_smooth: d must be >= 1");
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw Error(ErrorCode::kInvalidProblem, "nonconvex_smooth: scale must be positive");
  }
  ProblemSpec p;
  p.name = "nonconvex_smooth";
  p.dim = d;
  p.objective = [scale](std::span<const double> x) {
    double s = 0.0;
    for (double xi : x) {
      const double q = xi * xi;
      s += q / (1.0 + q);
    }
    return scale * s;
  };
  p.gradient = [scale](std::span<const double> x, std::span<double> g) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double den = 1.0 + x[i] * x[i];
      g[i] = scale * 2.0 * x[i] / (den * den);
    }
  };
  p.L = 2.0 * scale;
  p.x_star = Vector::Zeros(d);
  p.f_star = 0.0;
  p.convex = false;
  return p;
}

namespace detail {

// Solves the SPD system H z = b in place (b becomes z).
inline void cholesky_solve(std::vector<double>& h, std::vector<double>& b, std::size_t d) {
  for (std::size_t j = 0; j < d; ++j) {
    double s = h[j * d + j];
    for (std::size_t k = 0; k < j; ++k) s -= h[j * d + k] * h[j * d + k];
    if (!(s > 0.0)) throw Error(ErrorCode::kInternal, "cholesky: matrix not positive definite");
    h[j * d + j] = std::sqrt(s);
    for (std::size_t i = j + 1; i < d; ++i) {
      double t = h[i * d + j];
      for (std::size_t k = 0; k < j; ++k) t -= h[i * d + k] * h[j * d + k];
      h[i * d + j] = t / h[j * d + j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < i; ++k) b[i] -= h[i * d + k] * b[k];
    b[i] /= h[i * d + i];
  }
  for (std::size_t i = d; i-- > 0;) {
    for (std::size_t k = i + 1; k < d; ++k) b[i] -= h[k * d + i] * b[k];
    b[i] /= h[i * d + i];
  }
}

inline double log1p_exp(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace detail

// Synthetic L2-regularized logistic regression on n examples with standard
// Gaussian features. Labels are drawn from a logistic model around a random
// unit-norm weight vector. The optimum is found by damped Newton iterations.
// L is bounded by ||A||_F^2 / (4n) + reg.
inline ProblemSpec make_logistic_regression(std::size_t n, std::size_t d, double reg,
                                            std::uint64_t data_seed) {
  if (d == 0 || d > 50) throw Error(ErrorCode::kInvalidDimension, "logistic: need 1 <= d <= 50");
  if (n == 0 || n > 10000) throw Error(ErrorCode::kInvalidProblem, "logistic: need 1 <= n <= 10000");
  if (!(reg > 0.0) || !std::isfinite(reg)) {
    throw Error(ErrorCode::kInvalidProblem, "logistic: reg must be positive");
  }
  RngStream rng(data_seed, 0);
  std::vector<double> w_true(d);
  fill_gaussian(rng, 1.0, w_true);
  const double wn = norm(std::span<const double>(w_true));
  for (double& w : w_true) w /= wn;

  // Rows are pre-multiplied by the label: z_i = y_i a_i.
  auto z = std::make_shared<std::vector<double>>(n * d);
  std::vector<double> row(d);
  double frob = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    fill_gaussian(rng, 1.0, row);
    const double p = detail::sigmoid(dot(row, w_true));
    const double y = rng.uniform01() < p ? 1.0 : -1.0;
    for (std::size_t j = 0; j < d; ++j) {
      (*z)[i * d + j] = y * row[j];
      frob += row[j] * row[j];
    }
  }
  const auto nn = static_cast<double>(n);

  auto objective = [z, n, d, reg, nn](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s += detail::log1p_exp(-dot(std::span<const double>(z->data() + i * d, d), x));
    }
    return s / nn + 0.5 * reg * dot(x, x);
  };
  auto gradient = [z, n, d, reg, nn](std::span<const double> x, std::span<double> g) {
    for (std::size_t j = 0; j < d; ++j) g[j] = reg * x[j];
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> zi(z->data() + i * d, d);
      const double w = -detail::sigmoid(-dot(zi, x)) / nn;
      for (std::size_t j = 0; j < d; ++j) g[j] += w * zi[j];
    }
  };

  std::vector<double> x(d, 0.0), g(d), h(d * d), step(d), trial(d);
  for (int it = 0; it < 100; ++it) {
    gradient(x, g);
    if (norm(std::span<const double>(g)) < 1e-13) break;
    std::fill(h.begin(), h.end(), 0.0);
    for (std::size_t j = 0; j < d; ++j) h[j * d + j] = reg;
    for (std::size_t i = 0; i < n; ++i) {
      std::span<const double> zi(z->data() + i * d, d);
      const double s = detail::sigmoid(dot(zi, x));
      const double w = s * (1.0 - s) / nn;
      for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = 0; b <= a; ++b) h[a * d + b] += w * zi[a] * zi[b];
      }
    }
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a + 1; b < d; ++b) h[a * d + b] = h[b * d + a];
    }
    step = g;
    detail::cholesky_solve(h, step, d);
    const double f0 = objective(x);
    double t = 1.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = x[j] - t * step[j];
      if (objective(trial) <= f0 - 1e-4 * t * dot(g, step)) break;
    }
    x = trial;
  }

  ProblemSpec p;
  p.name = "logistic";
  p.dim = d;
  p.objective = objective;
  p.gradient = gradient;
  p.L = frob / (4.0 * nn) + reg;
  p.x_star = Vector(x);
  p.f_star = objective(x);
  p.convex = true;
  return p;
}

// ---------------------------------------------------------------------------
// Noise models.

enum class NoiseKind { kGaussian, kSymmetricPareto, kStudentT };

inline std::string NoiseKindName(NoiseKind k) {
  switch (k) {
    case NoiseKind::kGaussian: return "gaussian";
    case NoiseKind::kSymmetricPareto: return "pareto";
    case NoiseKind::kStudentT: return "student-t";
  }
  return "unknown";
}

// Zero-mean noise xi with E|xi|^alpha <= sigma_alpha.
struct NoiseModel {
  NoiseKind kind = NoiseKind::kGaussian;
  double alpha = 2.0;
  double sigma_alpha = 0.0;
  std::size_t d = 1;
  double scale = 0.0;   // all kinds
  double tail_p = 0.0;  // pareto
  double nu = 0.0;      // student-t

  double sigma() const { return std::pow(sigma_alpha, 1.0 / alpha); }
};

namespace detail {

inline void check_alpha(double alpha) {
  if (!(alpha > 1.0 && alpha <= 2.0)) {
    throw Error(ErrorCode::kInvalidParams, "noise: alpha must lie in (1, 2]");
  }
}

inline void check_noise_common(double alpha, double scale, std::size_t d, bool allow_zero) {
  check_alpha(alpha);
  if (d == 0) throw Error(ErrorCode::kInvalidDimension, "noise: d must be >= 1");
  if (!std::isfinite(scale) || scale < 0.0 || (!allow_zero && scale == 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "noise: scale must be positive and finite");
  }
}

// E|Z|^a for Z ~ N(0, I_d).
inline double gaussian_norm_moment(double a, std::size_t d) {
  const double h = 0.5 * static_cast<double>(d);
  return std::pow(2.0, 0.5 * a) * std::exp(std::lgamma(h + 0.5 * a) - std::lgamma(h));
}

}  // namespace detail

inline NoiseModel make_gaussian_noise(double alpha, double scale, std::size_t d) {
  detail::check_noise_common(alpha, scale, d, /*allow_zero=*/true);
  NoiseModel m;
  m.kind = NoiseKind::kGaussian;
  m.alpha = alpha;
  m.d = d;
  m.scale = scale;
  m.sigma_alpha = std::pow(scale, alpha) * detail::gaussian_norm_moment(alpha, d);
  return m;
}

inline NoiseModel make_zero_noise(std::size_t d, double alpha = 2.0) {
  return make_gaussian_noise(alpha, 0.0, d);
}

// Radius r = scale * U^(-1/tail_p), direction uniform on the sphere.
inline NoiseModel make_pareto_noise(double alpha, double tail_p, double scale, std::size_t d) {
  detail::check_noise_common(alpha, scale, d, /*allow_zero=*/false);
  if (!(tail_p > alpha) || !std::isfinite(tail_p)) {
    throw Error(ErrorCode::kMomentUnbounded,
                "pareto: tail_p must exceed alpha for a finite alpha-th moment");
  }
  NoiseModel m;
  m.kind = NoiseKind::kSymmetricPareto;
  m.alpha = alpha;
  m.d = d;
  m.scale = scale;
  m.tail_p = tail_p;
  m.sigma_alpha = std::pow(scale, alpha) * tail_p / (tail_p - alpha);
  return m;
}

// Multivariate Student-t: scale * Z * sqrt(nu / W), W ~ chi^2_nu.
// E|xi|^alpha = scale^alpha E|Z|^alpha E[(nu/W)^(alpha/2)], the last factor
// integrated numerically.
inline NoiseModel make_student_t_noise(double alpha, double nu, double scale, std::size_t d) {
  detail::check_noise_common(alpha, scale, d, /*allow_zero=*/false);
  if (!(nu > alpha) || !std::isfinite(nu)) {
    throw Error(ErrorCode::kMomentUnbounded, "student-t: nu must exceed alpha");
  }
  const boost::math::chi_squared_distribution<double> chi2(nu);
  const double h = 0.5 * alpha;
  auto integrand = [&](double w) {
    if (w <= 0.0 || !std::isfinite(w)) return 0.0;
    return std::pow(nu / w, h) * boost::math::pdf(chi2, w);
  };
  boost::math::quadrature::exp_sinh<double> integrator;
  const double inv_moment = integrator.integrate(integrand, 0.0, std::numeric_limits<double>::infinity());

  NoiseModel m;
  m.kind = NoiseKind::kStudentT;
  m.alpha = alpha;
  m.d = d;
  m.scale = scale;
  m.nu = nu;
  m.sigma_alpha = std::pow(scale, alpha) * detail::gaussian_norm_moment(alpha, d) * inv_moment;
  return m;
}

// Same family and shape with the scale chosen so that sigma_alpha == target.
inline NoiseModel with_sigma_alpha(const NoiseModel& m, double target) {
  if (!(target > 0.0) || !std::isfinite(target)) {
    throw Error(ErrorCode::kInvalidParams, "noise: target sigma_alpha must be positive");
  }
  if (!(m.sigma_alpha > 0.0)) {
    throw Error(ErrorCode::kInvalidParams, "noise: cannot rescale a degenerate model");
  }
  const double factor = std::pow(target / m.sigma_alpha, 1.0 / m.alpha);
  NoiseModel out = m;
  out.scale = m.scale * factor;
  out.sigma_alpha = target;
  return out;
}

// Writes one noise draw into out (size d).
inline void sample_noise(const NoiseModel& m, RngStream& rng, std::span<double> out) {
  require_same_dim(out.size(), m.d, "sample_noise");
  switch (m.kind) {
    case NoiseKind::kGaussian:
      fill_gaussian(rng, m.scale, out);
      return;
    case NoiseKind::kSymmetricPareto: {
      const double r = m.scale * std::pow(rng.uniform_open_closed(), -1.0 / m.tail_p);
      double n = 0.0;
      do {
        fill_gaussian(rng, 1.0, out);
        n = norm(std::span<const double>(out));
      } while (n == 0.0);
      const double f = r / n;
      for (double& v : out) v *= f;
      return;
    }
    case NoiseKind::kStudentT: {
      fill_gaussian(rng, 1.0, out);
      std::gamma_distribution<double> chi2(0.5 * m.nu, 2.0);
      const double w = chi2(rng);
      const double f = m.scale * std::sqrt(m.nu / w);
      for (double& v : out) v *= f;
      return;
    }
  }
}

inline Vector sample_noise(const NoiseModel& m, RngStream& rng) {
  std::vector<double> out(m.d);
  sample_noise(m, rng, out);
  return Vector(std::move(out));
}

struct StochasticOracle {
  ProblemSpec problem;
  NoiseModel noise;

  StochasticOracle(ProblemSpec p, NoiseModel n) : problem(std::move(p)), noise(std::move(n)) {
    require_same_dim(noise.d, problem.dim, "oracle noise");
  }

  // grad f(x) + xi into out; `grad` must already hold grad f(x).
  void sample_into(std::span<const double> grad, std::span<double> out, RngStream& rng) const {
    sample_noise(noise, rng, out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += grad[i];
  }
};

inline Vector sample_gradient(const StochasticOracle& oracle, const Vector& x, RngStream& rng) {
  require_same_dim(x.size(), oracle.problem.dim, "sample_gradient");
  std::vector<double> g(x.size()), out(x.size());
  oracle.problem.gradient(x.span(), g);
  oracle.sample_into(g, out, rng);
  return Vector(std::move(out));
}

}  // namespace hclip
