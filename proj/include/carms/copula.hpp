// Copyright 2026 The carms Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Antithetic copulas: N uniforms whose pairwise dependence is negative.
//
// The Dirichlet copula transforms d ~ Dir(1_N) through the marginal CDF of
// one coordinate, u_i = 1 - (1 - d_i)^(N-1). Its bivariate CDF is available
// in closed form, which is what makes the analytic inverse-CDF sampler work.
// The Gaussian copula is offered for the Gumbel path only.

#ifndef CARMS_COPULA_HPP_
#define CARMS_COPULA_HPP_

#include "carms/core.hpp"

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace carms {

/// Copula outputs are kept inside [kCopulaEpsilon, 1 - kCopulaEpsilon].
inline constexpr double kCopulaEpsilon = 1e-12;

/// N uniforms with a negatively dependent joint law.
class CopulaDraw {
 public:
  explicit CopulaDraw(std::vector<double> values) : values_(std::move(values)) {
    detail::require(values_.size() >= 2, "CopulaDraw needs at least 2 samples");
    for (double u : values_) {
      detail::require(u > 0.0 && u < 1.0, "CopulaDraw entries must lie in (0, 1)");
    }
  }

  std::size_t n_samples() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }

 private:
  std::vector<double> values_;
};

struct CopulaKind {
  enum class Family { kDirichlet, kGaussian };

  Family family = Family::kDirichlet;
  /// Gaussian equicorrelation; unset means the most negative feasible value
  /// -1/(N-1) for the N at hand.
  std::optional<double> rho;

  static CopulaKind dirichlet() { return {Family::kDirichlet, std::nullopt}; }
  static CopulaKind gaussian(std::optional<double> rho = std::nullopt) {
    return {Family::kGaussian, rho};
  }

  bool is_dirichlet() const { return family == Family::kDirichlet; }

  /// Gaussian correlation resolved for n samples.
  double gaussian_rho(std::size_t n) const {
    return rho.value_or(-1.0 / static_cast<double>(n - 1));
  }

  std::string name() const { return is_dirichlet() ? "dirichlet" : "gaussian"; }
};

namespace detail {

inline double clamp_unit(double u) {
  return std::clamp(u, kCopulaEpsilon, 1.0 - kCopulaEpsilon);
}

}  // namespace detail

/// Maps a point d of the simplex to copula uniforms u_i = 1 - (1 - d_i)^(n-1).
inline CopulaDraw dirichlet_to_copula(std::span<const double> simplex_point) {
  const std::size_t n = simplex_point.size();
  detail::require(n >= 2, "Dirichlet copula needs n >= 2");
  std::vector<double> u(n);
  const double exponent = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = simplex_point[i];
    detail::require(d >= 0.0 && d <= 1.0, "simplex coordinates must lie in [0, 1]");
    // 1 - (1-d)^(n-1) via expm1/log1p keeps precision for small d.
    u[i] = detail::clamp_unit(-std::expm1(exponent * std::log1p(-d)));
  }
  return CopulaDraw(std::move(u));
}

inline CopulaDraw sample_dirichlet_copula(std::size_t n, Rng& rng) {
  detail::require(n >= 2, "Dirichlet copula needs n >= 2");
  std::vector<double> d(n);
  double total = 0.0;
  for (auto& x : d) {
    x = -std::log(uniform_open(rng));
    total += x;
  }
  for (auto& x : d) x /= total;
  return dirichlet_to_copula(d);
}

/// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline CopulaDraw sample_gaussian_copula(std::size_t n, double rho, Rng& rng) {
  detail::require(n >= 2, "Gaussian copula needs n >= 2");
  const double floor = -1.0 / static_cast<double>(n - 1);
  detail::require(rho >= floor - 1e-15 && rho <= 0.0,
                  "Gaussian equicorrelation must lie in [-1/(n-1), 0]");
  // y = z - c * mean(z) has Var = 1 - k/n and Cov = -k/n with k = 2c - c^2;
  // pick k so that the correlation is rho.
  const double nd = static_cast<double>(n);
  const double k = std::min(1.0, -rho * nd / (1.0 - rho));
  const double c = 1.0 - std::sqrt(1.0 - k);
  const double scale = 1.0 / std::sqrt(1.0 - k / nd);

  std::normal_distribution<double> normal;
  std::vector<double> z(n);
  double mean = 0.0;
  for (auto& x : z) {
    x = normal(rng);
    mean += x;
  }
  mean /= nd;
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = detail::clamp_unit(normal_cdf((z[i] - c * mean) * scale));
  }
  return CopulaDraw(std::move(u));
}

inline CopulaDraw sample_copula(const CopulaKind& kind, std::size_t n, Rng& rng) {
  if (kind.is_dirichlet()) return sample_dirichlet_copula(n, rng);
  return sample_gaussian_copula(n, kind.gaussian_rho(n), rng);
}

/// Bivariate CDF P(u_i < p, u_j < q) of the n-dimensional Dirichlet copula:
///   p + q - 1 + max(0, (1-p)^(1/(n-1)) + (1-q)^(1/(n-1)) - 1)^(n-1).
/// The result is kept within the Frechet-Hoeffding bounds so that exact
/// zeros (e.g. the n = 2 lower bound) come out as exact zeros.
inline double dirichlet_bivariate_cdf(double p, double q, std::size_t n) {
  detail::require(n >= 2, "Dirichlet copula needs n >= 2");
  detail::require(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= 1.0,
                  "copula CDF arguments must lie in [0, 1]");
  if (p == 0.0 || q == 0.0) return 0.0;
  if (p == 1.0) return q;
  if (q == 1.0) return p;
  const double lower = std::max(0.0, p + q - 1.0);
  if (n == 2) return lower;

  const double root = 1.0 / static_cast<double>(n - 1);
  const double slack = std::pow(1.0 - p, root) + std::pow(1.0 - q, root) - 1.0;
  if (slack <= 0.0) return lower;
  const double value = p + q - 1.0 + std::pow(slack, static_cast<double>(n - 1));
  return std::clamp(value, lower, std::min(p, q));
}

/// corr(1{u_i < p}, 1{u_j < p}) under the Dirichlet copula; the ARMS debiasing
/// term.
inline double bernoulli_pair_correlation(double p, std::size_t n) {
  detail::require(p > 0.0 && p < 1.0, "Bernoulli probability must lie in (0, 1)");
  detail::require(n >= 2, "Dirichlet copula needs n >= 2");
  return (dirichlet_bivariate_cdf(p, p, n) - p * p) / (p * (1.0 - p));
}

}  // namespace carms

#endif  // CARMS_COPULA_HPP_
