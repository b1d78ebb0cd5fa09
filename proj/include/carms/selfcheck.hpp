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

// Oracle-backed self checks shipped with the CLI.

#ifndef CARMS_SELFCHECK_HPP_
#define CARMS_SELFCHECK_HPP_

#include "carms/experiments.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace carms {

enum class SelfcheckLevel { kFast, kFull };

struct SelfcheckOptions {
  SelfcheckLevel level = SelfcheckLevel::kFast;
  std::uint64_t seed = 0;
  /// Fault injection: negate ratio entry (0, 1) wherever ratios are used.
  bool corrupt_ratio = false;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SelfcheckReport {
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }

  std::string text() const {
    std::string out;
    std::size_t failed = 0;
    for (const auto& c : checks) {
      out += fmt::format("{} {}: {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
      if (!c.passed) ++failed;
    }
    if (failed == 0) {
      out += fmt::format("selfcheck: all {} checks passed\n", checks.size());
    } else {
      out += fmt::format("selfcheck: {} of {} checks failed\n", failed, checks.size());
    }
    return out;
  }
};

/// Antithetic pmf for p = (0.6, 0.3, 0.1) whose off-diagonal entries all
/// dominate p_i p_j. Entry (3,3) is 0 so that the rows sum to the marginals.
inline BivariatePmf worked_example_antithetic_pmf() {
  Matrix m(3, 3);
  m << 0.30, 0.24, 0.06,
       0.24, 0.02, 0.04,
       0.06, 0.04, 0.00;
  return BivariatePmf{m};
}

namespace detail {

inline ProbVector random_probs(std::size_t categories, double floor, Rng& rng) {
  const ProbVector raw = sample_dirichlet_probs(categories, 1.0, rng);
  // Mixing with the uniform vector keeps every entry >= floor.
  const double c = static_cast<double>(categories);
  return ProbVector::normalized((raw.vector() * (1.0 - floor * c)).array() + floor);
}

inline std::size_t uniform_int(std::size_t lo, std::size_t hi, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Vector random_vector(std::size_t n, double scale, Rng& rng) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) v[k] = dist(rng);
  return v;
}

inline SampleMatrix random_samples(std::size_t n, std::size_t categories, Rng& rng) {
  std::vector<std::size_t> cats(n);
  for (auto& k : cats) k = uniform_int(0, categories - 1, rng);
  return SampleMatrix(std::move(cats), categories);
}

inline RatioMatrix random_symmetric_ratios(std::size_t categories, Rng& rng) {
  std::uniform_real_distribution<double> dist(0.1, 5.0);
  const auto c = static_cast<Eigen::Index>(categories);
  Matrix r(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = i; j < c; ++j) r(i, j) = r(j, i) = dist(rng);
  }
  return RatioMatrix{r, std::nullopt, false};
}

inline void maybe_corrupt(RatioMatrix& r, bool corrupt) {
  if (corrupt) r.ratios(0, 1) = -r.ratios(0, 1);
}

inline double relative_error(const Vector& got, const Vector& want) {
  return (got - want).cwiseAbs().maxCoeff() / std::max(1.0, want.cwiseAbs().maxCoeff());
}

}  // namespace detail

inline CheckResult check_pmf_normalization(std::size_t instances, Rng& rng) {
  double worst = 0.0;
  double smallest_anchored = 1.0;
  bool ok = true;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t c = detail::uniform_int(2, 6, rng);
    const std::size_t n = detail::uniform_int(2, 10, rng);
    const ProbVector p = detail::random_probs(c, 1e-3, rng);
    const auto orderings = all_anchored_orderings(c);
    const BivariatePmf pmf = bivariate_pmf_averaged(p, orderings, n);
    if ((pmf.probs.array() < 0.0).any()) ok = false;
    worst = std::max(worst, std::abs(pmf.probs.sum() - 1.0));
    worst = std::max(worst, (pmf.probs.rowwise().sum() - p.vector()).cwiseAbs().maxCoeff());
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        if (i == j) continue;
        const double anchored = bivariate_pmf_one_ordering(p, make_ordering(i, j, c), i, j, n);
        smallest_anchored = std::min(smallest_anchored, anchored);
        if (!(anchored > 0.0) || !(pmf(i, j) > 0.0)) ok = false;
      }
    }
  }
  ok = ok && worst <= 1e-10;
  return {"pmf-normalization", ok,
          fmt::format("{} vectors, max mass/marginal error {:.3e}, min anchored pair {:.3e}", instances, worst,
                      smallest_anchored)};
}

inline CheckResult check_matrix_form_equivalence(std::size_t instances, bool corrupt, Rng& rng) {
  double worst = 0.0;
  double worst_ones = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t c = detail::uniform_int(2, 6, rng);
    const std::size_t n = detail::uniform_int(2, 8, rng);
    const ProbVector p = detail::random_probs(c, 0.0, rng);
    const Vector f = detail::random_vector(n, 10.0, rng);
    const SampleMatrix z = detail::random_samples(n, c, rng);
    RatioMatrix r = detail::random_symmetric_ratios(c, rng);
    detail::maybe_corrupt(r, corrupt);
    worst = std::max(worst, detail::relative_error(carms(f, z, r, p), carms_pairwise(f, z, r)));
    const Vector reduced = carms(f, z, RatioMatrix::ones(c), p);
    worst_ones = std::max(worst_ones, (reduced - loorf(f, z, p)).cwiseAbs().maxCoeff());
  }
  const bool ok = worst <= 1e-12 && worst_ones <= 1e-13;
  return {"matrix-form-equivalence", ok,
          fmt::format("{} instances, matrix vs pairs rel err {:.3e}, ones vs LOORF abs err {:.3e}", instances, worst,
                      worst_ones)};
}

inline CheckResult check_pair_identity(std::size_t instances, Rng& rng) {
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t c = detail::uniform_int(2, 6, rng);
    const std::size_t n = detail::uniform_int(2, 8, rng);
    const ProbVector p = detail::random_probs(c, 0.0, rng);
    const Vector f = detail::random_vector(n, 10.0, rng);
    const SampleMatrix z = detail::random_samples(n, c, rng);
    worst = std::max(worst, detail::relative_error(loorf(f, z, p), loorf_pairwise(f, z)));
  }
  return {"pair-identity", worst <= 1e-12,
          fmt::format("{} instances, N-sample vs pair-mean LOORF rel err {:.3e}", instances, worst)};
}

/// One random unbiasedness instance: analytic averaged pmf per dimension
/// (full ordering set, no clipping) against the exact gradient.
inline double unbiasedness_error(std::size_t c, std::size_t dims, std::size_t n, bool corrupt, Rng& rng) {
  std::vector<ProbVector> probs;
  std::vector<BivariatePmf> pmfs;
  std::vector<RatioMatrix> ratios;
  const auto orderings = all_anchored_orderings(c);
  for (std::size_t d = 0; d < dims; ++d) {
    probs.push_back(detail::random_probs(c, 1e-3, rng));
    pmfs.push_back(bivariate_pmf_averaged(probs.back(), orderings, n));
    ratios.push_back(ratios_from_pmf(probs.back(), pmfs.back()));
    detail::maybe_corrupt(ratios.back(), corrupt);
  }
  std::vector<double> table;
  {
    const auto size = static_cast<std::size_t>(std::pow(static_cast<double>(c), static_cast<double>(dims)) + 0.5);
    const Vector v = detail::random_vector(size, 10.0, rng);
    table.assign(v.data(), v.data() + v.size());
  }
  const TabulatedObjective f(c, dims, std::move(table));
  const ExactMoments m = exact_carts_moments(f, pmfs, ratios);
  return (m.mean - exact_gradient(f, probs)).cwiseAbs().maxCoeff();
}

inline CheckResult check_unbiasedness(std::size_t instances, bool corrupt, Rng& rng) {
  static constexpr std::size_t kSampleCounts[] = {2, 3, 5};
  double worst = 0.0;
  for (std::size_t t = 0; t < instances; ++t) {
    const std::size_t c = detail::uniform_int(2, 5, rng);
    const std::size_t dims = detail::uniform_int(1, 2, rng);
    const std::size_t n = kSampleCounts[detail::uniform_int(0, 2, rng)];
    worst = std::max(worst, unbiasedness_error(c, dims, n, corrupt, rng));
  }
  return {"unbiasedness-enumeration", worst <= 1e-9,
          fmt::format("{} instances, max |E[CARMS] - grad| {:.3e}", instances, worst)};
}

inline CheckResult check_variance_example() {
  const ProbVector p{0.6, 0.3, 0.1};
  const auto f = TabulatedObjective::toy(3, 1);
  const std::vector<ProbVector> probs{p};
  const ExactMoments anti = exact_carms_expectation(f, probs, {worked_example_antithetic_pmf()});
  const ExactMoments indep = exact_loorf2_moments(f, probs);
  const Matrix grad = exact_gradient(f, probs);
  const double bias = std::max((anti.mean - grad).cwiseAbs().maxCoeff(), (indep.mean - grad).cwiseAbs().maxCoeff());
  const bool dominated = (anti.variance.array() <= indep.variance.array()).all();
  const bool strict = (anti.variance.array() < indep.variance.array()).any();
  return {"variance-example", bias <= 1e-10 && dominated && strict,
          fmt::format("sum var CARTS {:.6g} vs 2-LOORF {:.6g}, max bias {:.3e}", anti.variance.sum(),
                      indep.variance.sum(), bias)};
}

inline CheckResult check_zero_pair() {
  const ProbVector p{0.1, 0.2, 0.7};
  const double value = bivariate_pmf_one_ordering(p, Ordering::identity(3), 0, 1, 2);
  return {"zero-pair", value == 0.0, fmt::format("P(pair (1,2)) = {:.17g}", value)};
}

inline SelfcheckReport run_selfcheck(const SelfcheckOptions& options) {
  const bool full = options.level == SelfcheckLevel::kFull;
  Rng rng = make_stream(options.seed, {detail::kSelfcheckStream});
  SelfcheckReport report;
  report.checks.push_back(check_pmf_normalization(full ? 200 : 40, rng));
  report.checks.push_back(check_matrix_form_equivalence(full ? 1000 : 200, options.corrupt_ratio, rng));
  report.checks.push_back(check_pair_identity(full ? 1000 : 200, rng));
  report.checks.push_back(check_unbiasedness(full ? 100 : 20, options.corrupt_ratio, rng));
  report.checks.push_back(check_variance_example());
  report.checks.push_back(check_zero_pair());
  return report;
}

}  // namespace carms

#endif  // CARMS_SELFCHECK_HPP_
