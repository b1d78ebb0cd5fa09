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

// Brute-force references: exact gradients and exact estimator moments by
// enumeration, plus a Monte Carlo harness for paths without a closed-form
// joint law.

#ifndef CARMS_ORACLE_HPP_
#define CARMS_ORACLE_HPP_

#include "carms/gradient.hpp"

#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace carms {

/// Upper bounds on the enumeration sizes; exceeding them is an error.
inline constexpr std::size_t kMaxAssignments = 1'000'000;
inline constexpr std::size_t kMaxAssignmentPairs = 1'000'000;

/// f over all C^D joint assignments. Assignment (a_0, ..., a_{D-1}) is stored
/// at index sum_d a_d C^d.
class TabulatedObjective {
 public:
  TabulatedObjective(std::size_t categories, std::size_t dims, std::vector<double> table)
      : categories_(categories), dims_(dims), table_(std::move(table)) {
    detail::require(categories_ >= 2 && dims_ >= 1, "objective needs C >= 2 and D >= 1");
    const std::size_t expected = count_assignments(categories_, dims_);
    detail::require(expected <= kMaxAssignments, "objective table exceeds the enumeration bound");
    detail::require(table_.size() == expected, "objective table is incomplete");
    for (double v : table_) detail::require(std::isfinite(v), "objective table entries must be finite");
  }

  template <typename F>
  static TabulatedObjective from_function(std::size_t categories, std::size_t dims, F&& f) {
    const std::size_t total = count_assignments(categories, dims);
    detail::require(total <= kMaxAssignments, "objective table exceeds the enumeration bound");
    std::vector<double> table(total);
    std::vector<std::size_t> a(dims, 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
      decode(idx, categories, a);
      table[idx] = f(std::span<const std::size_t>(a));
    }
    return TabulatedObjective(categories, dims, std::move(table));
  }

  /// f(z_1..z_D) = sum_d sum_c d c z_dc with 1-based d and c.
  static TabulatedObjective toy(std::size_t categories, std::size_t dims) {
    return from_function(categories, dims, toy_value);
  }

  static double toy_value(std::span<const std::size_t> a) {
    double total = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) total += static_cast<double>((d + 1) * (a[d] + 1));
    return total;
  }

  std::size_t categories() const { return categories_; }
  std::size_t dims() const { return dims_; }
  std::size_t assignments() const { return table_.size(); }
  double at(std::size_t index) const { return table_[index]; }

  double operator()(std::span<const std::size_t> a) const {
    std::size_t idx = 0;
    std::size_t stride = 1;
    for (std::size_t d = 0; d < dims_; ++d) {
      idx += a[d] * stride;
      stride *= categories_;
    }
    return table_[idx];
  }

  Objective as_objective() const {
    return [this](std::span<const std::size_t> a) { return (*this)(a); };
  }

  static void decode(std::size_t index, std::size_t categories, std::vector<std::size_t>& out) {
    for (auto& x : out) {
      x = index % categories;
      index /= categories;
    }
  }

 private:
  static std::size_t count_assignments(std::size_t categories, std::size_t dims) {
    std::size_t total = 1;
    for (std::size_t d = 0; d < dims; ++d) {
      if (total > kMaxAssignments) return total;
      total *= categories;
    }
    return total;
  }

  std::size_t categories_;
  std::size_t dims_;
  std::vector<double> table_;
};

struct ExactMoments {
  Matrix mean;      // D x C
  Matrix variance;  // D x C, per coordinate
};

namespace detail {

inline std::vector<ProbVector> probs_from_logits(const Matrix& logits) {
  std::vector<ProbVector> out;
  out.reserve(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index d = 0; d < logits.rows(); ++d) out.push_back(ProbVector::from_logits(logits.row(d).transpose()));
  return out;
}

inline void check_objective(const TabulatedObjective& f, const std::vector<ProbVector>& probs) {
  require(probs.size() == f.dims(), "dimension count does not match the objective");
  for (const auto& p : probs) require(p.size() == f.categories(), "category count does not match the objective");
}

}  // namespace detail

/// E_q[f] with q = prod_d Cat(p^d).
inline double exact_objective(const TabulatedObjective& f, const std::vector<ProbVector>& probs) {
  detail::check_objective(f, probs);
  std::vector<std::size_t> a(f.dims());
  double total = 0.0;
  for (std::size_t idx = 0; idx < f.assignments(); ++idx) {
    TabulatedObjective::decode(idx, f.categories(), a);
    double w = 1.0;
    for (std::size_t d = 0; d < f.dims(); ++d) w *= probs[d][a[d]];
    total += w * f.at(idx);
  }
  return total;
}

/// Gradient of E_q[f] w.r.t. the logits: sum_a q(a) f(a) (e_{a_d} - p^d).
inline Matrix exact_gradient(const TabulatedObjective& f, const std::vector<ProbVector>& probs) {
  detail::check_objective(f, probs);
  const std::size_t dims = f.dims();
  const auto c = static_cast<Eigen::Index>(f.categories());
  Matrix grad = Matrix::Zero(static_cast<Eigen::Index>(dims), c);
  std::vector<std::size_t> a(dims);
  for (std::size_t idx = 0; idx < f.assignments(); ++idx) {
    TabulatedObjective::decode(idx, f.categories(), a);
    double w = 1.0;
    for (std::size_t d = 0; d < dims; ++d) w *= probs[d][a[d]];
    if (w == 0.0) continue;
    const double wf = w * f.at(idx);
    for (std::size_t d = 0; d < dims; ++d) {
      const auto row = static_cast<Eigen::Index>(d);
      grad.row(row) -= wf * probs[d].vector().transpose();
      grad(row, static_cast<Eigen::Index>(a[d])) += wf;
    }
  }
  return grad;
}

inline Matrix exact_gradient(const TabulatedObjective& f, const Matrix& logits) {
  return exact_gradient(f, detail::probs_from_logits(logits));
}

/// Exact mean and per-coordinate variance of the two-sample estimator
///   0.5 (f(a) - f(b)) (e_{a_d} - e_{b_d}) R^d(a_d, b_d)
/// when the pair (a, b) of joint assignments has law prod_d pmf^d(a_d, b_d).
/// No consistency checks on the pmfs; the caller owns that.
inline ExactMoments exact_carts_moments(const TabulatedObjective& f, const std::vector<BivariatePmf>& pmfs,
                                        const std::vector<RatioMatrix>& ratios) {
  const std::size_t dims = f.dims();
  const std::size_t c = f.categories();
  detail::require(pmfs.size() == dims && ratios.size() == dims, "dimension mismatch");
  detail::require(f.assignments() <= kMaxAssignmentPairs / f.assignments(),
                  "pair enumeration exceeds the enumeration bound");
  const auto rows = static_cast<Eigen::Index>(dims);
  const auto cols = static_cast<Eigen::Index>(c);
  Matrix first = Matrix::Zero(rows, cols);
  Matrix second = Matrix::Zero(rows, cols);
  std::vector<std::size_t> a(dims);
  std::vector<std::size_t> b(dims);
  for (std::size_t ia = 0; ia < f.assignments(); ++ia) {
    TabulatedObjective::decode(ia, c, a);
    for (std::size_t ib = 0; ib < f.assignments(); ++ib) {
      TabulatedObjective::decode(ib, c, b);
      double w = 1.0;
      for (std::size_t d = 0; d < dims && w != 0.0; ++d) w *= pmfs[d](a[d], b[d]);
      if (w == 0.0) continue;
      const double half_diff = 0.5 * (f.at(ia) - f.at(ib));
      for (std::size_t d = 0; d < dims; ++d) {
        if (a[d] == b[d]) continue;
        const double v = half_diff * ratios[d](a[d], b[d]);
        const auto row = static_cast<Eigen::Index>(d);
        const auto ca = static_cast<Eigen::Index>(a[d]);
        const auto cb = static_cast<Eigen::Index>(b[d]);
        first(row, ca) += w * v;
        first(row, cb) -= w * v;
        second(row, ca) += w * v * v;
        second(row, cb) += w * v * v;
      }
    }
  }
  Matrix variance = (second - first.cwiseProduct(first)).cwiseMax(0.0);
  return {first, variance};
}

/// Exact moments of the antithetic estimator over one sample pair, with
/// ratios computed from the supplied pmfs (no clipping). Pmf marginals must
/// match softmax(logits) to 1e-8.
inline ExactMoments exact_carms_expectation(const TabulatedObjective& f, const std::vector<ProbVector>& probs,
                                            const std::vector<BivariatePmf>& pmfs) {
  detail::check_objective(f, probs);
  detail::require(pmfs.size() == f.dims(), "need one pmf per dimension");
  constexpr double kMarginalTolerance = 1e-8;
  std::vector<RatioMatrix> ratios;
  ratios.reserve(pmfs.size());
  for (std::size_t d = 0; d < pmfs.size(); ++d) {
    const auto& pmf = pmfs[d];
    detail::require(pmf.size() == probs[d].size(), "pmf size does not match the category count");
    if ((pmf.probs.array() < 0.0).any() ||
        (pmf.probs.rowwise().sum() - probs[d].vector()).cwiseAbs().maxCoeff() > kMarginalTolerance ||
        (pmf.probs.colwise().sum().transpose() - probs[d].vector()).cwiseAbs().maxCoeff() > kMarginalTolerance) {
      throw InconsistentDistributionError("pmf marginals do not match softmax(logits) in dimension " +
                                          std::to_string(d));
    }
    ratios.push_back(ratios_from_pmf(probs[d], pmf));
  }
  return exact_carts_moments(f, pmfs, ratios);
}

inline ExactMoments exact_carms_expectation(const TabulatedObjective& f, const Matrix& logits,
                                            const std::vector<BivariatePmf>& pmfs) {
  return exact_carms_expectation(f, detail::probs_from_logits(logits), pmfs);
}

/// Exact moments of two-sample LOORF under independent samples.
inline ExactMoments exact_loorf2_moments(const TabulatedObjective& f, const std::vector<ProbVector>& probs) {
  detail::check_objective(f, probs);
  std::vector<BivariatePmf> pmfs;
  std::vector<RatioMatrix> ratios;
  for (const auto& p : probs) {
    pmfs.push_back(BivariatePmf::independent(p));
    ratios.push_back(RatioMatrix::ones(p.size()));
  }
  return exact_carts_moments(f, pmfs, ratios);
}

/// Explicit average of CARTS over ordered pairs n != m.
inline Vector carms_pairwise(const Vector& f, const SampleMatrix& z, const RatioMatrix& ratios) {
  const std::size_t n = z.rows();
  detail::require(n >= 2, "CARMS needs N >= 2");
  detail::check_function_values(f, n);
  Vector total = Vector::Zero(static_cast<Eigen::Index>(z.categories()));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      total += carts(f[static_cast<Eigen::Index>(a)], f[static_cast<Eigen::Index>(b)], z.category(a), z.category(b),
                     ratios);
    }
  }
  return total / static_cast<double>(n * (n - 1));
}

/// Mean of two-sample LOORF over the N(N-1)/2 unordered pairs.
inline Vector loorf_pairwise(const Vector& f, const SampleMatrix& z) {
  const std::size_t n = z.rows();
  detail::require(n >= 2, "LOORF needs N >= 2");
  detail::check_function_values(f, n);
  const RatioMatrix ones = RatioMatrix::ones(z.categories());
  Vector total = Vector::Zero(static_cast<Eigen::Index>(z.categories()));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      total += carts(f[static_cast<Eigen::Index>(a)], f[static_cast<Eigen::Index>(b)], z.category(a), z.category(b),
                     ones);
    }
  }
  return total / static_cast<double>(n * (n - 1) / 2);
}

/// Monte Carlo mean, per-coordinate variance and standard error of the mean.
struct MonteCarloMoments {
  Matrix mean;
  Matrix variance;
  Matrix std_error;
  std::size_t trials = 0;
  std::size_t clipped_trials = 0;

  double clip_fraction() const { return trials ? static_cast<double>(clipped_trials) / static_cast<double>(trials) : 0.0; }
};

/// Welford accumulator over D x C gradient draws.
class MomentAccumulator {
 public:
  void add(const Matrix& x) {
    if (count_ == 0) {
      mean_ = Matrix::Zero(x.rows(), x.cols());
      m2_ = Matrix::Zero(x.rows(), x.cols());
    }
    ++count_;
    const Matrix delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta.cwiseProduct(x - mean_);
  }

  std::size_t count() const { return count_; }
  const Matrix& mean() const { return mean_; }
  Matrix variance() const { return count_ > 1 ? Matrix(m2_ / static_cast<double>(count_ - 1)) : Matrix::Zero(mean_.rows(), mean_.cols()); }

 private:
  std::size_t count_ = 0;
  Matrix mean_;
  Matrix m2_;
};

inline MonteCarloMoments mc_estimator_moments(const EstimatorConfig& config, const Objective& f,
                                              const std::vector<ProbVector>& probs, std::size_t trials, Rng& rng) {
  detail::require(trials >= 1000, "Monte Carlo moments need at least 1000 trials");
  const GradientSampler sampler(config, probs);
  MomentAccumulator acc;
  std::size_t clipped = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const auto draw = sampler.draw(f, rng);
    acc.add(draw.grad);
    if (draw.clip_engaged) ++clipped;
  }
  MonteCarloMoments out;
  out.mean = acc.mean();
  out.variance = acc.variance();
  out.std_error = (out.variance / static_cast<double>(trials)).cwiseSqrt();
  out.trials = trials;
  out.clipped_trials = clipped;
  return out;
}

}  // namespace carms

#endif  // CARMS_ORACLE_HPP_
