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

#include "carms/oracle.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <vector>

#include "carms/experiments.hpp"
#include "carms/selfcheck.hpp"
#include "support/oracles.hpp"

namespace carms {
namespace {

using Nested = std::vector<std::vector<double>>;

TabulatedObjective random_objective(std::size_t c, std::size_t d, Rng& rng) {
  return TabulatedObjective::from_function(c, d, [&rng](std::span<const std::size_t>) {
    return std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
  });
}

// E[f] under independent softmax dimensions, enumerated with a local index
// decoding (a_d = (idx / C^d) mod C).
double expected_objective(const TabulatedObjective& f, const Nested& logits) {
  const std::size_t c = f.categories();
  std::vector<std::vector<double>> probs;
  for (const auto& row : logits) probs.push_back(testing::softmax(row));
  double total = 0.0;
  for (std::size_t idx = 0; idx < f.assignments(); ++idx) {
    double w = 1.0;
    std::size_t rest = idx;
    for (std::size_t d = 0; d < f.dims(); ++d) {
      w *= probs[d][rest % c];
      rest /= c;
    }
    total += w * f.at(idx);
  }
  return total;
}

Nested random_logits(std::size_t c, std::size_t d, Rng& rng) {
  Nested out(d, std::vector<double>(c));
  for (auto& row : out) {
    for (auto& x : row) x = std::normal_distribution<double>(0.0, 1.0)(rng);
  }
  return out;
}

Matrix to_matrix(const Nested& x) {
  Matrix m(static_cast<Eigen::Index>(x.size()), static_cast<Eigen::Index>(x.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = x[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

std::vector<ProbVector> probs_of(const Nested& logits) {
  std::vector<ProbVector> out;
  for (const auto& row : logits) {
    const auto p = testing::softmax(row);
    out.push_back(ProbVector::normalized(Eigen::Map<const Vector>(p.data(), static_cast<Eigen::Index>(p.size()))));
  }
  return out;
}

// pp^T + eps * S with S symmetric and zero row sums, eps keeping every entry
// nonnegative.
BivariatePmf perturbed_pmf(const ProbVector& p, Rng& rng) {
  const auto c = static_cast<Eigen::Index>(p.size());
  Matrix a(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = std::normal_distribution<double>()(rng);
  }
  const Matrix h = Matrix::Identity(c, c) - Matrix::Constant(c, c, 1.0 / static_cast<double>(c));
  const Matrix s = h * a * h;
  const Matrix base = p.vector() * p.vector().transpose();
  double eps = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      if (s(i, j) < 0.0) eps = std::min(eps, base(i, j) / -s(i, j));
    }
  }
  eps *= std::uniform_real_distribution<double>(0.1, 1.0)(rng);
  return BivariatePmf{(base + eps * s).cwiseMax(0.0)};
}

// pp^T plus nonnegative symmetric off-diagonal mass taken from the diagonal.
BivariatePmf dominating_pmf(const ProbVector& p, Rng& rng) {
  const auto c = static_cast<Eigen::Index>(p.size());
  Matrix s = Matrix::Zero(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) s(i, j) = s(j, i) = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  }
  s.diagonal() = -s.rowwise().sum();
  const Matrix base = p.vector() * p.vector().transpose();
  double eps = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < c; ++i) eps = std::min(eps, base(i, i) / -s(i, i));
  eps *= std::uniform_real_distribution<double>(0.1, 1.0)(rng);
  return BivariatePmf{base + eps * s};
}

TEST(TabulatedObjective, ToyValue) {
  const auto f = TabulatedObjective::toy(3, 2);
  const std::vector<std::size_t> a{1, 0};
  EXPECT_DOUBLE_EQ(f(a), 4.0);
  EXPECT_DOUBLE_EQ(TabulatedObjective::toy_value(a), 4.0);
}

TEST(TabulatedObjective, EnumerationBound) {
  EXPECT_THROW(TabulatedObjective::toy(10, 7), std::invalid_argument);
  EXPECT_NO_THROW(TabulatedObjective::toy(10, 6));
  const auto big = TabulatedObjective::toy(10, 4);
  const std::vector<ProbVector> probs(4, ProbVector::uniform(10));
  std::vector<BivariatePmf> pmfs(4, BivariatePmf::independent(ProbVector::uniform(10)));
  std::vector<RatioMatrix> ratios(4, RatioMatrix::ones(10));
  EXPECT_THROW(exact_carts_moments(big, pmfs, ratios), std::invalid_argument);
}

TEST(ExactGradient, DocumentedExamples) {
  const TabulatedObjective f(2, 1, {1.0, 0.0});
  const Matrix g = exact_gradient(f, Matrix::Zero(1, 2));
  EXPECT_NEAR(g(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(g(0, 1), -0.25, 1e-15);
  const TabulatedObjective constant(3, 2, std::vector<double>(9, 2.0));
  EXPECT_LE(exact_gradient(constant, Matrix::Random(2, 3)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ExactGradient, ToyObjectiveClosedForm) {
  const auto f = TabulatedObjective::toy(3, 2);
  const Matrix g = exact_gradient(f, Matrix::Zero(2, 3));
  // Row d: (d+1) p_c ((c+1) - sum_k p_k (k+1)), here with uniform p.
  for (Eigen::Index d = 0; d < 2; ++d) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      const double want = static_cast<double>(d + 1) * (1.0 / 3.0) * (static_cast<double>(c + 1) - 2.0);
      EXPECT_NEAR(g(d, c), want, 1e-14);
    }
  }
  const Nested zero(2, std::vector<double>(3, 0.0));
  const auto fd = testing::finite_difference_gradient([&f](const Nested& l) { return expected_objective(f, l); }, zero, 1e-5);
  EXPECT_LE((to_matrix(fd) - g).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ExactGradient, AgreesWithFiniteDifferences) {
  Rng rng = make_stream(60);
  for (int t = 0; t < 50; ++t) {
    const std::size_t c = 2 + t % 4;
    const std::size_t d = 1 + t % 3;
    const auto f = random_objective(c, d, rng);
    const Nested logits = random_logits(c, d, rng);
    const auto fd =
        testing::finite_difference_gradient([&f](const Nested& l) { return expected_objective(f, l); }, logits, 1e-5);
    EXPECT_LE((to_matrix(fd) - exact_gradient(f, to_matrix(logits))).cwiseAbs().maxCoeff(), 1e-6) << "instance " << t;
    EXPECT_NEAR(exact_objective(f, probs_of(logits)), expected_objective(f, logits), 1e-12);
  }
}

TEST(ExactCarmsExpectation, IndependentPmfIsUnbiased) {
  Rng rng = make_stream(61);
  for (int t = 0; t < 50; ++t) {
    const std::size_t c = 2 + t % 4;
    const std::size_t d = 1 + t % 2;
    const auto f = random_objective(c, d, rng);
    const Nested logits = random_logits(c, d, rng);
    const auto probs = probs_of(logits);
    std::vector<BivariatePmf> pmfs;
    for (const auto& p : probs) pmfs.push_back(BivariatePmf::independent(p));
    const ExactMoments m = exact_carms_expectation(f, to_matrix(logits), pmfs);
    EXPECT_LE((m.mean - exact_gradient(f, to_matrix(logits))).cwiseAbs().maxCoeff(), 1e-10);
    const ExactMoments l = exact_loorf2_moments(f, probs);
    EXPECT_LE((m.variance - l.variance).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ExactCarmsExpectation, UnbiasedForAnyConsistentSymmetricPmf) {
  Rng rng = make_stream(62);
  for (int t = 0; t < 100; ++t) {
    const std::size_t c = 2 + t % 4;
    const std::size_t d = 1 + t % 2;
    const auto f = random_objective(c, d, rng);
    const Nested logits = random_logits(c, d, rng);
    const auto probs = probs_of(logits);
    std::vector<BivariatePmf> pmfs;
    for (const auto& p : probs) pmfs.push_back(perturbed_pmf(p, rng));
    const ExactMoments m = exact_carms_expectation(f, to_matrix(logits), pmfs);
    EXPECT_LE((m.mean - exact_gradient(f, to_matrix(logits))).cwiseAbs().maxCoeff(), 1e-10) << "instance " << t;
    EXPECT_TRUE((m.variance.array() >= 0.0).all());
  }
}

TEST(ExactCarmsExpectation, RejectsInconsistentMarginals) {
  const auto f = TabulatedObjective::toy(3, 1);
  const std::vector<ProbVector> probs{ProbVector{0.6, 0.3, 0.1}};
  BivariatePmf bad = BivariatePmf::independent(ProbVector{0.5, 0.3, 0.2});
  EXPECT_THROW(exact_carms_expectation(f, probs, {bad}), InconsistentDistributionError);
}

TEST(ExactCarmsExpectation, ConstantObjective) {
  const TabulatedObjective f(3, 2, std::vector<double>(9, -1.5));
  const std::vector<ProbVector> probs{ProbVector{0.6, 0.3, 0.1}, ProbVector::uniform(3)};
  const ExactMoments m = exact_carms_expectation(
      f, probs, {worked_example_antithetic_pmf(), bivariate_pmf_averaged(probs[1], all_anchored_orderings(3), 3)});
  EXPECT_EQ(m.mean, Matrix::Zero(2, 3));
  EXPECT_EQ(m.variance, Matrix::Zero(2, 3));
}

TEST(WorkedExample, TableMatchesMarginals) {
  const BivariatePmf pmf = worked_example_antithetic_pmf();
  const Vector p = ProbVector{0.6, 0.3, 0.1}.vector();
  EXPECT_LE((pmf.probs.rowwise().sum() - p).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_NEAR(pmf.probs.sum(), 1.0, 1e-15);
  const Matrix indep = p * p.transpose();
  for (Eigen::Index i = 0; i < 3; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) {
      if (i != j) {
        EXPECT_GE(pmf.probs(i, j), indep(i, j));
      }
    }
  }
}

TEST(WorkedExample, VarianceOrderingAndUnbiasedness) {
  const ProbVector p{0.6, 0.3, 0.1};
  const auto f = TabulatedObjective::toy(3, 1);
  const std::vector<ProbVector> probs{p};
  const ExactMoments anti = exact_carms_expectation(f, probs, {worked_example_antithetic_pmf()});
  const ExactMoments indep = exact_loorf2_moments(f, probs);
  const Matrix g = exact_gradient(f, probs);
  EXPECT_LE((anti.mean - g).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((indep.mean - g).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_TRUE((anti.variance.array() <= indep.variance.array()).all());
  EXPECT_TRUE((anti.variance.array() < indep.variance.array()).any());

  // Second moments by hand: sum over ordered off-diagonal pairs of
  // P(i,j) (0.5 (f_i - f_j) R_ij)^2 on coordinates i and j.
  const Matrix table = worked_example_antithetic_pmf().probs;
  const double fv[] = {1.0, 2.0, 3.0};
  std::vector<double> second(3, 0.0);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const double r = p[static_cast<std::size_t>(i)] * p[static_cast<std::size_t>(j)] / table(i, j);
      const double v = 0.5 * (fv[i] - fv[j]) * r;
      second[static_cast<std::size_t>(i)] += table(i, j) * v * v;
      second[static_cast<std::size_t>(j)] += table(i, j) * v * v;
    }
  }
  for (Eigen::Index k = 0; k < 3; ++k) {
    EXPECT_NEAR(anti.variance(0, k) + g(0, k) * g(0, k), second[static_cast<std::size_t>(k)], 1e-14);
  }
}

TEST(WorkedExample, VerbatimDiagonalDoesNotChangeMoments) {
  const ProbVector p{0.6, 0.3, 0.1};
  const auto f = TabulatedObjective::toy(3, 1);
  BivariatePmf verbatim = worked_example_antithetic_pmf();
  verbatim.probs(2, 2) = 0.01;
  EXPECT_THROW(exact_carms_expectation(f, {p}, {verbatim}), InconsistentDistributionError);
  const BivariatePmf fixed = worked_example_antithetic_pmf();
  const ExactMoments a = exact_carts_moments(f, {verbatim}, {ratios_from_pmf(p, verbatim)});
  const ExactMoments b = exact_carts_moments(f, {fixed}, {ratios_from_pmf(p, fixed)});
  EXPECT_LE((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((a.variance - b.variance).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(VarianceOrdering, DominatingPmfsNeverIncreaseVariance) {
  Rng rng = make_stream(63);
  for (int t = 0; t < 100; ++t) {
    const std::size_t c = 2 + t % 4;
    const auto f = random_objective(c, 1, rng);
    const Nested logits = random_logits(c, 1, rng);
    const auto probs = probs_of(logits);
    const BivariatePmf pmf = dominating_pmf(probs[0], rng);
    const ExactMoments anti = exact_carms_expectation(f, probs, {pmf});
    const ExactMoments indep = exact_loorf2_moments(f, probs);
    EXPECT_TRUE((anti.variance.array() <= indep.variance.array() + 1e-12).all()) << "instance " << t;
    EXPECT_TRUE((anti.variance.array() < indep.variance.array()).any()) << "instance " << t;
  }
}

TEST(Unbiasedness, AnalyticInverseCdfPmfByEnumeration) {
  Rng rng = make_stream(64);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t c = 2 + t % 4;
    const std::size_t d = 1 + t % 2;
    const std::size_t n = std::array<std::size_t, 3>{2, 3, 5}[static_cast<std::size_t>(t) % 3];
    const auto f = random_objective(c, d, rng);
    const Nested logits = random_logits(c, d, rng);
    const auto probs = probs_of(logits);
    std::vector<BivariatePmf> pmfs;
    for (const auto& p : probs) pmfs.push_back(bivariate_pmf_averaged(p, all_anchored_orderings(c), n));
    const ExactMoments m = exact_carms_expectation(f, to_matrix(logits), pmfs);
    worst = std::max(worst, (m.mean - exact_gradient(f, to_matrix(logits))).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(MonteCarlo, RejectsTooFewTrials) {
  Rng rng = make_stream(65);
  const auto f = TabulatedObjective::toy(3, 1);
  EXPECT_THROW(mc_estimator_moments({}, f.as_objective(), {ProbVector::uniform(3)}, 999, rng), std::invalid_argument);
}

TEST(MonteCarlo, ConstantObjectiveGivesZeroMoments) {
  Rng rng = make_stream(66);
  const Objective f = [](std::span<const std::size_t>) { return 3.0; };
  const auto m = mc_estimator_moments({}, f, {ProbVector{0.2, 0.8}}, 1000, rng);
  EXPECT_LE(m.mean.cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(m.variance.cwiseAbs().maxCoeff(), 1e-28);
}

class MonteCarloUnbiased : public ::testing::TestWithParam<Method> {};

TEST_P(MonteCarloUnbiased, MeanWithinFourStandardErrors) {
  constexpr std::size_t kTrials = 100'000;
  const std::vector<ProbVector> probs{ProbVector{0.5, 0.3, 0.2}, ProbVector{0.25, 0.35, 0.4}};
  const auto f = TabulatedObjective::toy(3, 2);
  EstimatorConfig config;
  config.method = GetParam();
  config.n_samples = 3;
  config.clip = std::nullopt;
  Rng rng = make_stream(67, {static_cast<std::uint64_t>(config.method)});
  const auto m = mc_estimator_moments(config, f.as_objective(), probs, kTrials, rng);
  const Matrix g = exact_gradient(f, probs);
  for (Eigen::Index d = 0; d < 2; ++d) {
    for (Eigen::Index c = 0; c < 3; ++c) {
      EXPECT_LE(std::abs(m.mean(d, c) - g(d, c)), 4.0 * m.std_error(d, c))
          << method_name(config.method) << " at " << d << "," << c;
    }
  }
  EXPECT_EQ(m.clipped_trials, 0u);
}

INSTANTIATE_TEST_SUITE_P(Methods, MonteCarloUnbiased,
                         ::testing::Values(Method::kLoorf, Method::kCarmsInverseCdf, Method::kReinforce));

TEST(MonteCarlo, FullSetUnbiasedAboveTabulationLimit) {
  constexpr std::size_t kTrials = 100'000;
  constexpr std::size_t c = kEagerPmfCategories + 1;
  Rng prng = make_stream(70);
  const std::vector<ProbVector> probs{sample_dirichlet_probs(c, 5.0, prng)};
  const auto f = TabulatedObjective::toy(c, 1);
  EstimatorConfig config;
  config.n_samples = 3;
  config.clip = std::nullopt;
  Rng rng = make_stream(71);
  const auto m = mc_estimator_moments(config, f.as_objective(), probs, kTrials, rng);
  const Matrix g = exact_gradient(f, probs);
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(c); ++k) {
    EXPECT_LE(std::abs(m.mean(0, k) - g(0, k)), 4.0 * m.std_error(0, k)) << "category " << k;
  }
}

// Exact expectation of the subset mode: average over every k-subset S of the
// sum over pairs with positive S-averaged probability.
Matrix subset_mode_expectation(const TabulatedObjective& f, const ProbVector& p, std::size_t n, std::size_t k) {
  const auto all = all_anchored_orderings(p.size());
  const auto c = static_cast<Eigen::Index>(p.size());
  std::vector<bool> mask(all.size(), false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
  Matrix total = Matrix::Zero(1, c);
  std::size_t subsets = 0;
  do {
    std::vector<Ordering> chosen;
    for (std::size_t a = 0; a < all.size(); ++a) {
      if (mask[a]) chosen.push_back(all[a]);
    }
    const BivariatePmf pmf = bivariate_pmf_averaged(p, chosen, n);
    for (Eigen::Index i = 0; i < c; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) {
        if (i == j || !(pmf.probs(i, j) > 0.0)) continue;
        const std::size_t ai[] = {static_cast<std::size_t>(i)};
        const std::size_t aj[] = {static_cast<std::size_t>(j)};
        const double v = 0.5 * (f(ai) - f(aj)) * p[ai[0]] * p[aj[0]];
        total(0, i) += v;
        total(0, j) -= v;
      }
    }
    ++subsets;
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return total / static_cast<double>(subsets);
}

TEST(MonteCarlo, SubsetModeMatchesItsExactBiasedExpectation) {
  constexpr std::size_t kTrials = 100'000;
  const ProbVector p{0.1, 0.2, 0.3, 0.4};
  const auto f = TabulatedObjective::toy(4, 1);
  EstimatorConfig config;
  config.n_samples = 2;
  config.clip = std::nullopt;
  config.ordering_budget = 2;
  Rng rng = make_stream(68);
  const auto m = mc_estimator_moments(config, f.as_objective(), {p}, kTrials, rng);
  const Matrix want = subset_mode_expectation(f, p, 2, 2);
  const Matrix g = exact_gradient(f, {p});
  for (Eigen::Index c = 0; c < 4; ++c) EXPECT_LE(std::abs(m.mean(0, c) - want(0, c)), 4.0 * m.std_error(0, c));
  const double bias = (want - g).cwiseAbs().maxCoeff();
  std::cout << "[finding] subset mode (C=4, N=2, 2 of 6 orderings) max |bias| = " << bias << '\n';
  EXPECT_GT(bias, 10.0 * m.std_error.maxCoeff());
}

// With empirical P(i, j) = n_i n_j / (N (N - 1)) the counts cancel against
// the ratio: every draw returns sum_{i<j present} (f_i - f_j)(e_i - e_j) p_i p_j.
// A draw in which every category appears therefore equals the exact gradient.
Vector present_pair_sum(const Vector& f, const ProbVector& p, const SampleMatrix& z) {
  const std::size_t c = p.size();
  std::vector<bool> present(c, false);
  for (std::size_t r = 0; r < z.rows(); ++r) present[z.category(r)] = true;
  Vector g = Vector::Zero(static_cast<Eigen::Index>(c));
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = i + 1; j < c; ++j) {
      if (!present[i] || !present[j]) continue;
      const double v = (f[static_cast<Eigen::Index>(i)] - f[static_cast<Eigen::Index>(j)]) * p[i] * p[j];
      g[static_cast<Eigen::Index>(i)] += v;
      g[static_cast<Eigen::Index>(j)] -= v;
    }
  }
  return g;
}

TEST(GumbelPath, DrawEqualsPresentPairSum) {
  Rng prng = make_stream(72);
  std::size_t complete = 0;
  std::size_t partial = 0;
  for (int t = 0; t < 30; ++t) {
    const std::size_t c = 2 + static_cast<std::size_t>(t) % 4;
    const std::size_t n = 2 + static_cast<std::size_t>(t) % 7;
    const ProbVector p = sample_dirichlet_probs(c, 5.0, prng);
    const Vector fc = Vector::Random(static_cast<Eigen::Index>(c)) * 5.0;
    const GumbelSampler sampler(p, n, CopulaKind::dirichlet(), std::nullopt);
    Vector grad_exact = Vector::Zero(static_cast<Eigen::Index>(c));
    const double mean_f = fc.dot(p.vector());
    for (std::size_t k = 0; k < c; ++k) {
      grad_exact[static_cast<Eigen::Index>(k)] = p[k] * (fc[static_cast<Eigen::Index>(k)] - mean_f);
    }
    Rng rng = make_stream(73, {static_cast<std::uint64_t>(t)});
    for (int k = 0; k < 200; ++k) {
      const auto s = sampler.draw(rng);
      Vector f(static_cast<Eigen::Index>(n));
      std::vector<bool> seen(c, false);
      for (std::size_t r = 0; r < n; ++r) {
        f[static_cast<Eigen::Index>(r)] = fc[static_cast<Eigen::Index>(s.samples.category(r))];
        seen[s.samples.category(r)] = true;
      }
      const Vector got = carms(f, s.samples, s.ratios, p);
      EXPECT_LE((got - present_pair_sum(fc, p, s.samples)).cwiseAbs().maxCoeff(), 1e-12);
      if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
        ++complete;
        EXPECT_LE((got - grad_exact).cwiseAbs().maxCoeff(), 1e-12);
      } else {
        ++partial;
      }
    }
  }
  EXPECT_GT(complete, 0u);
  EXPECT_GT(partial, 0u);
}

TEST(GumbelPath, BiasedWhenCategoriesCanBeAbsent) {
  constexpr std::size_t kTrials = 200'000;
  const std::vector<ProbVector> probs{ProbVector{0.32, 0.33, 0.35}};
  const auto f = TabulatedObjective::toy(3, 1);
  EstimatorConfig config;
  config.method = Method::kCarmsGumbel;
  config.n_samples = 4;
  config.clip = std::nullopt;
  Rng rng = make_stream(74);
  const auto m = mc_estimator_moments(config, f.as_objective(), probs, kTrials, rng);
  const Matrix bias = m.mean - exact_gradient(f, probs);
  std::cout << "[finding] Gumbel path C=3 N=4 near-uniform: bias " << bias << ", SE " << m.std_error << '\n';
  EXPECT_GT((bias.array().abs() / m.std_error.array()).maxCoeff(), 10.0);
}

TEST(MomentAccumulator, MatchesTwoPassFormulas) {
  std::vector<Matrix> xs;
  MomentAccumulator acc;
  for (int t = 0; t < 500; ++t) {
    xs.push_back(Matrix::Random(2, 3) * 5.0 + Matrix::Constant(2, 3, 100.0));
    acc.add(xs.back());
  }
  Matrix mean = Matrix::Zero(2, 3);
  for (const auto& x : xs) mean += x;
  mean /= 500.0;
  Matrix var = Matrix::Zero(2, 3);
  for (const auto& x : xs) var += (x - mean).cwiseAbs2();
  var /= 499.0;
  EXPECT_LE((acc.mean() - mean).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LE((acc.variance() - var).cwiseAbs().maxCoeff(), 1e-10);
}

}  // namespace
}  // namespace carms
