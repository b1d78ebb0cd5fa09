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

// Desk-scale experiments: gradient variance on the toy objective across
// Dirichlet-drawn probabilities, and the cross-correlation matrix of an
// antithetic pair.
//
// Randomness is derived per (alpha, trial) from the master seed, so every
// method sees the same probabilities and the same trial stream, and the
// records do not depend on execution order.

#ifndef CARMS_EXPERIMENTS_HPP_
#define CARMS_EXPERIMENTS_HPP_

#include "carms/oracle.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace carms {

enum class OutputFormat { kCsv, kJsonLines };

/// Configuration of the toy variance study.
struct ExperimentConfig {
  std::vector<Method> methods{Method::kCarmsInverseCdf, Method::kCarmsGumbel, Method::kLoorf};
  CopulaKind copula = CopulaKind::dirichlet();
  std::size_t categories = 3;
  std::size_t dims = 3;
  std::size_t samples = 3;
  std::vector<double> alphas{1.0, 10.0, 100.0, 1000.0};
  std::size_t trials = 100;
  /// Gradient draws per trial used to estimate the variance.
  std::size_t inner = 10'000;
  std::uint64_t seed = 0;
  std::optional<double> clip = kDefaultClip;
  std::size_t ordering_budget = kAutoOrderings;

  void validate() const {
    detail::require(!methods.empty(), "at least one method is required");
    detail::require(categories >= 2, "categories must be >= 2");
    detail::require(dims >= 1, "dims must be >= 1");
    detail::require(samples >= 2, "samples must be >= 2");
    detail::require(trials >= 1, "trials must be >= 1");
    detail::require(inner >= 2, "inner loop needs at least 2 draws");
    detail::require(!alphas.empty(), "at least one alpha is required");
    for (double a : alphas) detail::require(std::isfinite(a) && a > 0.0, "alpha must be > 0");
    detail::require(!clip || *clip > 0.0, "clip ceiling must be positive");
    if (copula.family == CopulaKind::Family::kGaussian) {
      for (auto m : methods) {
        detail::require(m != Method::kCarmsInverseCdf, "carms-i requires the Dirichlet copula");
      }
      const double rho = copula.gaussian_rho(samples);
      detail::require(rho >= -1.0 / static_cast<double>(samples - 1) - 1e-15 && rho <= 0.0,
                      "Gaussian rho outside [-1/(N-1), 0]");
    }
  }
};

inline std::string clip_label(const std::optional<double>& clip) {
  return clip ? fmt::format("{:.17g}", *clip) : std::string("none");
}

/// Copula echo for records; the Gaussian label carries the effective rho.
inline std::string copula_label(const CopulaKind& copula, std::size_t samples) {
  if (copula.is_dirichlet()) return copula.name();
  return fmt::format("gaussian(rho={:.17g})", copula.gaussian_rho(samples));
}

inline std::string ordering_label(std::size_t budget) {
  if (budget == kAllOrderings) return "all";
  if (budget == kAutoOrderings) return "auto";
  return std::to_string(budget);
}

/// One (method, alpha, trial) result of the toy study.
struct ResultRecord {
  std::string method;
  std::string copula;
  std::size_t categories = 0;
  std::size_t dims = 0;
  std::size_t samples = 0;
  double alpha = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string clip;
  std::string orderings;
  std::size_t inner = 0;
  Matrix variance;  // D x C per-coordinate gradient variance
  double sum_variance = 0.0;
  double log_sum_variance = 0.0;
  double mean_variance = 0.0;
  double log_mean_variance = 0.0;
  double clip_fraction = 0.0;
  bool clip_engaged = false;
  /// Wall-clock seconds; never serialized (output files stay byte-identical).
  double seconds = 0.0;
};

/// Dirichlet(alpha 1_C) draw via normalized Gamma variates.
inline ProbVector sample_dirichlet_probs(std::size_t categories, double alpha, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Vector w(static_cast<Eigen::Index>(categories));
  for (;;) {
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = gamma(rng);
    if (w.sum() > 0.0) return ProbVector::normalized(w);
  }
}

namespace detail {

enum StreamTag : std::uint64_t { kProbsStream = 1, kTrialStream = 2, kCorrelationStream = 3, kSelfcheckStream = 4 };

}  // namespace detail

/// Per-dimension probabilities shared by all methods at (alpha_index, trial).
inline std::vector<ProbVector> toy_probabilities(const ExperimentConfig& config, std::size_t alpha_index,
                                                 std::size_t trial) {
  Rng rng = make_stream(config.seed, {detail::kProbsStream, alpha_index, trial});
  std::vector<ProbVector> probs;
  probs.reserve(config.dims);
  for (std::size_t d = 0; d < config.dims; ++d) {
    probs.push_back(sample_dirichlet_probs(config.categories, config.alphas[alpha_index], rng));
  }
  return probs;
}

/// Variance record for one method on one trial.
inline ResultRecord toy_trial(const ExperimentConfig& config, Method method, std::size_t alpha_index,
                              std::size_t trial, const std::vector<ProbVector>& probs) {
  const auto objective = TabulatedObjective::toy(config.categories, config.dims);
  EstimatorConfig est{method, config.copula, config.samples, config.clip, config.ordering_budget};
  const GradientSampler sampler(est, probs);
  const Objective f = objective.as_objective();
  Rng rng = make_stream(config.seed, {detail::kTrialStream, alpha_index, trial});
  const auto start = std::chrono::steady_clock::now();
  MomentAccumulator acc;
  std::size_t clipped = 0;
  for (std::size_t k = 0; k < config.inner; ++k) {
    const auto draw = sampler.draw(f, rng);
    acc.add(draw.grad);
    if (draw.clip_engaged) ++clipped;
  }
  ResultRecord r;
  r.method = method_name(method);
  r.copula = copula_label(config.copula, config.samples);
  r.categories = config.categories;
  r.dims = config.dims;
  r.samples = config.samples;
  r.alpha = config.alphas[alpha_index];
  r.trial = trial;
  r.seed = config.seed;
  r.clip = clip_label(config.clip);
  r.orderings = ordering_label(config.ordering_budget);
  r.inner = config.inner;
  r.variance = acc.variance();
  r.sum_variance = r.variance.sum();
  r.mean_variance = r.sum_variance / static_cast<double>(r.variance.size());
  r.log_sum_variance = std::log(r.sum_variance);
  r.log_mean_variance = std::log(r.mean_variance);
  r.clip_fraction = static_cast<double>(clipped) / static_cast<double>(config.inner);
  r.clip_engaged = clipped > 0;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// Runs every (alpha, trial, method) in that order and hands each record to
/// `sink` as soon as it is ready.
template <typename Sink>
void run_toy(const ExperimentConfig& config, Sink&& sink) {
  config.validate();
  for (std::size_t a = 0; a < config.alphas.size(); ++a) {
    for (std::size_t t = 0; t < config.trials; ++t) {
      const auto probs = toy_probabilities(config, a, t);
      for (auto method : config.methods) sink(toy_trial(config, method, a, t, probs));
    }
  }
}

inline std::vector<ResultRecord> run_toy(const ExperimentConfig& config) {
  std::vector<ResultRecord> out;
  run_toy(config, [&out](ResultRecord r) { out.push_back(std::move(r)); });
  return out;
}

/// Configuration of the pair correlation study.
struct CorrelationConfig {
  Method method = Method::kCarmsInverseCdf;
  CopulaKind copula = CopulaKind::dirichlet();
  std::size_t categories = 3;
  std::size_t samples = 2;
  std::size_t draws = 1000;
  std::uint64_t seed = 0;
  std::optional<double> clip = kDefaultClip;
  std::size_t ordering_budget = kAutoOrderings;
  /// Marginal probabilities; uniform when empty.
  std::optional<ProbVector> probs;

  void validate() const {
    detail::require(categories >= 2, "categories must be >= 2");
    detail::require(samples >= 2, "samples must be >= 2");
    detail::require(draws >= 100, "correlation needs at least 100 draws");
    detail::require(!probs || probs->size() == categories, "probability vector size mismatch");
    if (method == Method::kCarmsInverseCdf) {
      detail::require(copula.is_dirichlet(), "carms-i requires the Dirichlet copula");
    }
  }
};

struct CorrelationRecord {
  std::string method;
  std::string copula;
  std::size_t categories = 0;
  std::size_t samples = 0;
  std::size_t draws = 0;
  std::uint64_t seed = 0;
  /// corr(z_i, z'_j) between the first two samples of each draw; NaN marks a
  /// degenerate (constant) coordinate.
  Matrix corr;
};

inline CorrelationRecord run_correlation(const CorrelationConfig& config) {
  config.validate();
  const ProbVector p = config.probs.value_or(ProbVector::uniform(config.categories));
  const auto c = static_cast<Eigen::Index>(config.categories);
  Vector first = Vector::Zero(c);
  Vector second = Vector::Zero(c);
  Matrix joint = Matrix::Zero(c, c);
  Rng rng = make_stream(config.seed, {detail::kCorrelationStream});

  // Build the sampler once; the inverse-CDF pmf cache is per (p, N).
  std::optional<InverseCdfSampler> icdf;
  std::optional<GumbelSampler> gumbel;
  std::optional<IndependentSampler> indep;
  switch (config.method) {
    case Method::kCarmsInverseCdf:
      icdf.emplace(p, config.samples, config.copula, InverseCdfOptions{config.ordering_budget, config.clip});
      break;
    case Method::kCarmsGumbel:
      gumbel.emplace(p, config.samples, config.copula, config.clip);
      break;
    default:
      indep.emplace(p, config.samples);
      break;
  }
  for (std::size_t k = 0; k < config.draws; ++k) {
    const SampleMatrix z = icdf ? icdf->draw(rng).samples : gumbel ? gumbel->draw(rng).samples : indep->draw(rng).samples;
    const auto i = static_cast<Eigen::Index>(z.category(0));
    const auto j = static_cast<Eigen::Index>(z.category(1));
    first[i] += 1.0;
    second[j] += 1.0;
    joint(i, j) += 1.0;
  }
  const double n = static_cast<double>(config.draws);
  first /= n;
  second /= n;
  joint /= n;

  CorrelationRecord r;
  r.method = method_name(config.method);
  r.copula = copula_label(config.copula, config.samples);
  r.categories = config.categories;
  r.samples = config.samples;
  r.draws = config.draws;
  r.seed = config.seed;
  r.corr = Matrix(c, c);
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      const double vi = first[i] * (1.0 - first[i]);
      const double vj = second[j] * (1.0 - second[j]);
      r.corr(i, j) = (vi > 0.0 && vj > 0.0) ? (joint(i, j) - first[i] * second[j]) / std::sqrt(vi * vj)
                                              : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return r;
}

// Serialization. CSV: fixed header, one record per row, floats with 17
// significant digits, NA for missing values. JSON-lines: one object per line,
// null for missing or non-finite numbers.

inline std::string format_double(double x) {
  if (!std::isfinite(x)) return "NA";
  return fmt::format("{:.17g}", x);
}

inline nlohmann::json json_number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

inline std::string toy_csv_header(std::size_t dims, std::size_t categories) {
  std::string h =
      "method,copula,categories,dims,samples,alpha,trial,seed,clip,orderings,inner,"
      "clip_fraction,clip_engaged,sum_variance,log_sum_variance,mean_variance,log_mean_variance";
  for (std::size_t d = 0; d < dims; ++d) {
    for (std::size_t c = 0; c < categories; ++c) h += fmt::format(",var_{}_{}", d + 1, c + 1);
  }
  return h;
}

inline std::string toy_csv_row(const ResultRecord& r) {
  std::string row = fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.method, r.copula, r.categories,
                                r.dims, r.samples, format_double(r.alpha), r.trial, r.seed, r.clip, r.orderings,
                                r.inner, format_double(r.clip_fraction), r.clip_engaged ? 1 : 0,
                                format_double(r.sum_variance), format_double(r.log_sum_variance),
                                format_double(r.mean_variance), format_double(r.log_mean_variance));
  for (Eigen::Index d = 0; d < r.variance.rows(); ++d) {
    for (Eigen::Index c = 0; c < r.variance.cols(); ++c) row += "," + format_double(r.variance(d, c));
  }
  return row;
}

inline nlohmann::json matrix_json(const Matrix& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(json_number(m(i, j)));
    out.push_back(std::move(row));
  }
  return out;
}

inline nlohmann::json toy_json(const ResultRecord& r) {
  return nlohmann::json{{"record", "toy"},
                        {"method", r.method},
                        {"copula", r.copula},
                        {"categories", r.categories},
                        {"dims", r.dims},
                        {"samples", r.samples},
                        {"alpha", r.alpha},
                        {"trial", r.trial},
                        {"seed", r.seed},
                        {"clip", r.clip},
                        {"orderings", r.orderings},
                        {"inner", r.inner},
                        {"clip_fraction", r.clip_fraction},
                        {"clip_engaged", r.clip_engaged},
                        {"sum_variance", json_number(r.sum_variance)},
                        {"log_sum_variance", json_number(r.log_sum_variance)},
                        {"mean_variance", json_number(r.mean_variance)},
                        {"log_mean_variance", json_number(r.log_mean_variance)},
                        {"variance", matrix_json(r.variance)}};
}

inline std::string correlation_csv_header() { return "method,copula,categories,samples,draws,seed,i,j,corr"; }

inline void write_correlation_csv(std::ostream& out, const CorrelationRecord& r) {
  out << correlation_csv_header() << '\n';
  for (Eigen::Index i = 0; i < r.corr.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.corr.cols(); ++j) {
      out << fmt::format("{},{},{},{},{},{},{},{},{}\n", r.method, r.copula, r.categories, r.samples, r.draws, r.seed,
                         i + 1, j + 1, format_double(r.corr(i, j)));
    }
  }
}

inline nlohmann::json correlation_json(const CorrelationRecord& r) {
  return nlohmann::json{{"record", "correlation"}, {"method", r.method},   {"copula", r.copula},
                        {"categories", r.categories}, {"samples", r.samples}, {"draws", r.draws},
                        {"seed", r.seed},             {"corr", matrix_json(r.corr)}};
}

}  // namespace carms

#endif  // CARMS_EXPERIMENTS_HPP_
