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

// Antithetic categorical samplers.
//
// Both samplers turn copula uniforms into N one-hot samples with marginal
// Cat(p) and return the importance ratios p_i p_j / P(z = e_i, z' = e_j)
// needed to debias the correlated draw:
//
//  * InverseCdfSampler: inverse-CDF cells over a randomly chosen category
//    ordering; the pair law is known analytically from the Dirichlet copula
//    CDF, averaged over the ordering set.
//  * GumbelSampler: Gumbel-max with copula-coupled Gumbels per category; the
//    pair law is estimated from the draw itself and ratios are clipped.
//
// Categories are 0-based throughout.

#ifndef CARMS_CATEGORICAL_SAMPLING_HPP_
#define CARMS_CATEGORICAL_SAMPLING_HPP_

#include "carms/copula.hpp"
#include "carms/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace carms {

/// Cells [left_k, right_k) of the categorical CDF; the last cell is closed at 1.
struct Boundaries {
  Vector left;
  Vector right;

  std::size_t size() const { return static_cast<std::size_t>(left.size()); }
};

inline Boundaries compute_boundaries(const ProbVector& p) {
  const auto c = static_cast<Eigen::Index>(p.size());
  Boundaries b{Vector(c), Vector(c)};
  double running = 0.0;
  for (Eigen::Index k = 0; k < c; ++k) {
    b.left[k] = running;
    running += p.vector()[k];
    b.right[k] = running;
  }
  b.right[c - 1] = 1.0;
  return b;
}

/// Index j with left_j <= u < right_j. Zero-width cells are never returned.
inline std::size_t categorize(double u, const Boundaries& b) {
  detail::require(u > 0.0 && u < 1.0, "categorize: u must lie in (0, 1)");
  const auto c = b.size();
  const double* begin = b.right.data();
  const double* end = begin + static_cast<std::ptrdiff_t>(c - 1);
  auto k = static_cast<std::size_t>(std::upper_bound(begin, end, u) - begin);
  // Roundoff can leave u past the last positive-width cell.
  while (k > 0 && b.right[static_cast<Eigen::Index>(k)] <= b.left[static_cast<Eigen::Index>(k)]) --k;
  return k;
}

/// Permutation of categories placing `first` at position 0 and `last` at
/// position C-1. position(k) is where category k sits in the reordered vector.
class Ordering {
 public:
  Ordering(std::vector<std::size_t> positions, std::size_t first, std::size_t last)
      : positions_(std::move(positions)), first_(first), last_(last) {
    const std::size_t c = positions_.size();
    detail::require(c >= 2, "Ordering needs at least 2 categories");
    std::vector<bool> seen(c, false);
    for (auto pos : positions_) {
      detail::require(pos < c && !seen[pos], "Ordering must be a bijection");
      seen[pos] = true;
    }
    categories_.resize(c);
    for (std::size_t k = 0; k < c; ++k) categories_[positions_[k]] = k;
  }

  static Ordering identity(std::size_t categories) {
    std::vector<std::size_t> pos(categories);
    std::iota(pos.begin(), pos.end(), std::size_t{0});
    return Ordering(std::move(pos), 0, categories - 1);
  }

  std::size_t size() const { return positions_.size(); }
  std::size_t position(std::size_t category) const { return positions_[category]; }
  std::size_t category_at(std::size_t position) const { return categories_[position]; }
  std::size_t first() const { return first_; }
  std::size_t last() const { return last_; }

  /// p reordered so that entry position(k) holds p_k.
  ProbVector apply(const ProbVector& p) const {
    detail::require(p.size() == size(), "Ordering size does not match the probability vector");
    Vector out(static_cast<Eigen::Index>(size()));
    for (std::size_t k = 0; k < size(); ++k) out[static_cast<Eigen::Index>(positions_[k])] = p[k];
    return ProbVector(std::move(out));
  }

  bool operator==(const Ordering& other) const { return positions_ == other.positions_; }

 private:
  std::vector<std::size_t> positions_;
  std::vector<std::size_t> categories_;
  std::size_t first_;
  std::size_t last_;
};

/// Rotates the categories so `first` leads, then swaps `last` into the final
/// position.
inline Ordering make_ordering(std::size_t first, std::size_t last, std::size_t categories) {
  detail::require(categories >= 2, "Ordering needs at least 2 categories");
  detail::require(first < categories && last < categories, "Ordering anchor out of range");
  detail::require(first != last, "Ordering anchors must differ");
  std::vector<std::size_t> pos(categories);
  for (std::size_t k = 0; k < categories; ++k) pos[k] = (k + categories - first) % categories;
  const std::size_t tail = (first + categories - 1) % categories;  // category rotated to C-1
  std::swap(pos[last], pos[tail]);
  return Ordering(std::move(pos), first, last);
}

/// The C(C-1)/2 orderings anchored at every unordered pair (k < l).
inline std::vector<Ordering> all_anchored_orderings(std::size_t categories) {
  std::vector<Ordering> out;
  out.reserve(categories * (categories - 1) / 2);
  for (std::size_t k = 0; k < categories; ++k) {
    for (std::size_t l = k + 1; l < categories; ++l) out.push_back(make_ordering(k, l, categories));
  }
  return out;
}

/// `count` distinct anchored orderings chosen uniformly at random.
inline std::vector<Ordering> random_anchored_orderings(std::size_t categories, std::size_t count, Rng& rng) {
  auto all = all_anchored_orderings(categories);
  count = std::min(count, all.size());
  detail::require(count >= 1, "ordering set must be nonempty");
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, all.size() - 1);
    std::swap(all[k], all[pick(rng)]);
  }
  all.erase(all.begin() + static_cast<std::ptrdiff_t>(count), all.end());
  return all;
}

/// Inclusion-exclusion results at or below this are cancellation noise and
/// are reported as zero.
inline constexpr double kPmfRoundoff = 32.0 * std::numeric_limits<double>::epsilon();

/// P(z = e_i, z' = e_j) when both samples come from inverse-CDF cells of
/// `ordering` applied to p and the uniforms are an n-dimensional Dirichlet
/// copula pair.
inline double bivariate_pmf_one_ordering(const ProbVector& p, const Ordering& ordering, std::size_t i,
                                         std::size_t j, std::size_t n) {
  const std::size_t c = p.size();
  detail::require(ordering.size() == c, "Ordering size does not match the probability vector");
  detail::require(i < c && j < c, "category out of range");
  const Boundaries b = compute_boundaries(ordering.apply(p));
  const auto a = static_cast<Eigen::Index>(ordering.position(i));
  const auto e = static_cast<Eigen::Index>(ordering.position(j));
  const double value = dirichlet_bivariate_cdf(b.right[a], b.right[e], n) -
                       dirichlet_bivariate_cdf(b.right[a], b.left[e], n) -
                       dirichlet_bivariate_cdf(b.left[a], b.right[e], n) +
                       dirichlet_bivariate_cdf(b.left[a], b.left[e], n);
  if (value <= kPmfRoundoff) return 0.0;
  return std::min(value, std::min(p[i], p[j]));
}

/// Full C x C pmf for one ordering.
inline BivariatePmf bivariate_pmf_one_ordering(const ProbVector& p, const Ordering& ordering, std::size_t n) {
  const auto c = static_cast<Eigen::Index>(p.size());
  BivariatePmf pmf{Matrix::Zero(c, c)};
  for (Eigen::Index i = 0; i < c; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      pmf.probs(i, j) = bivariate_pmf_one_ordering(p, ordering, static_cast<std::size_t>(i),
                                                   static_cast<std::size_t>(j), n);
    }
  }
  return pmf;
}

/// Mixture pmf when the sampling ordering is drawn uniformly from `orderings`.
/// Returns one entry per requested pair; throws DegeneratePmfError for a pair
/// whose averaged probability is zero.
inline std::vector<double> bivariate_pmf_averaged(const ProbVector& p,
                                                  std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                                  std::span<const Ordering> orderings, std::size_t n) {
  detail::require(!orderings.empty(), "ordering set must be nonempty");
  std::vector<double> out;
  out.reserve(pairs.size());
  const double weight = 1.0 / static_cast<double>(orderings.size());
  for (const auto& [i, j] : pairs) {
    double total = 0.0;
    for (const auto& o : orderings) total += bivariate_pmf_one_ordering(p, o, i, j, n);
    total *= weight;
    if (!(total > 0.0)) {
      throw DegeneratePmfError("averaged pair probability is zero for pair (" + std::to_string(i) + ", " +
                               std::to_string(j) + ")");
    }
    out.push_back(total);
  }
  return out;
}

/// Full averaged pmf; zero entries are allowed here (e.g. categories with
/// zero probability).
inline BivariatePmf bivariate_pmf_averaged(const ProbVector& p, std::span<const Ordering> orderings, std::size_t n) {
  detail::require(!orderings.empty(), "ordering set must be nonempty");
  const auto c = static_cast<Eigen::Index>(p.size());
  BivariatePmf pmf{Matrix::Zero(c, c)};
  for (const auto& o : orderings) pmf.probs += bivariate_pmf_one_ordering(p, o, n).probs;
  pmf.probs /= static_cast<double>(orderings.size());
  return pmf;
}

/// Categorizes each copula uniform against the cells of ordering(p).
inline SampleMatrix sample_inverse_cdf_with_ordering(const CopulaDraw& u, const ProbVector& p,
                                                     const Ordering& ordering) {
  const Boundaries b = compute_boundaries(ordering.apply(p));
  std::vector<std::size_t> cats(u.n_samples());
  for (std::size_t n = 0; n < u.n_samples(); ++n) cats[n] = ordering.category_at(categorize(u[n], b));
  return SampleMatrix(std::move(cats), p.size());
}

/// N correlated one-hot samples plus their importance ratios.
struct AntitheticSample {
  SampleMatrix samples;
  RatioMatrix ratios;
};

/// Ordering-set size. kAutoOrderings and kAllOrderings both select every
/// anchored ordering; a count k below C(C-1)/2 selects the subset mode.
inline constexpr std::size_t kAllOrderings = std::numeric_limits<std::size_t>::max();
inline constexpr std::size_t kAutoOrderings = 0;
inline constexpr double kDefaultClip = 10.0;

/// Largest C for which the full averaged pmf is tabulated up front.
inline constexpr std::size_t kEagerPmfCategories = 16;

struct InverseCdfOptions {
  std::size_t ordering_budget = kAutoOrderings;
  std::optional<double> clip = kDefaultClip;
};

inline std::size_t resolve_ordering_budget(std::size_t budget, std::size_t categories) {
  const std::size_t total = categories * (categories - 1) / 2;
  if (budget == kAllOrderings || budget == kAutoOrderings) return total;
  return std::min(budget, total);
}

/// Antithetic inverse-CDF sampler over a Dirichlet copula.
///
/// Full set: the sampling ordering is uniform over all C(C-1)/2 anchored
/// orderings and the ratios use the pmf averaged over the same set, which is
/// the exact pair law of the draw. For C <= kEagerPmfCategories the pmf is
/// tabulated at construction; above that, entries for realized pairs are
/// computed on first use and cached, so draw() must not run concurrently on
/// one sampler.
///
/// Subset mode (budget k < C(C-1)/2): every draw picks a uniform random
/// k-subset O, samples the ordering from O and uses O-averaged ratios. This is
/// cheaper but biased: a pair with zero probability under every ordering in O
/// never appears, so its term is missing from the expectation.
class InverseCdfSampler {
 public:
  InverseCdfSampler(ProbVector p, std::size_t n_samples, CopulaKind copula = CopulaKind::dirichlet(),
                    InverseCdfOptions options = {})
      : p_(std::move(p)), n_samples_(n_samples), options_(options) {
    detail::require(n_samples_ >= 2, "antithetic sampling needs N >= 2");
    detail::require(!options_.clip || *options_.clip > 0.0, "clip ceiling must be positive");
    if (!copula.is_dirichlet()) {
      throw UnsupportedPathError("inverse-CDF sampling needs the Dirichlet copula (analytic bivariate CDF)");
    }
    const std::size_t c = p_.size();
    budget_ = resolve_ordering_budget(options_.ordering_budget, c);
    full_ = budget_ == c * (c - 1) / 2;
    if (full_ && c <= kEagerPmfCategories) {
      full_pmf_ = bivariate_pmf_averaged(p_, all_anchored_orderings(c), n_samples_);
      full_ratios_ = ratios_from_pmf(p_, *full_pmf_, options_.clip);
    }
  }

  const ProbVector& probs() const { return p_; }
  std::size_t n_samples() const { return n_samples_; }
  std::size_t ordering_budget() const { return budget_; }
  bool uses_full_ordering_set() const { return full_; }

  /// Tabulated full-set pmf; empty in subset mode and above kEagerPmfCategories.
  const std::optional<BivariatePmf>& full_pmf() const { return full_pmf_; }

  AntitheticSample draw(Rng& rng) const {
    const std::size_t c = p_.size();
    std::vector<Ordering> subset;
    std::optional<Ordering> chosen;
    if (full_) {
      std::uniform_int_distribution<std::size_t> pick(0, c - 1);
      std::size_t a = pick(rng);
      std::size_t b = pick(rng);
      while (b == a) b = pick(rng);
      if (a > b) std::swap(a, b);
      chosen = make_ordering(a, b, c);
    } else {
      subset = random_anchored_orderings(c, budget_, rng);
      chosen = subset[std::uniform_int_distribution<std::size_t>(0, subset.size() - 1)(rng)];
    }
    const CopulaDraw u = sample_dirichlet_copula(n_samples_, rng);
    SampleMatrix samples = sample_inverse_cdf_with_ordering(u, p_, *chosen);

    if (full_pmf_) {
      RatioMatrix ratios = *full_ratios_;
      ratios.clip_engaged = realized_pair_clipped(samples);
      return {std::move(samples), std::move(ratios)};
    }
    if (full_) {
      RatioMatrix ratios = realized_ratios(samples, [this](std::size_t i, std::size_t j) { return cached_pair(i, j); });
      return {std::move(samples), std::move(ratios)};
    }
    RatioMatrix ratios = realized_ratios(samples, [&](std::size_t i, std::size_t j) {
      const std::pair<std::size_t, std::size_t> pair{i, j};
      return bivariate_pmf_averaged(p_, std::span(&pair, 1), subset, n_samples_).front();
    });
    return {std::move(samples), std::move(ratios)};
  }

 private:
  bool realized_pair_clipped(const SampleMatrix& z) const {
    if (!options_.clip) return false;
    for (std::size_t n = 0; n < z.rows(); ++n) {
      for (std::size_t m = 0; m < z.rows(); ++m) {
        const auto i = z.category(n);
        const auto j = z.category(m);
        if (i == j) continue;
        if (p_[i] * p_[j] / (*full_pmf_)(i, j) > *options_.clip) return true;
      }
    }
    return false;
  }

  // Full-set averaged probability of one ordered pair, memoized.
  double cached_pair(std::size_t i, std::size_t j) const {
    const std::size_t c = p_.size();
    const std::size_t key = i * c + j;
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    double total = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t l = k + 1; l < c; ++l) total += bivariate_pmf_one_ordering(p_, make_ordering(k, l, c), i, j, n_samples_);
    }
    total /= static_cast<double>(c * (c - 1) / 2);
    if (!(total > 0.0)) {
      throw DegeneratePmfError("averaged pair probability is zero for pair (" + std::to_string(i) + ", " +
                               std::to_string(j) + ")");
    }
    cache_.emplace(key, total);
    cache_.emplace(j * c + i, total);
    return total;
  }

  // Ratios for realized pairs only; other entries stay at the inert value 1.
  template <typename PairProbability>
  RatioMatrix realized_ratios(const SampleMatrix& z, PairProbability&& joint) const {
    const auto c = static_cast<Eigen::Index>(p_.size());
    RatioMatrix out{Matrix::Ones(c, c), options_.clip, false};
    std::vector<bool> done(p_.size() * p_.size(), false);
    for (std::size_t n = 0; n < z.rows(); ++n) {
      for (std::size_t m = 0; m < z.rows(); ++m) {
        const std::size_t i = z.category(n);
        const std::size_t j = z.category(m);
        if (n == m || done[i * p_.size() + j]) continue;
        done[i * p_.size() + j] = true;
        double r = p_[i] * p_[j] / joint(i, j);
        if (options_.clip && r > *options_.clip) {
          r = *options_.clip;
          if (i != j) out.clip_engaged = true;
        }
        out.ratios(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
      }
    }
    return out;
  }

  ProbVector p_;
  std::size_t n_samples_;
  InverseCdfOptions options_;
  std::size_t budget_ = 0;
  bool full_ = false;
  std::optional<BivariatePmf> full_pmf_;
  std::optional<RatioMatrix> full_ratios_;
  mutable std::unordered_map<std::size_t, double> cache_;
};

inline AntitheticSample sample_antithetic_inverse_cdf(std::size_t n_samples, const ProbVector& p, Rng& rng,
                                                      CopulaKind copula = CopulaKind::dirichlet(),
                                                      InverseCdfOptions options = {}) {
  return InverseCdfSampler(p, n_samples, copula, options).draw(rng);
}

/// P_hat = Z^T (1 - I) Z / (N (N - 1)): frequency of ordered pairs n != m.
inline BivariatePmf empirical_pair_pmf(const SampleMatrix& z) {
  const std::size_t n = z.rows();
  detail::require(n >= 2, "empirical pair pmf needs N >= 2");
  const auto c = static_cast<Eigen::Index>(z.categories());
  Vector counts = Vector::Zero(c);
  for (auto k : z.indices()) counts[static_cast<Eigen::Index>(k)] += 1.0;
  Matrix joint = counts * counts.transpose();
  joint.diagonal() -= counts;
  joint /= static_cast<double>(n * (n - 1));
  return BivariatePmf{std::move(joint)};
}

/// Antithetic Gumbel-max sampler: one copula draw of N uniforms per category,
/// g = -ln(-ln u), row n takes argmax_c g_{c,n} + ln p_c (ties to the lowest
/// index). Ratios use the empirical pair pmf of the draw, clipped at `clip`;
/// a pair absent from the draw takes the ceiling.
///
/// The pair counts cancel in CARMS, so a draw in which every category appears
/// returns the exact gradient and a draw missing some category drops the
/// terms of its pairs. The estimator is therefore biased by the expected
/// missing-pair term; clip_engaged marks exactly those draws.
class GumbelSampler {
 public:
  GumbelSampler(ProbVector p, std::size_t n_samples, CopulaKind copula = CopulaKind::dirichlet(),
                std::optional<double> clip = kDefaultClip)
      : p_(std::move(p)), n_samples_(n_samples), copula_(copula), clip_(clip) {
    detail::require(n_samples_ >= 2, "antithetic sampling needs N >= 2");
    detail::require(!clip_ || *clip_ > 0.0, "clip ceiling must be positive");
    log_p_ = p_.logits();
  }

  const ProbVector& probs() const { return p_; }
  std::size_t n_samples() const { return n_samples_; }

  AntitheticSample draw(Rng& rng) const {
    const std::size_t c = p_.size();
    std::vector<double> best(n_samples_, -std::numeric_limits<double>::infinity());
    std::vector<std::size_t> cats(n_samples_, 0);
    bool assigned = false;
    for (std::size_t k = 0; k < c; ++k) {
      const CopulaDraw u = sample_copula(copula_, n_samples_, rng);
      const double shift = log_p_[static_cast<Eigen::Index>(k)];
      if (!std::isfinite(shift)) continue;
      for (std::size_t n = 0; n < n_samples_; ++n) {
        const double score = -std::log(-std::log(u[n])) + shift;
        if (!assigned || score > best[n]) {
          best[n] = score;
          cats[n] = k;
        }
      }
      assigned = true;
    }
    SampleMatrix samples(std::move(cats), c);
    return {samples, ratios_for(samples)};
  }

  RatioMatrix ratios_for(const SampleMatrix& samples) const {
    const BivariatePmf pmf = empirical_pair_pmf(samples);
    const std::size_t c = p_.size();
    RatioMatrix out{Matrix::Ones(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)), clip_, false};
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const double target = p_[i] * p_[j];
        if (target <= 0.0) continue;
        const double joint = pmf(i, j);
        double r = 1.0;
        bool over = false;
        if (joint > 0.0) {
          r = target / joint;
          over = clip_ && r > *clip_;
        } else {
          over = clip_.has_value();
        }
        if (over) {
          r = *clip_;
          if (i != j) out.clip_engaged = true;
        }
        out.ratios(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
      }
    }
    return out;
  }

 private:
  ProbVector p_;
  std::size_t n_samples_;
  CopulaKind copula_;
  std::optional<double> clip_;
  Vector log_p_;
};

inline AntitheticSample sample_antithetic_gumbel(std::size_t n_samples, const ProbVector& p, Rng& rng,
                                                 CopulaKind copula = CopulaKind::dirichlet(),
                                                 std::optional<double> clip = kDefaultClip) {
  return GumbelSampler(p, n_samples, copula, clip).draw(rng);
}

/// N i.i.d. samples from Cat(p) with unit ratios.
class IndependentSampler {
 public:
  IndependentSampler(ProbVector p, std::size_t n_samples)
      : p_(std::move(p)), n_samples_(n_samples), bounds_(compute_boundaries(p_)) {
    detail::require(n_samples_ >= 1, "need at least one sample");
  }

  const ProbVector& probs() const { return p_; }
  std::size_t n_samples() const { return n_samples_; }

  AntitheticSample draw(Rng& rng) const {
    std::vector<std::size_t> cats(n_samples_);
    for (auto& k : cats) k = categorize(uniform_open(rng), bounds_);
    return {SampleMatrix(std::move(cats), p_.size()), RatioMatrix::ones(p_.size())};
  }

 private:
  ProbVector p_;
  std::size_t n_samples_;
  Boundaries bounds_;
};

}  // namespace carms

#endif  // CARMS_CATEGORICAL_SAMPLING_HPP_
