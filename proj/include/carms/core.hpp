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

#ifndef CARMS_CORE_HPP_
#define CARMS_CORE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace carms {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Random stream used everywhere in the library. Always passed in; there is
/// no global generator.
using Rng = std::mt19937_64;

// Errors. Argument problems surface as std::invalid_argument subclasses.

class DegeneratePmfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedPathError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InconsistentDistributionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace detail

/// Derives an independent generator from a master seed and a path of
/// integer tags, e.g. (seed, alpha_index, trial). Parallel and serial runs
/// that use the same tags see the same numbers.
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags = {}) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  auto push = [&words](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Uniform draw on the open interval (0, 1) with 53 random bits.
inline double uniform_open(Rng& rng) {
  for (;;) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    if (u > 0.0) return u;
  }
}

/// Point on the probability simplex with at least two categories.
class ProbVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit ProbVector(Vector probs) : probs_(std::move(probs)) {
    detail::require(probs_.size() >= 2, "ProbVector needs at least 2 categories");
    for (Eigen::Index k = 0; k < probs_.size(); ++k) {
      detail::require(std::isfinite(probs_[k]) && probs_[k] >= 0.0,
                      "ProbVector entries must be finite and nonnegative");
    }
    detail::require(std::abs(probs_.sum() - 1.0) <= kSumTolerance,
                    "ProbVector entries must sum to 1");
  }

  ProbVector(std::initializer_list<double> probs)
      : ProbVector(Eigen::Map<const Vector>(probs.begin(), static_cast<Eigen::Index>(probs.size()))) {}

  /// Rescales nonnegative weights onto the simplex.
  static ProbVector normalized(const Vector& weights) {
    detail::require(weights.size() >= 2, "ProbVector needs at least 2 categories");
    detail::require((weights.array() >= 0.0).all() && weights.allFinite(),
                    "weights must be finite and nonnegative");
    const double total = weights.sum();
    detail::require(total > 0.0, "weights must have positive mass");
    return ProbVector(Vector(weights / total));
  }

  /// Softmax with max subtraction.
  static ProbVector from_logits(const Vector& logits) {
    detail::require(logits.size() >= 2, "ProbVector needs at least 2 categories");
    detail::require(logits.allFinite(), "logits must be finite");
    const Vector shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
    return ProbVector(Vector(shifted / shifted.sum()));
  }

  static ProbVector uniform(std::size_t categories) {
    detail::require(categories >= 2, "ProbVector needs at least 2 categories");
    const auto c = static_cast<Eigen::Index>(categories);
    return ProbVector(Vector::Constant(c, 1.0 / static_cast<double>(categories)));
  }

  std::size_t size() const { return static_cast<std::size_t>(probs_.size()); }
  double operator[](std::size_t k) const { return probs_[static_cast<Eigen::Index>(k)]; }
  const Vector& vector() const { return probs_; }

  /// Logits whose softmax is this vector (zero-probability entries map to -inf).
  Vector logits() const { return probs_.array().log().matrix(); }

 private:
  Vector probs_;
};

/// N one-hot rows over C categories, stored as the category index of each row.
class SampleMatrix {
 public:
  SampleMatrix(std::vector<std::size_t> categories, std::size_t n_categories)
      : categories_(std::move(categories)), n_categories_(n_categories) {
    detail::require(n_categories_ >= 2, "SampleMatrix needs at least 2 categories");
    for (auto c : categories_) {
      detail::require(c < n_categories_, "SampleMatrix category index out of range");
    }
  }

  std::size_t rows() const { return categories_.size(); }
  std::size_t categories() const { return n_categories_; }
  std::size_t category(std::size_t row) const { return categories_[row]; }
  std::span<const std::size_t> indices() const { return categories_; }

  /// Dense N x C one-hot matrix.
  Matrix one_hot() const {
    Matrix z = Matrix::Zero(static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(n_categories_));
    for (std::size_t n = 0; n < rows(); ++n) {
      z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(categories_[n])) = 1.0;
    }
    return z;
  }

 private:
  std::vector<std::size_t> categories_;
  std::size_t n_categories_;
};

/// C x C importance ratios p_i p_j / P(z = e_i, z' = e_j).
struct RatioMatrix {
  Matrix ratios;
  /// Ceiling applied to every entry; empty when clipping is disabled.
  std::optional<double> clip_ceiling;
  /// True when at least one entry that matters had to be clipped.
  bool clip_engaged = false;

  double operator()(std::size_t i, std::size_t j) const {
    return ratios(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  std::size_t size() const { return static_cast<std::size_t>(ratios.rows()); }

  static RatioMatrix ones(std::size_t categories) {
    const auto c = static_cast<Eigen::Index>(categories);
    return RatioMatrix{Matrix::Ones(c, c), std::nullopt, false};
  }
};

/// Joint PMF P(z = e_i, z' = e_j) of an exchangeable pair of categoricals.
struct BivariatePmf {
  Matrix probs;

  std::size_t size() const { return static_cast<std::size_t>(probs.rows()); }
  double operator()(std::size_t i, std::size_t j) const {
    return probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  static BivariatePmf independent(const ProbVector& p) {
    return BivariatePmf{p.vector() * p.vector().transpose()};
  }
};

/// Ratio matrix p_i p_j / P(i, j). Entries with zero joint mass get the
/// placeholder 1; they can never be realized by the sampler that owns the pmf.
inline RatioMatrix ratios_from_pmf(const ProbVector& p, const BivariatePmf& pmf,
                                   std::optional<double> clip = std::nullopt) {
  const std::size_t c = p.size();
  detail::require(pmf.size() == c, "pmf size does not match the probability vector");
  RatioMatrix out{Matrix::Ones(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)), clip, false};
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const double joint = pmf(i, j);
      if (joint <= 0.0) continue;
      double r = p[i] * p[j] / joint;
      if (clip && r > *clip) {
        r = *clip;
        out.clip_engaged = true;
      }
      out.ratios(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r;
    }
  }
  return out;
}

}  // namespace carms

#endif  // CARMS_CORE_HPP_
