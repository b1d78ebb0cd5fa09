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

#ifndef CARMS_GRADIENT_HPP_
#define CARMS_GRADIENT_HPP_

#include "carms/categorical_sampling.hpp"
#include "carms/estimators.hpp"

#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace carms {

enum class Method { kCarmsInverseCdf, kCarmsGumbel, kLoorf, kReinforce };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kCarmsInverseCdf: return "carms-i";
    case Method::kCarmsGumbel: return "carms-g";
    case Method::kLoorf: return "loorf";
    case Method::kReinforce: return "reinforce";
  }
  return "unknown";
}

inline Method parse_method(std::string_view name) {
  if (name == "carms-i") return Method::kCarmsInverseCdf;
  if (name == "carms-g") return Method::kCarmsGumbel;
  if (name == "loorf") return Method::kLoorf;
  if (name == "reinforce") return Method::kReinforce;
  throw std::invalid_argument("unknown method: " + std::string(name));
}

/// Which estimator, and how its samples are drawn.
struct EstimatorConfig {
  Method method = Method::kCarmsInverseCdf;
  CopulaKind copula = CopulaKind::dirichlet();
  std::size_t n_samples = 3;
  std::optional<double> clip = kDefaultClip;
  std::size_t ordering_budget = kAutoOrderings;
};

/// Objective over a joint assignment (one category per dimension).
using Objective = std::function<double(std::span<const std::size_t>)>;

struct GradientDraw {
  Matrix grad;  // D x C
  bool clip_engaged = false;
};

/// Draws gradient estimates for fixed per-dimension probabilities. Samplers
/// are built once, so repeated draws reuse the cached pmf of the
/// inverse-CDF path.
class GradientSampler {
 public:
  GradientSampler(EstimatorConfig config, std::vector<ProbVector> probs)
      : config_(config), probs_(std::move(probs)) {
    detail::require(!probs_.empty(), "need at least one dimension");
    detail::require(config_.n_samples >= 2, "need N >= 2 samples");
    samplers_.reserve(probs_.size());
    for (const auto& p : probs_) {
      switch (config_.method) {
        case Method::kCarmsInverseCdf:
          samplers_.emplace_back(std::in_place_type<InverseCdfSampler>, p, config_.n_samples, config_.copula,
                                 InverseCdfOptions{config_.ordering_budget, config_.clip});
          break;
        case Method::kCarmsGumbel:
          samplers_.emplace_back(std::in_place_type<GumbelSampler>, p, config_.n_samples, config_.copula,
                                 config_.clip);
          break;
        case Method::kLoorf:
        case Method::kReinforce:
          samplers_.emplace_back(std::in_place_type<IndependentSampler>, p, config_.n_samples);
          break;
      }
    }
  }

  std::size_t dims() const { return probs_.size(); }
  const std::vector<ProbVector>& probs() const { return probs_; }
  const EstimatorConfig& config() const { return config_; }

  GradientDraw draw(const Objective& f, Rng& rng) const {
    const std::size_t d = probs_.size();
    const std::size_t n = config_.n_samples;
    SampleTensor batch;
    batch.samples.reserve(d);
    batch.ratios.reserve(d);
    bool clipped = false;
    for (const auto& s : samplers_) {
      auto draw = std::visit([&rng](const auto& sampler) { return sampler.draw(rng); }, s);
      clipped = clipped || draw.ratios.clip_engaged;
      batch.samples.push_back(std::move(draw.samples));
      batch.ratios.push_back(std::move(draw.ratios));
    }
    batch.values.resize(static_cast<Eigen::Index>(n));
    std::vector<std::size_t> assignment(d);
    for (std::size_t row = 0; row < n; ++row) {
      for (std::size_t k = 0; k < d; ++k) assignment[k] = batch.samples[k].category(row);
      batch.values[static_cast<Eigen::Index>(row)] = f(assignment);
    }

    const std::size_t c = probs_.front().size();
    GradientDraw out{Matrix(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c)), clipped};
    switch (config_.method) {
      case Method::kCarmsInverseCdf:
      case Method::kCarmsGumbel:
        out.grad = carms_multivariate(batch, probs_);
        break;
      case Method::kLoorf:
        for (std::size_t k = 0; k < d; ++k) {
          out.grad.row(static_cast<Eigen::Index>(k)) = loorf(batch.values, batch.samples[k], probs_[k]).transpose();
        }
        break;
      case Method::kReinforce:
        for (std::size_t k = 0; k < d; ++k) {
          out.grad.row(static_cast<Eigen::Index>(k)) =
              reinforce(batch.values, batch.samples[k], probs_[k]).transpose();
        }
        break;
    }
    return out;
  }

 private:
  using AnySampler = std::variant<InverseCdfSampler, GumbelSampler, IndependentSampler>;

  EstimatorConfig config_;
  std::vector<ProbVector> probs_;
  std::vector<AnySampler> samplers_;
};

}  // namespace carms

#endif  // CARMS_GRADIENT_HPP_
