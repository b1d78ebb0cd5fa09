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

// Score-function gradient estimators with respect to softmax logits.
//
// All estimators take probabilities p = softmax(phi) and precomputed
// function values f(z_n); they never evaluate f themselves, so a gradient
// costs exactly N evaluations regardless of the number of dimensions.

#ifndef CARMS_ESTIMATORS_HPP_
#define CARMS_ESTIMATORS_HPP_

#include "carms/core.hpp"

#include <cmath>
#include <vector>

namespace carms {

namespace detail {

inline void check_function_values(const Vector& f, std::size_t rows) {
  require(static_cast<std::size_t>(f.size()) == rows, "function values must match the sample count");
  require(f.allFinite(), "function values must be finite");
}

inline void check_samples(const SampleMatrix& z, const ProbVector& p) {
  require(z.categories() == p.size(), "sample width does not match the probability vector");
}

}  // namespace detail

/// Leave-one-out REINFORCE: (1/(N-1)) sum_n (f_n - mean f)(z_n - p).
inline Vector loorf(const Vector& f, const SampleMatrix& z, const ProbVector& p) {
  const std::size_t n = z.rows();
  detail::require(n >= 2, "LOORF needs N >= 2");
  detail::check_function_values(f, n);
  detail::check_samples(z, p);
  const double mean = f.mean();
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(p.size()));
  for (std::size_t k = 0; k < n; ++k) {
    const double centered = f[static_cast<Eigen::Index>(k)] - mean;
    grad -= centered * p.vector();
    grad[static_cast<Eigen::Index>(z.category(k))] += centered;
  }
  return grad / static_cast<double>(n - 1);
}

/// LOORF written as (1/N) f^T (I - (1 - I)/(N-1)) (Z - 1 p^T).
inline Vector loorf_matrix_form(const Vector& f, const SampleMatrix& z, const ProbVector& p) {
  const std::size_t n = z.rows();
  detail::require(n >= 2, "LOORF needs N >= 2");
  detail::check_function_values(f, n);
  detail::check_samples(z, p);
  const auto nn = static_cast<Eigen::Index>(n);
  const double off = 1.0 / static_cast<double>(n - 1);
  Matrix weights = Matrix::Constant(nn, nn, -off);
  weights.diagonal().setOnes();
  const Matrix centered = z.one_hot().rowwise() - p.vector().transpose();
  return (f.transpose() * weights * centered).transpose() / static_cast<double>(n);
}

/// Two-sample estimator: 0.5 (f(z) - f(z')) (z - z') R(z, z').
inline Vector carts(double f_z, double f_zp, std::size_t z, std::size_t zp, const RatioMatrix& ratios) {
  const std::size_t c = ratios.size();
  detail::require(z < c && zp < c, "category out of range");
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(c));
  if (z == zp) return grad;
  const double w = 0.5 * (f_z - f_zp) * ratios(z, zp);
  grad[static_cast<Eigen::Index>(z)] += w;
  grad[static_cast<Eigen::Index>(zp)] -= w;
  return grad;
}

/// N-sample antithetic estimator in matrix form,
///   (1/N) f^T (D - O) (Z - 1 p^T),
///   O = (1 - I) o W / (N-1),  D = diag(O 1),
/// where W_nm = (R(z_n, z_m) + R(z_m, z_n)) / 2. For the symmetric ratio
/// matrices produced by the samplers W = Z R Z^T; the symmetrized weight makes
/// the form equal to the average of CARTS over ordered pairs for any R.
inline Vector carms(const Vector& f, const SampleMatrix& z, const RatioMatrix& ratios, const ProbVector& p) {
  const std::size_t n = z.rows();
  detail::require(n >= 2, "CARMS needs N >= 2");
  detail::check_function_values(f, n);
  detail::check_samples(z, p);
  detail::require(ratios.size() == p.size(), "ratio matrix size does not match the probability vector");

  const auto nn = static_cast<Eigen::Index>(n);
  const double scale = 1.0 / static_cast<double>(n - 1);
  Matrix off = Matrix::Zero(nn, nn);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double r_ab = ratios(z.category(a), z.category(b));
      const double r_ba = ratios(z.category(b), z.category(a));
      detail::require(std::isfinite(r_ab) && std::isfinite(r_ba), "ratio at a realized pair is not finite");
      const double w = 0.5 * (r_ab + r_ba) * scale;
      off(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = w;
      off(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = w;
    }
  }
  Matrix weights = -off;
  weights.diagonal() = off.rowwise().sum();
  const Matrix centered = z.one_hot().rowwise() - p.vector().transpose();
  return (f.transpose() * weights * centered).transpose() / static_cast<double>(n);
}

/// D sample matrices drawn independently per dimension, their ratio
/// matrices, and f evaluated on the N joint samples.
struct SampleTensor {
  std::vector<SampleMatrix> samples;
  std::vector<RatioMatrix> ratios;
  Vector values;

  std::size_t dims() const { return samples.size(); }
  std::size_t n_samples() const { return samples.empty() ? 0 : samples.front().rows(); }
};

/// Row d is CARMS for dimension d with the shared joint function values.
inline Matrix carms_multivariate(const SampleTensor& batch, const std::vector<ProbVector>& probs) {
  const std::size_t d = batch.dims();
  detail::require(d >= 1, "need at least one dimension");
  detail::require(batch.ratios.size() == d && probs.size() == d, "dimension mismatch");
  const std::size_t c = probs.front().size();
  Matrix grad(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(c));
  for (std::size_t k = 0; k < d; ++k) {
    detail::require(batch.samples[k].rows() == batch.n_samples(), "all dimensions must share N");
    detail::require(probs[k].size() == c, "all dimensions must share C");
    grad.row(static_cast<Eigen::Index>(k)) = carms(batch.values, batch.samples[k], batch.ratios[k], probs[k]).transpose();
  }
  return grad;
}

/// Binary antithetic estimator for D Bernoulli logits:
///   (1/(N-1)) sum_n (f_n - mean f)(b_n - p) / (1 - rho).
/// `b` is N x D with 0/1 entries.
inline Vector arms_binary(const Vector& f, const Matrix& b, const Vector& p, const Vector& rho) {
  const auto n = b.rows();
  detail::require(n >= 2, "ARMS needs N >= 2");
  detail::check_function_values(f, static_cast<std::size_t>(n));
  detail::require(p.size() == b.cols() && rho.size() == b.cols(), "dimension mismatch");
  detail::require((rho.array() < 1.0).all(), "ARMS needs rho < 1 in every dimension");
  const Vector centered = f.array() - f.mean();
  const Matrix score = b.rowwise() - p.transpose();
  const Vector raw = (centered.transpose() * score).transpose() / static_cast<double>(n - 1);
  return raw.array() / (1.0 - rho.array());
}

/// Single-sample REINFORCE term f(z)(z - p), no baseline.
inline Vector reinforce_single(double f_z, std::size_t z, const ProbVector& p) {
  detail::require(z < p.size(), "category out of range");
  Vector grad = -f_z * p.vector();
  grad[static_cast<Eigen::Index>(z)] += f_z;
  return grad;
}

/// Mean of single-sample REINFORCE over N samples.
inline Vector reinforce(const Vector& f, const SampleMatrix& z, const ProbVector& p) {
  detail::require(z.rows() >= 1, "need at least one sample");
  detail::check_function_values(f, z.rows());
  detail::check_samples(z, p);
  Vector grad = Vector::Zero(static_cast<Eigen::Index>(p.size()));
  for (std::size_t k = 0; k < z.rows(); ++k) grad += reinforce_single(f[static_cast<Eigen::Index>(k)], z.category(k), p);
  return grad / static_cast<double>(z.rows());
}

}  // namespace carms

#endif  // CARMS_ESTIMATORS_HPP_
