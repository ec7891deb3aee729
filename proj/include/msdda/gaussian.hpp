// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msdda/errors.hpp"

namespace msdda {

/// Isotropic Gaussian N(mean, variance * I), used for one reverse
/// conditional p(x_{t-1} | x_t).
template <typename Scalar>
struct GaussianPosteriorT {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector mean;
  Scalar variance{1};

  Eigen::Index dim() const { return mean.size(); }
  bool valid() const { return variance > Scalar(0) && std::isfinite(variance) && mean.allFinite(); }

  friend bool operator==(const GaussianPosteriorT& a, const GaussianPosteriorT& b) {
    return a.variance == b.variance && a.mean.size() == b.mean.size() && a.mean == b.mean;
  }
};

using GaussianPosterior = GaussianPosteriorT<double>;

/// A point on the probability simplex. Inputs summing to 1 within 1e-12 are
/// kept verbatim, within 1e-6 they are renormalized, anything else is
/// rejected.
class PreferenceWeights {
 public:
  PreferenceWeights() = default;
  explicit PreferenceWeights(std::vector<double> w) : w_(std::move(w)) {
    if (w_.empty()) throw ParameterError("weights: empty preference vector");
    double sum = 0.0;
    for (double x : w_) {
      if (!(x >= 0.0) || !std::isfinite(x))
        throw ParameterError("weights: entries must be finite and >= 0");
      sum += x;
    }
    const double gap = std::abs(sum - 1.0);
    if (gap > 1e-6)
      throw ParameterError("weights: entries sum to " + std::to_string(sum) + ", expected 1");
    if (gap > 1e-12)
      for (double& x : w_) x /= sum;
  }
  PreferenceWeights(std::initializer_list<double> w) : PreferenceWeights(std::vector<double>(w)) {}

  /// (w, 1 - w) for the two-objective case.
  static PreferenceWeights pair(double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("weights: w must lie in [0, 1]");
    return PreferenceWeights({w, 1.0 - w});
  }
  static PreferenceWeights unit(std::size_t M, std::size_t i) {
    std::vector<double> w(M, 0.0);
    w.at(i) = 1.0;
    return PreferenceWeights(std::move(w));
  }

  std::size_t size() const { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> values() const { return w_; }

 private:
  std::vector<double> w_;
};

/// Normalized weighted product prod_i p_i^{w_i} of isotropic Gaussians:
/// precision sum_i w_i / var_i and precision-weighted mean. Entries with
/// w_i = 0 are skipped and never inspected beyond their dimension.
template <typename Scalar>
GaussianPosteriorT<Scalar> fuse(std::span<const GaussianPosteriorT<Scalar>> posteriors,
                                const PreferenceWeights& w) {
  if (posteriors.empty()) throw ParameterError("fuse: empty posterior list");
  if (w.size() != posteriors.size())
    throw ParameterError("fuse: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(posteriors.size()) + " posteriors");
  const Eigen::Index d = posteriors.front().dim();
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    if (posteriors[i].dim() != d) throw ParameterError("fuse: posterior dimension mismatch");
    if (w[i] > 0.0) active.push_back(i);
  }
  if (active.empty()) throw ParameterError("fuse: all weights are zero");
  for (std::size_t i : active)
    if (!(posteriors[i].variance > Scalar(0)) || !std::isfinite(posteriors[i].variance))
      throw ParameterError("fuse: non-positive variance for posterior " + std::to_string(i));

  if (active.size() == 1) return posteriors[active.front()];
  const bool all_same = std::all_of(active.begin() + 1, active.end(), [&](std::size_t i) {
    return posteriors[i] == posteriors[active.front()];
  });
  if (all_same) return posteriors[active.front()];

  // Canonical summation order makes the result exactly permutation invariant.
  std::vector<Scalar> precision(posteriors.size());
  for (std::size_t i : active) precision[i] = Scalar(w[i]) / posteriors[i].variance;
  std::sort(active.begin(), active.end(), [&](std::size_t a, std::size_t b) {
    if (precision[a] != precision[b]) return precision[a] < precision[b];
    const auto& ma = posteriors[a].mean;
    const auto& mb = posteriors[b].mean;
    return std::lexicographical_compare(ma.data(), ma.data() + d, mb.data(), mb.data() + d);
  });

  Scalar total(0);
  typename GaussianPosteriorT<Scalar>::Vector weighted = GaussianPosteriorT<Scalar>::Vector::Zero(d);
  for (std::size_t i : active) {
    total += precision[i];
    weighted.noalias() += precision[i] * posteriors[i].mean;
  }
  GaussianPosteriorT<Scalar> out;
  out.variance = Scalar(1) / total;
  out.mean = out.variance * weighted;
  return out;
}

template <typename Scalar>
GaussianPosteriorT<Scalar> fuse(const std::vector<GaussianPosteriorT<Scalar>>& posteriors,
                                const PreferenceWeights& w) {
  return fuse(std::span<const GaussianPosteriorT<Scalar>>(posteriors), w);
}

template <typename Scalar, typename Derived>
Scalar log_density(const GaussianPosteriorT<Scalar>& p, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != p.dim()) throw ParameterError("log_density: dimension mismatch");
  const Scalar d = static_cast<Scalar>(p.dim());
  const Scalar sq = (x - p.mean).squaredNorm();
  return Scalar(-0.5) * d * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * p.variance) -
         sq / (Scalar(2) * p.variance);
}

/// KL(p || q) for isotropic Gaussians of equal dimension.
template <typename Scalar>
Scalar kl_divergence(const GaussianPosteriorT<Scalar>& p, const GaussianPosteriorT<Scalar>& q) {
  if (p.dim() != q.dim()) throw ParameterError("kl_divergence: dimension mismatch");
  if (p == q) return Scalar(0);
  const Scalar d = static_cast<Scalar>(p.dim());
  const Scalar sq = (p.mean - q.mean).squaredNorm();
  const Scalar kl = Scalar(0.5) * d * std::log(q.variance / p.variance) +
                    (d * p.variance + sq) / (Scalar(2) * q.variance) - Scalar(0.5) * d;
  return std::max(kl, Scalar(0));
}

}  // namespace msdda
