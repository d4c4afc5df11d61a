#pragma once

#include "mlpf/core.hpp"

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace mlpf {

struct WeightVector {
  Eigen::VectorXd log_weights;
  /// exp(lw - max) / sum, non-negative and summing to one.
  Eigen::VectorXd normalized;

  Eigen::Index size() const { return normalized.size(); }
};

/// Log-sum-exp stabilized normalization. Throws DegenerateWeights if no entry is
/// finite (all -inf) and InvalidArgument for NaN or +inf entries.
WeightVector normalize_log_weights(const Eigen::Ref<const Eigen::VectorXd>& log_weights);

/// Wraps an already normalized probability vector (validated, renormalized).
WeightVector weights_from_probabilities(const Eigen::Ref<const Eigen::VectorXd>& probabilities);

/// Effective sample size 1 / sum w_i^2.
double ess(const WeightVector& weights);

/// Categorical law with a cached CDF for inverse-transform sampling.
class Categorical {
 public:
  Categorical() = default;
  explicit Categorical(Eigen::VectorXd probabilities);

  Eigen::Index size() const { return probs_.size(); }
  const Eigen::VectorXd& probabilities() const { return probs_; }

  /// Smallest i with cdf(i) > u; never returns a zero-probability index.
  std::size_t inverse_cdf(double u) const;

 private:
  Eigen::VectorXd probs_;
  std::vector<double> cdf_;
  std::size_t last_positive_ = 0;
};

/// Adapts a uniform source (callable returning a double in (0, 1)) to the
/// chooser interface used by the coupled resamplers.
template <typename Uniform>
class UniformChooser {
 public:
  explicit UniformChooser(Uniform& uniform) : uniform_(uniform) {}
  bool bernoulli(double p) { return uniform_() < p; }
  std::size_t categorical(const Categorical& dist) { return dist.inverse_cdf(uniform_()); }

 private:
  Uniform& uniform_;
};

/// Multinomial resampling: n i.i.d. inverse-CDF draws, one uniform each.
template <typename Uniform>
std::vector<std::size_t> multinomial_indices(const WeightVector& weights, std::size_t n, Uniform&& uniform) {
  const Categorical dist(weights.normalized);
  std::vector<std::size_t> out(n);
  for (auto& index : out) index = dist.inverse_cdf(uniform());
  return out;
}

struct IndexPair {
  std::size_t fine_index = 0;
  std::size_t coarse_index = 0;
  /// Drawn from the overlap min(wf, wc); implies fine_index == coarse_index.
  bool coupled = false;

  friend bool operator==(const IndexPair&, const IndexPair&) = default;
};

/// Residual mass below which the two laws are treated as identical.
inline constexpr double kResidualFloor = 1e-14;

/// Maximal coupling of two categorical laws over the same N ancestors.
///
/// With probability alpha = sum_i min(wf_i, wc_i) a common index is drawn from
/// min(wf, wc) / alpha; otherwise the fine index comes from (wf - min) / (1 - alpha)
/// and the coarse index, independently, from (wc - min) / (1 - alpha).
class MaximalCoupling {
 public:
  MaximalCoupling(const WeightVector& fine, const WeightVector& coarse);

  double overlap() const { return alpha_; }
  bool fully_coupled() const { return residual_mass_ < kResidualFloor; }

  /// Chooser needs `bool bernoulli(double)` and `std::size_t categorical(const Categorical&)`.
  template <typename Chooser>
  IndexPair draw(Chooser& chooser) const {
    if (fully_coupled() || (alpha_ > 0.0 && chooser.bernoulli(alpha_))) {
      const std::size_t i = chooser.categorical(common_);
      return {i, i, true};
    }
    const std::size_t f = chooser.categorical(residual_fine_);
    const std::size_t c = chooser.categorical(residual_coarse_);
    return {f, c, false};
  }

  /// Exact N x N joint law of (fine_index, coarse_index).
  Eigen::MatrixXd joint_pmf() const;

 private:
  Eigen::VectorXd overlap_;
  double alpha_ = 0.0;
  double residual_mass_ = 0.0;
  Categorical common_;
  Categorical residual_fine_;
  Categorical residual_coarse_;
  Eigen::VectorXd fine_residual_probs_;
  Eigen::VectorXd coarse_residual_probs_;
};

template <typename Uniform>
std::vector<IndexPair> maximal_coupling_indices(const WeightVector& fine, const WeightVector& coarse, std::size_t n,
                                                Uniform&& uniform) {
  const MaximalCoupling coupling(fine, coarse);
  UniformChooser<std::remove_reference_t<Uniform>> chooser(uniform);
  std::vector<IndexPair> out(n);
  for (auto& pair : out) pair = coupling.draw(chooser);
  return out;
}

/// Closed-form joint law of the maximal coupling.
Eigen::MatrixXd maximal_coupling_pmf(const WeightVector& fine, const WeightVector& coarse);

/// Comonotone (sorted inverse-CDF) coupling for one-dimensional states: a single
/// uniform drives both inverse CDFs, each taken over its own state-sorted order.
/// Ties are broken by particle index. No optimality guarantee is claimed.
class SortedCoupling {
 public:
  SortedCoupling(const WeightVector& fine, const WeightVector& coarse, std::span<const double> fine_states,
                 std::span<const double> coarse_states);

  IndexPair draw(double u) const;

 private:
  std::vector<std::size_t> fine_order_;
  std::vector<std::size_t> coarse_order_;
  Categorical fine_sorted_;
  Categorical coarse_sorted_;
};

template <typename Uniform>
std::vector<IndexPair> sorted_coupling_indices(const WeightVector& fine, const WeightVector& coarse,
                                               std::span<const double> fine_states,
                                               std::span<const double> coarse_states, std::size_t n,
                                               Uniform&& uniform) {
  const SortedCoupling coupling(fine, coarse, fine_states, coarse_states);
  std::vector<IndexPair> out(n);
  for (auto& pair : out) pair = coupling.draw(uniform());
  return out;
}

}  // namespace mlpf
