#include "mlpf/resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mlpf {

WeightVector normalize_log_weights(const Eigen::Ref<const Eigen::VectorXd>& log_weights) {
  if (log_weights.size() == 0) throw InvalidArgument("normalize_log_weights: empty weight vector");
  double max = -std::numeric_limits<double>::infinity();
  for (const double lw : log_weights) {
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
      throw InvalidArgument("normalize_log_weights: NaN or +inf log-weight");
    }
    max = std::max(max, lw);
  }
  if (max == -std::numeric_limits<double>::infinity()) {
    throw DegenerateWeights("normalize_log_weights: all log-weights are -inf");
  }
  WeightVector w;
  w.log_weights = log_weights;
  w.normalized = (log_weights.array() - max).unaryExpr([](double v) { return std::exp(v); }).matrix();
  w.normalized /= w.normalized.sum();
  return w;
}

WeightVector weights_from_probabilities(const Eigen::Ref<const Eigen::VectorXd>& probabilities) {
  if ((probabilities.array() < 0.0).any() || !probabilities.allFinite()) {
    throw InvalidArgument("weights_from_probabilities: negative or non-finite probability");
  }
  const double total = probabilities.sum();
  if (!(total > 0.0)) throw DegenerateWeights("weights_from_probabilities: zero total mass");
  WeightVector w;
  w.log_weights = probabilities.array().log().matrix();
  w.normalized = probabilities / total;
  return w;
}

double ess(const WeightVector& weights) { return 1.0 / weights.normalized.squaredNorm(); }

Categorical::Categorical(Eigen::VectorXd probabilities) : probs_(std::move(probabilities)) {
  if (probs_.size() == 0) throw InvalidArgument("Categorical: empty support");
  cdf_.resize(static_cast<std::size_t>(probs_.size()));
  double acc = 0.0;
  bool any_positive = false;
  for (Eigen::Index i = 0; i < probs_.size(); ++i) {
    acc += probs_(i);
    cdf_[static_cast<std::size_t>(i)] = acc;
    if (probs_(i) > 0.0) {
      last_positive_ = static_cast<std::size_t>(i);
      any_positive = true;
    }
  }
  if (!any_positive) throw DegenerateWeights("Categorical: no positive probability");
}

std::size_t Categorical::inverse_cdf(double u) const {
  const double target = u * cdf_.back();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
  const auto index = static_cast<std::size_t>(it - cdf_.begin());
  return std::min(index, last_positive_);
}

MaximalCoupling::MaximalCoupling(const WeightVector& fine, const WeightVector& coarse) {
  if (fine.size() != coarse.size()) throw InvalidArgument("maximal coupling: weight vectors differ in length");
  overlap_ = fine.normalized.cwiseMin(coarse.normalized);
  alpha_ = overlap_.sum();
  fine_residual_probs_ = fine.normalized - overlap_;
  coarse_residual_probs_ = coarse.normalized - overlap_;
  // Both residuals carry mass 1 - alpha analytically; the measured sums keep
  // rounding from producing a negative branch probability.
  residual_mass_ = std::min(fine_residual_probs_.sum(), coarse_residual_probs_.sum());
  if (alpha_ > 0.0) common_ = Categorical(overlap_ / alpha_);
  if (!fully_coupled()) {
    fine_residual_probs_ /= fine_residual_probs_.sum();
    coarse_residual_probs_ /= coarse_residual_probs_.sum();
    residual_fine_ = Categorical(fine_residual_probs_);
    residual_coarse_ = Categorical(coarse_residual_probs_);
  } else {
    fine_residual_probs_.setZero();
    coarse_residual_probs_.setZero();
  }
}

Eigen::MatrixXd MaximalCoupling::joint_pmf() const {
  const Eigen::Index n = overlap_.size();
  Eigen::MatrixXd pmf = Eigen::MatrixXd::Zero(n, n);
  if (fully_coupled()) {
    pmf.diagonal() = overlap_ / alpha_;
    return pmf;
  }
  pmf = (1.0 - alpha_) * fine_residual_probs_ * coarse_residual_probs_.transpose();
  pmf.diagonal() += overlap_;
  return pmf;
}

Eigen::MatrixXd maximal_coupling_pmf(const WeightVector& fine, const WeightVector& coarse) {
  return MaximalCoupling(fine, coarse).joint_pmf();
}

namespace {

std::vector<std::size_t> sorted_order(std::span<const double> states) {
  std::vector<std::size_t> order(states.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return states[a] < states[b]; });
  return order;
}

Eigen::VectorXd permuted(const Eigen::VectorXd& probs, const std::vector<std::size_t>& order) {
  Eigen::VectorXd out(probs.size());
  for (std::size_t k = 0; k < order.size(); ++k) out(static_cast<Eigen::Index>(k)) = probs(static_cast<Eigen::Index>(order[k]));
  return out;
}

}  // namespace

SortedCoupling::SortedCoupling(const WeightVector& fine, const WeightVector& coarse,
                               std::span<const double> fine_states, std::span<const double> coarse_states) {
  const auto n = static_cast<std::size_t>(fine.size());
  if (static_cast<std::size_t>(coarse.size()) != n || fine_states.size() != n || coarse_states.size() != n) {
    throw InvalidArgument("sorted coupling: weights and states differ in length");
  }
  fine_order_ = sorted_order(fine_states);
  coarse_order_ = sorted_order(coarse_states);
  fine_sorted_ = Categorical(permuted(fine.normalized, fine_order_));
  coarse_sorted_ = Categorical(permuted(coarse.normalized, coarse_order_));
}

IndexPair SortedCoupling::draw(double u) const {
  const std::size_t f = fine_order_[fine_sorted_.inverse_cdf(u)];
  const std::size_t c = coarse_order_[coarse_sorted_.inverse_cdf(u)];
  return {f, c, f == c};
}

}  // namespace mlpf
