#include "doctest.h"

#include "mlpf/resampling.hpp"
#include "mlpf/rng.hpp"
#include "test_support.hpp"

#include <cmath>
#include <limits>

using namespace mlpf;

namespace {

WeightVector probs(std::initializer_list<double> p) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(p.size()));
  Eigen::Index i = 0;
  for (double x : p) v(i++) = x;
  return weights_from_probabilities(v);
}

struct ScriptedUniform {
  std::vector<double> values;
  std::size_t next = 0;
  double operator()() { return values.at(next++); }
};

// Upper chi-square quantile at significance 1e-3 via Wilson-Hilferty.
double chi_square_critical(int dof) {
  const double z = 3.090232306167813;
  const double k = dof;
  return k * std::pow(1 - 2 / (9 * k) + z * std::sqrt(2 / (9 * k)), 3);
}

}  // namespace

TEST_CASE("log-weight normalization") {
  const auto uniform = normalize_log_weights(Eigen::VectorXd::Constant(4, -700.0));
  for (Eigen::Index i = 0; i < 4; ++i) CHECK(uniform.normalized(i) == 0.25);
  Eigen::VectorXd lw(2);
  lw << 0.0, -std::numeric_limits<double>::infinity();
  const auto collapsed = normalize_log_weights(lw);
  CHECK(collapsed.normalized(0) == 1.0);
  CHECK(collapsed.normalized(1) == 0.0);
  Eigen::VectorXd l3(3);
  l3 << std::log(2.0), 0.0, 0.0;
  const auto w3 = normalize_log_weights(l3);
  CHECK(w3.normalized(0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(w3.normalized(1) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(w3.normalized(2) == doctest::Approx(0.25).epsilon(1e-15));
  Eigen::VectorXd big(2);
  big << 1000.0, 1000.0 + std::log(3.0);
  CHECK(normalize_log_weights(big).normalized(1) == doctest::Approx(0.75));

  CHECK_THROWS_AS(normalize_log_weights(Eigen::VectorXd::Constant(3, -std::numeric_limits<double>::infinity())),
                  DegenerateWeights);
  Eigen::VectorXd bad(2);
  bad << 0.0, std::nan("");
  CHECK_THROWS_AS(normalize_log_weights(bad), InvalidArgument);
  bad << 0.0, std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(normalize_log_weights(bad), InvalidArgument);
}

TEST_CASE("effective sample size") {
  CHECK(ess(probs({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(4.0));
  CHECK(ess(probs({1.0, 0.0, 0.0})) == 1.0);
  CHECK(ess(probs({0.5, 0.25, 0.25})) == doctest::Approx(8.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("multinomial resampling") {
  CounterStream s(1, StreamPurpose::kTest, 0, 0, 0);
  for (auto i : multinomial_indices(probs({1, 0, 0, 0}), 50, s)) CHECK(i == 0);

  ScriptedUniform u{{0.65, 0.75}};
  const auto idx = multinomial_indices(probs({0.7, 0.3}), 2, u);
  CHECK(idx == std::vector<std::size_t>{0, 1});

  const int n = 100000, k = 5;
  const auto draws = multinomial_indices(probs({0.2, 0.2, 0.2, 0.2, 0.2}), n, s);
  std::vector<int> counts(k, 0);
  for (auto i : draws) ++counts[i];
  for (int c : counts) CHECK(std::abs(c / double(n) - 0.2) < 5 * std::sqrt(0.2 * 0.8 / n));
}

TEST_CASE("inverse cdf never returns a zero-weight index") {
  const Categorical dist((Eigen::VectorXd(4) << 0.5, 0.5, 0.0, 0.0).finished());
  CHECK(dist.inverse_cdf(std::nextafter(1.0, 0.0)) == 1);
  CHECK(dist.inverse_cdf(1e-300) == 0);
  const Categorical lead((Eigen::VectorXd(3) << 0.0, 1.0, 0.0).finished());
  CHECK(lead.inverse_cdf(1e-300) == 1);
}

TEST_CASE("maximal coupling special cases") {
  CounterStream s(2, StreamPurpose::kTest, 0, 0, 0);
  const auto w = probs({0.1, 0.6, 0.3});
  for (const auto& p : maximal_coupling_indices(w, w, 200, s)) {
    CHECK(p.coupled);
    CHECK(p.fine_index == p.coarse_index);
  }
  CHECK(MaximalCoupling(w, w).overlap() == doctest::Approx(1.0));
  for (const auto& p : maximal_coupling_indices(probs({1, 0}), probs({0, 1}), 200, s)) {
    CHECK(p == IndexPair{0, 1, false});
  }
  CHECK(MaximalCoupling(probs({1, 0}), probs({0, 1})).overlap() == 0.0);
}

TEST_CASE("maximal coupling joint law") {
  const auto wf = probs({0.7, 0.3});
  const auto wc = probs({0.4, 0.6});
  const Eigen::MatrixXd pmf = maximal_coupling_pmf(wf, wc);
  CHECK(pmf(0, 0) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(pmf(0, 1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(pmf(1, 0) == 0.0);
  CHECK(pmf(1, 1) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(MaximalCoupling(wf, wc).overlap() == doctest::Approx(0.7).epsilon(1e-15));

  double coupled = 0.0;
  const Eigen::MatrixXd law = testing::enumerate_joint_law(MaximalCoupling(wf, wc), 2, &coupled);
  CHECK((law - pmf).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(coupled == doctest::Approx(0.7).epsilon(1e-15));

  const Eigen::MatrixXd half = maximal_coupling_pmf(probs({0.5, 0.5}), probs({0.5, 0.5}));
  CHECK(half.isApprox(0.5 * Eigen::MatrixXd::Identity(2, 2)));

  CounterStream s(4, StreamPurpose::kTest, 1, 0, 0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = s.uniform();
      b(i) = s.uniform();
    }
    const auto fa = weights_from_probabilities(a / a.sum());
    const auto fb = weights_from_probabilities(b / b.sum());
    const Eigen::MatrixXd j = maximal_coupling_pmf(fa, fb);
    CHECK((j.rowwise().sum() - fa.normalized).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((j.colwise().sum().transpose() - fb.normalized).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(j.diagonal().sum() >= fa.normalized.cwiseMin(fb.normalized).sum() - 1e-12);
  }
}

TEST_CASE("maximal coupling sampler passes a chi-square test against the pmf") {
  const auto wf = probs({0.1, 0.4, 0.2, 0.3});
  const auto wc = probs({0.25, 0.15, 0.35, 0.25});
  const Eigen::MatrixXd pmf = maximal_coupling_pmf(wf, wc);
  CounterStream s(8, StreamPurpose::kTest, 0, 0, 0);
  const int n = 100000;
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 4);
  int coupled = 0;
  for (const auto& p : maximal_coupling_indices(wf, wc, n, s)) {
    counts(static_cast<Eigen::Index>(p.fine_index), static_cast<Eigen::Index>(p.coarse_index)) += 1;
    coupled += p.coupled;
  }
  double chi2 = 0.0;
  int cells = 0;
  for (Eigen::Index i = 0; i < 4; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) {
      if (pmf(i, j) == 0.0) {
        CHECK(counts(i, j) == 0);
        continue;
      }
      const double expected = n * pmf(i, j);
      chi2 += (counts(i, j) - expected) * (counts(i, j) - expected) / expected;
      ++cells;
    }
  }
  CHECK(chi2 < chi_square_critical(cells - 1));
  const double alpha = wf.normalized.cwiseMin(wc.normalized).sum();
  CHECK(std::abs(coupled / double(n) - alpha) < 5 * std::sqrt(alpha * (1 - alpha) / n));
}

TEST_CASE("sorted coupling") {
  const auto w = probs({0.3, 0.2, 0.5});
  const std::vector<double> xs{0.4, -1.0, 2.0};
  const SortedCoupling same(w, w, xs, xs);
  CounterStream s(5, StreamPurpose::kTest, 0, 0, 0);
  for (int k = 0; k < 100; ++k) {
    const auto p = same.draw(s.uniform());
    CHECK(p.fine_index == p.coarse_index);
    CHECK(p.coupled);
  }

  const auto u2 = probs({0.5, 0.5});
  const std::vector<double> fine{1.0, 3.0}, coarse{5.0, -2.0};
  const auto hi = SortedCoupling(u2, u2, fine, coarse).draw(0.9);
  CHECK(hi.fine_index == 1);
  CHECK(hi.coarse_index == 0);
  CHECK_FALSE(hi.coupled);

  const auto wf = probs({0.1, 0.4, 0.2, 0.3});
  const auto wc = probs({0.25, 0.15, 0.35, 0.25});
  const std::vector<double> fs{0.3, -0.2, 1.5, 0.0}, cs{0.1, 2.0, -1.0, 0.5};
  const int n = 100000;
  std::vector<int> fcount(4, 0), ccount(4, 0);
  for (const auto& p : sorted_coupling_indices(wf, wc, fs, cs, n, s)) {
    ++fcount[p.fine_index];
    ++ccount[p.coarse_index];
  }
  for (int i = 0; i < 4; ++i) {
    const double pf = wf.normalized(i), pc = wc.normalized(i);
    CHECK(std::abs(fcount[i] / double(n) - pf) < 5 * std::sqrt(pf * (1 - pf) / n));
    CHECK(std::abs(ccount[i] / double(n) - pc) < 5 * std::sqrt(pc * (1 - pc) / n));
  }
}
