#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "contagion/gen.hpp"

using namespace contagion;

TEST(Weights, DeterministicAndParetoMarginal) {
  WeightLaw law;
  const auto a = sample_weights(law, 50000, 17);
  const auto b = sample_weights(law, 50000, 17);
  EXPECT_EQ(a.w_minus, b.w_minus);
  EXPECT_EQ(a.w_plus, b.w_plus);
  // P(W- > 3) = 3^(1 - 2.132)
  const double q = std::pow(3.0, 1.0 - 2.132);
  const auto above = std::count_if(a.w_minus.begin(), a.w_minus.end(), [](double w) { return w > 3.0; });
  EXPECT_NEAR(static_cast<double>(above) / 50000, q, 5 * std::sqrt(q * (1 - q) / 50000));
  EXPECT_GE(*std::min_element(a.w_plus.begin(), a.w_plus.end()), 1.0);
}

TEST(Weights, ComonotoneCouplingIsRankPreserving) {
  const auto w = sample_weights(WeightLaw{}, 2000, 2);
  const double ex = (2.132 - 1.0) / (2.8861 - 1.0);
  for (std::size_t i = 0; i < w.w_minus.size(); ++i) {
    ASSERT_NEAR(w.w_plus[i], std::pow(w.w_minus[i], ex), 1e-9 * w.w_plus[i]);
  }
}

TEST(Weights, IndependentCouplingIsUncorrelatedInRank) {
  WeightLaw law;
  law.dependence = Dependence::Independent;
  const auto w = sample_weights(law, 20000, 8);
  // Kendall-type check on a coarse split: P(both above median) ~ 1/4.
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
  };
  const double mm = median(w.w_minus), mp = median(w.w_plus);
  std::size_t both = 0;
  for (std::size_t i = 0; i < w.w_minus.size(); ++i) both += w.w_minus[i] > mm && w.w_plus[i] > mp;
  EXPECT_NEAR(static_cast<double>(both) / 20000, 0.25, 0.015);
}

TEST(Edges, NoSelfLoopsSortedAndWorkerInvariant) {
  const auto w = sample_weights(WeightLaw{}, 3000, 4);
  const auto a = sample_edges(w.w_minus, w.w_plus, 4, 1);
  const auto b = sample_edges(w.w_minus, w.w_plus, 4, 3);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_TRUE(std::adjacent_find(a.begin(), a.end()) == a.end());
  for (const auto& [i, j] : a) ASSERT_NE(i, j);
}

TEST(Edges, PairFrequenciesMatchConnectionProbabilities) {
  // Small fixed weights; every ordered pair is checked against min{1, w+_i w-_j / n}.
  const std::vector<double> wm{1.0, 2.0, 8.0, 1.5, 3.0};
  const std::vector<double> wp{2.0, 1.0, 0.5, 4.0, 1.0};
  const std::size_t n = wm.size();
  const int reps = 20000;
  std::map<std::pair<BankId, BankId>, int> hits;
  for (int r = 0; r < reps; ++r) {
    for (const auto& e : sample_edges(wm, wp, static_cast<std::uint64_t>(r))) ++hits[e];
  }
  for (BankId i = 0; i < n; ++i) {
    for (BankId j = 0; j < n; ++j) {
      if (i == j) continue;
      const double p = std::min(1.0, wp[i] * wm[j] / static_cast<double>(n));
      const double freq = static_cast<double>(hits[{i, j}]) / reps;
      EXPECT_NEAR(freq, p, 5 * std::sqrt(p * (1 - p) / reps) + 1e-12) << i << "->" << j;
    }
  }
}

TEST(Edges, MeanOutDegreeMatchesExpectation) {
  const auto w = sample_weights(WeightLaw{}, 20000, 6);
  const auto sk = sample_edges(w.w_minus, w.w_plus, 6);
  std::vector<double> deg(w.w_minus.size(), 0.0);
  for (const auto& e : sk) deg[e.first] += 1.0;
  double want = 0.0;
  for (std::size_t i = 0; i < 2000; ++i) want += expected_out_degree(w.w_minus, w.w_plus, i);
  const double got = std::accumulate(deg.begin(), deg.begin() + 2000, 0.0);
  EXPECT_NEAR(got, want, 5 * std::sqrt(want));
}

TEST(Capitals, RobustIsTopExposuresPlusEps) {
  const std::vector<double> e{0.5, 3.0, 1.0, 2.0};
  EXPECT_DOUBLE_EQ(capital_requirement_robust(e, Threshold(3), 0.1), 3.0 + 2.0 + 0.1);
  EXPECT_DOUBLE_EQ(capital_requirement_robust(e, Threshold(2), 0.1), 3.1);
  EXPECT_DOUBLE_EQ(capital_requirement_robust(e, Threshold(9), 0.0), 6.5);
  EXPECT_TRUE(std::isinf(capital_requirement_robust(e, Threshold::infinite(), 0.0)));
  EXPECT_THROW((void)capital_requirement_robust(e, Threshold(1), 0.0), std::invalid_argument);
}

TEST(Capitals, AverageIsMaxOfScaledMeanAndLargestPlusEps) {
  const std::vector<double> e{0.5, 3.0};
  EXPECT_DOUBLE_EQ(capital_requirement_average(Threshold(2), 1.0, e, 0.1), 3.1);
  EXPECT_DOUBLE_EQ(capital_requirement_average(Threshold(5), 1.0, e, 0.1), 5.0);
  EXPECT_DOUBLE_EQ(capital_requirement_average(Threshold(2), 1.0, {}, 0.1), 2.0);
}

TEST(Capitals, RulesAgainstDirectComputation) {
  NetworkConfig cfg;
  cfg.exposures = ExposureLaw::pareto(2.5, 1.0);
  const auto base = generate_network(cfg, 400, 12);
  const ThresholdRule tau = ThresholdRule::power(1.5, 0.4, 2);
  const double eps = 1e-3 * cfg.exposures.mean();
  const auto robust = assign_capitals(base, RobustTopK{tau, -1.0}, cfg.exposures);
  const auto maxexp = assign_capitals(base, MaxExposurePlusEps{}, cfg.exposures);
  const auto thr = assign_capitals(base, FunctionalThreshold{tau}, cfg.exposures);
  for (BankId i = 0; i < base.size(); ++i) {
    auto e = base.exposures_of_creditor(i);
    std::sort(e.rbegin(), e.rend());
    const auto t = tau(base.bank(i).w_minus).value();
    double s = eps;
    for (std::size_t k = 0; k + 1 < t && k < e.size(); ++k) s += e[k];
    ASSERT_NEAR(robust[i], s, 1e-12 * s);
    ASSERT_NEAR(maxexp[i], (e.empty() ? 0.0 : e[0]) + eps, 1e-15);
    ASSERT_EQ(thr[i], static_cast<double>(t));
  }
}

TEST(Capitals, ExposureDrawsArePerPair) {
  const auto law = ExposureLaw::pareto(2.5, 1.0);
  EXPECT_EQ(exposure_draw(law, 3, 1, 2), exposure_draw(law, 3, 1, 2));
  EXPECT_NE(exposure_draw(law, 3, 1, 2), exposure_draw(law, 3, 2, 1));
  EXPECT_EQ(exposure_draw(ExposureLaw::unit(), 3, 1, 2), 1.0);
}

TEST(Thresholds, HypotheticalUsesRealizedExposuresFirst) {
  // Bank 0 is exposed to banks 1 and 2 with 0.4 and 0.7.
  std::vector<BankProfile> b(3);
  for (BankId i = 0; i < 3; ++i) b[i] = BankProfile{i, 1, 1, 1, 1.0};
  FinancialNetwork net(b, {{1, 0, 0.4}, {2, 0, 0.7}});
  const auto tau = hypothetical_thresholds(net, ExposureLaw::unit(), 1);
  EXPECT_EQ(tau[0], Threshold(2));
  // No realized in-exposures: unit draws, capital 1 reached on the first.
  EXPECT_EQ(tau[1], Threshold(1));
  const auto worst = worst_case_thresholds(net);
  EXPECT_EQ(worst[0], Threshold(2));
  EXPECT_EQ(worst[1], Threshold::infinite());
}

TEST(Thresholds, ComputeThreshold) {
  const std::vector<double> e{0.5, 0.5, 0.5};
  EXPECT_EQ(compute_threshold(1.0, e), Threshold(2));
  EXPECT_EQ(compute_threshold(0.0, e), Threshold(0));
  EXPECT_EQ(compute_threshold(2.0, e), Threshold::infinite());
  EXPECT_EQ(compute_threshold(kInfiniteCapital, e), Threshold::infinite());
}
