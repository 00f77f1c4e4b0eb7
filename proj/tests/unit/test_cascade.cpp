#include <gtest/gtest.h>

#include <algorithm>
#include <array>

#include "contagion/cascade.hpp"
#include "contagion/gen.hpp"

using namespace contagion;

namespace {

// Least fixed point of D = D0 u {i : c_i <= (1-R) sum_{j in D} e_ji} by Kleene
// iteration on a dense exposure matrix.
std::vector<BankId> oracle(std::size_t n, const std::vector<std::vector<double>>& e, const std::vector<double>& c,
                           const std::vector<BankId>& initial, double recovery) {
  std::vector<bool> in(n, false);
  for (BankId i : initial) in[i] = true;
  for (std::size_t i = 0; i < n; ++i) in[i] = in[i] || c[i] <= 0.0;
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (in[i]) continue;
      double loss = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (in[j]) loss += (1.0 - recovery) * e[j][i];
      }
      if (c[i] <= loss) {
        in[i] = true;
        changed = true;
      }
    }
  }
  std::vector<BankId> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (in[i]) out.push_back(static_cast<BankId>(i));
  }
  return out;
}

struct Instance {
  FinancialNetwork net;
  std::vector<std::vector<double>> e;
  std::vector<double> c;
};

Instance build(std::size_t n, const std::vector<std::vector<double>>& e, const std::vector<double>& c) {
  std::vector<BankProfile> banks(n);
  for (std::size_t i = 0; i < n; ++i) banks[i] = BankProfile{static_cast<BankId>(i), 1.0, 1.0, 1.0 + 0.5 * i, c[i]};
  std::vector<Edge> edges;
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (e[j][i] > 0.0) edges.push_back(Edge{static_cast<BankId>(j), static_cast<BankId>(i), e[j][i]});
    }
  }
  return {FinancialNetwork(banks, edges), e, c};
}

Instance random_instance(Rng& rng, std::size_t n) {
  std::vector<std::vector<double>> e(n, std::vector<double>(n, 0.0));
  const double density = rng.uniform();
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      if (i != j && rng.bernoulli(density)) e[j][i] = rng.bernoulli(0.5) ? 1.0 : 0.25 + 2.0 * rng.uniform();
    }
  }
  std::vector<double> c(n);
  for (double& x : c) {
    const double u = rng.uniform();
    x = u < 0.05 ? 0.0 : u < 0.1 ? kInfiniteCapital : rng.bernoulli(0.5) ? static_cast<double>(1 + rng.below(3)) : 3.0 * rng.uniform();
  }
  return build(n, e, c);
}

std::vector<BankId> random_subset(Rng& rng, std::size_t n) {
  std::vector<BankId> s;
  const double q = 0.3 * rng.uniform();
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(q)) s.push_back(static_cast<BankId>(i));
  }
  return s;
}

}  // namespace

TEST(CascadeOracle, ExhaustiveThreeBankInstances) {
  // Every edge pattern on 3 banks, exposures in {1, 2}, capitals in {0, 1, 2, 3, inf},
  // every initial set.
  const std::array<std::pair<int, int>, 6> pairs{{{0, 1}, {0, 2}, {1, 0}, {1, 2}, {2, 0}, {2, 1}}};
  const std::array<double, 5> caps{0.0, 1.0, 2.0, 3.0, kInfiniteCapital};
  std::size_t checked = 0;
  for (int mask = 0; mask < 729; ++mask) {  // 3^6: edge absent, exposure 1, exposure 2
    std::vector<std::vector<double>> e(3, std::vector<double>(3, 0.0));
    int m = mask;
    for (const auto& [j, i] : pairs) {
      e[j][i] = static_cast<double>(m % 3);
      m /= 3;
    }
    for (int ci = 0; ci < 125; ++ci) {
      const std::vector<double> c{caps[ci % 5], caps[(ci / 5) % 5], caps[ci / 25]};
      const Instance inst = build(3, e, c);
      CascadeEngine engine(inst.net);
      for (int s = 0; s < 8; ++s) {
        std::vector<BankId> init;
        for (BankId b = 0; b < 3; ++b) {
          if (s >> b & 1) init.push_back(b);
        }
        const auto want = oracle(3, e, c, init, 0.0);
        const auto got = engine.run(init);
        ASSERT_EQ(got.defaulted, want) << "mask=" << mask << " caps=" << ci << " shock=" << s;
        ASSERT_EQ(brute_force_final_set(inst.net, init), want);
        ++checked;
      }
    }
  }
  EXPECT_EQ(checked, 729u * 125u * 8u);
}

TEST(CascadeOracle, RandomSmallInstances) {
  Rng rng(20240601);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + rng.below(12);
    const Instance inst = random_instance(rng, n);
    const auto init = random_subset(rng, n);
    const double recovery = rng.bernoulli(0.3) ? 0.5 * rng.uniform() : 0.0;
    const auto want = oracle(n, inst.e, inst.c, init, recovery);
    const auto got = run_cascade(inst.net, ShockModel::explicit_set(init), recovery);
    ASSERT_EQ(got.defaulted, want) << "instance " << t;
    double s = 0.0;
    for (BankId i : want) s += inst.net.bank(i).importance;
    ASSERT_DOUBLE_EQ(got.total_importance, s);
    std::size_t total = 0;
    for (auto k : got.per_round_sizes) total += k;
    ASSERT_EQ(total, want.size());
  }
}

TEST(CascadeProperties, SequentialOrderInvariance) {
  Rng rng(77);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 2 + rng.below(30);
    const Instance inst = random_instance(rng, n);
    const auto init = random_subset(rng, n);
    const auto ref = run_cascade(inst.net, ShockModel::explicit_set(init)).defaulted;
    for (auto order : {ExpositionOrder::Fifo, ExpositionOrder::Lifo, ExpositionOrder::Random}) {
      const auto seq = run_cascade_sequential(inst.net, init, order, 0.0, static_cast<std::uint64_t>(t));
      ASSERT_EQ(seq.defaulted, ref);
      ASSERT_EQ(seq.exposition_steps, ref.size());
    }
  }
}

TEST(CascadeProperties, MonotoneInShockAndCapital) {
  NetworkConfig cfg;
  cfg.exposures = ExposureLaw::pareto(2.5277, 1.0);
  cfg.capital = MaxExposurePlusEps{};
  const auto net = generate_network(cfg, 3000, 5);
  CascadeEngine engine(net);
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    const auto small = random_subset(rng, net.size());
    auto big = small;
    for (int k = 0; k < 20; ++k) big.push_back(static_cast<BankId>(rng.below(net.size())));
    const auto a = engine.run(small).defaulted;
    const auto b = engine.run(big).defaulted;
    ASSERT_TRUE(std::includes(b.begin(), b.end(), a.begin(), a.end()));

    auto c = net.capitals();
    for (double& x : c) x *= 0.5 + 0.5 * rng.uniform();
    const auto weaker = engine.run(small, 0.0, c).defaulted;
    ASSERT_TRUE(std::includes(weaker.begin(), weaker.end(), a.begin(), a.end()));

    const auto recovered = engine.run(small, 0.4).defaulted;
    ASSERT_TRUE(std::includes(a.begin(), a.end(), recovered.begin(), recovered.end()));
  }
}

TEST(CascadeProperties, ThresholdModelOnUnitExposures) {
  NetworkConfig cfg;
  cfg.capital = FunctionalThreshold{ThresholdRule::power(1.2, 0.3, 1)};
  const auto net = generate_network(cfg, 5000, 21);
  const auto tau = worst_case_thresholds(net);
  const auto init = resolve_shock(ShockModel::uniform(0.02), net.banks(), 3);
  EXPECT_EQ(run_cascade(net, ShockModel::explicit_set(init)).defaulted, threshold_model_final_set(net, tau, init));
}

TEST(CascadeProperties, EngineReuseAndCapitalOverride) {
  NetworkConfig cfg;
  const auto net = generate_network(cfg, 2000, 2);
  CascadeEngine engine(net);
  const auto init = resolve_shock(ShockModel::uniform(0.05), net.banks(), 1);
  const auto first = engine.run(init);
  std::vector<double> none(net.size(), kInfiniteCapital);
  EXPECT_EQ(engine.run(init, 0.0, none).defaulted, init);
  EXPECT_EQ(engine.run(init), first);
  EXPECT_THROW(engine.run(init, 1.0), std::invalid_argument);
  EXPECT_THROW(engine.run(init, 0.0, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST(CascadeProperties, RoundsAreBreadthFirstLayers) {
  // Chain 0 -> 1 -> 2 -> 3 with unit exposures and unit capitals.
  std::vector<BankProfile> b(4);
  for (BankId i = 0; i < 4; ++i) b[i] = BankProfile{i, 1, 1, 1, 1.0};
  FinancialNetwork net(b, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
  const auto r = run_cascade(net, ShockModel::explicit_set({0}));
  EXPECT_EQ(r.rounds, 3u);
  EXPECT_EQ(r.per_round_sizes, (std::vector<std::size_t>{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(r.final_fraction, 1.0);
}

TEST(CascadeProperties, SeedDeterminism) {
  NetworkConfig cfg;
  const auto a = generate_network(cfg, 5000, 99);
  const auto b = generate_network(cfg, 5000, 99, 3);
  EXPECT_EQ(a.edges(), b.edges());
  EXPECT_EQ(run_cascade(a, ShockModel::uniform(0.01), 0.0, 4), run_cascade(b, ShockModel::uniform(0.01), 0.0, 4));
}
