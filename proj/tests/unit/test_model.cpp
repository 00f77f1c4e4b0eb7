#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "contagion/model.hpp"

using namespace contagion;

namespace {

std::vector<BankProfile> banks(std::size_t n, double capital = 1.0) {
  std::vector<BankProfile> b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = BankProfile{static_cast<BankId>(i), 1.0 + i, 2.0 + i, 1.0, capital};
  return b;
}

}  // namespace

TEST(Model, EdgesSortedAndIndexed) {
  FinancialNetwork net(banks(4), {{2, 0, 1.5}, {0, 3, 1.0}, {0, 1, 2.0}, {3, 0, 0.5}});
  ASSERT_EQ(net.edge_count(), 4u);
  EXPECT_TRUE(std::is_sorted(net.edges().begin(), net.edges().end(), [](const Edge& a, const Edge& b) {
    return std::pair(a.debtor, a.creditor) < std::pair(b.debtor, b.creditor);
  }));
  EXPECT_EQ(net.out_degree(0), 2u);
  EXPECT_EQ(net.in_degree(0), 2u);
  EXPECT_EQ(net.out_edges(0)[0].creditor, 1u);
  auto e0 = net.exposures_of_creditor(0);
  EXPECT_EQ(e0, (std::vector<double>{1.5, 0.5}));
  EXPECT_TRUE(validate(net).empty());
}

TEST(Model, RejectsOutOfRangeEndpoints) {
  EXPECT_THROW(FinancialNetwork(banks(2), {{0, 2, 1.0}}), std::invalid_argument);
}

TEST(Model, ValidateReportsEveryViolation) {
  auto b = banks(3);
  b[1].id = 7;
  b[2].w_plus = 0.0;
  b[0].capital = -1.0;
  FinancialNetwork net(b, {{0, 0, 1.0}, {1, 2, 1.0}, {1, 2, 2.0}, {2, 1, -3.0}});
  std::set<Violation::Kind> kinds;
  for (const auto& v : validate(net)) kinds.insert(v.kind);
  EXPECT_EQ(kinds, (std::set<Violation::Kind>{Violation::Kind::BankIdMismatch, Violation::Kind::NonPositiveWeight,
                                              Violation::Kind::InvalidCapital, Violation::Kind::SelfLoop,
                                              Violation::Kind::DuplicateEdge,
                                              Violation::Kind::NonPositiveExposure}));
}

TEST(Model, WithCapitalsReplacesOnlyCapitals) {
  FinancialNetwork net(banks(3), {{0, 1, 1.0}});
  const std::vector<double> c{5.0, kInfiniteCapital, 0.0};
  const auto m = net.with_capitals(c);
  EXPECT_EQ(m.capitals(), c);
  EXPECT_EQ(m.edges(), net.edges());
  EXPECT_EQ(m.bank(1).w_minus, net.bank(1).w_minus);
}

TEST(Shock, UniformCountAndDeterminism) {
  const auto b = banks(1000);
  const auto s = ShockModel::uniform(0.013, 4);
  const auto a = resolve_shock(s, b, 11);
  EXPECT_EQ(a.size(), 13u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(a, resolve_shock(s, b, 11));
  EXPECT_NE(a, resolve_shock(s, b, 12));
  EXPECT_NE(a, resolve_shock(ShockModel::uniform(0.013, 5), b, 11));
}

TEST(Shock, ShockedCountIsFloor) {
  EXPECT_EQ(shocked_count(0.01, 10000), 100u);
  EXPECT_EQ(shocked_count(0.07, 100), 7u);
  EXPECT_EQ(shocked_count(0.0199, 100), 1u);
  EXPECT_EQ(shocked_count(1.0, 5), 5u);
}

TEST(Shock, LargestByInWeightThenOutWeightThenId) {
  std::vector<BankProfile> b(5);
  const double wm[] = {3, 9, 9, 1, 9};
  const double wp[] = {1, 2, 5, 1, 2};
  for (BankId i = 0; i < 5; ++i) b[i] = BankProfile{i, wm[i], wp[i], 1.0, 1.0};
  EXPECT_EQ(resolve_shock(ShockModel::largest_count(2), b, 0), (std::vector<BankId>{1, 2}));
  EXPECT_EQ(resolve_shock(ShockModel::largest_count(3), b, 0), (std::vector<BankId>{1, 2, 4}));
  EXPECT_EQ(resolve_shock(ShockModel::largest_fraction(0.2), b, 0), (std::vector<BankId>{2}));
}

TEST(Shock, ExplicitDeduplicatesAndChecksRange) {
  const auto b = banks(4);
  EXPECT_EQ(resolve_shock(ShockModel::explicit_set({3, 1, 3}), b, 0), (std::vector<BankId>{1, 3}));
  EXPECT_THROW(resolve_shock(ShockModel::explicit_set({4}), b, 0), std::invalid_argument);
  EXPECT_THROW(resolve_shock(ShockModel::uniform(1.5), b, 0), std::invalid_argument);
  EXPECT_TRUE(resolve_shock(ShockModel::none(), b, 0).empty());
}
