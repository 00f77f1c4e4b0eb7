#pragma once

// Random financial networks: vertex weights, edge skeletons with
// p_ij = min{1, w+_i w-_j / n}, i.i.d. per-creditor exposures and capital rules.

#include <algorithm>
#include <functional>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "contagion/model.hpp"
#include "contagion/parallel.hpp"
#include "contagion/rng.hpp"
#include "contagion/threshold.hpp"

namespace contagion {

namespace stream_tag {
inline constexpr std::uint64_t kWeights = 0x77e16475ULL;
inline constexpr std::uint64_t kEdges = 0xed6e5ULL;
inline constexpr std::uint64_t kExposure = 0xe8905e7ULL;
inline constexpr std::uint64_t kShock = 0x5ec0c4ULL;
}  // namespace stream_tag

// ---------------------------------------------------------------------------
// Weights

struct ParetoLaw {
  double beta = 3.0;
  double x_min = 1.0;
};
struct EmpiricalLaw {
  std::vector<double> values;
};
struct ConstantLaw {
  double value = 1.0;
};

using Marginal = std::variant<ParetoLaw, EmpiricalLaw, ConstantLaw>;

enum class Dependence { Comonotone, Independent };

inline double marginal_mean(const Marginal& m) {
  if (const auto* p = std::get_if<ParetoLaw>(&m)) {
    if (p->beta <= 2.0) return std::numeric_limits<double>::infinity();
    return p->x_min * (p->beta - 1.0) / (p->beta - 2.0);
  }
  if (const auto* e = std::get_if<EmpiricalLaw>(&m)) {
    return std::accumulate(e->values.begin(), e->values.end(), 0.0) /
           static_cast<double>(e->values.size());
  }
  return std::get<ConstantLaw>(m).value;
}

inline void check_marginal(const Marginal& m) {
  if (const auto* p = std::get_if<ParetoLaw>(&m)) {
    if (!(p->beta > 1.0)) throw std::invalid_argument("Pareto exponent must exceed 1");
    if (!(p->x_min > 0.0)) throw std::invalid_argument("Pareto minimum must be positive");
  } else if (const auto* e = std::get_if<EmpiricalLaw>(&m)) {
    if (e->values.empty()) throw std::invalid_argument("empirical law needs at least one value");
    for (double v : e->values) {
      if (!(v > 0.0)) throw std::invalid_argument("empirical values must be positive");
    }
  } else if (!(std::get<ConstantLaw>(m).value > 0.0)) {
    throw std::invalid_argument("constant value must be positive");
  }
}

/// Quantile at upper-tail probability v in (0, 1]: v = 1 gives the minimum.
/// Empirical laws must have their values sorted ascending.
inline double upper_quantile(const Marginal& m, double v) {
  if (const auto* p = std::get_if<ParetoLaw>(&m)) return p->x_min * std::pow(v, -1.0 / (p->beta - 1.0));
  if (const auto* e = std::get_if<EmpiricalLaw>(&m)) {
    const std::size_t k = e->values.size();
    auto idx = static_cast<std::size_t>((1.0 - v) * static_cast<double>(k));
    return e->values[std::min(idx, k - 1)];
  }
  return std::get<ConstantLaw>(m).value;
}

struct WeightLaw {
  Marginal in = ParetoLaw{2.132, 1.0};
  Marginal out = ParetoLaw{2.8861, 1.0};
  Dependence dependence = Dependence::Comonotone;
};

struct Weights {
  std::vector<double> w_minus;
  std::vector<double> w_plus;
};

inline Weights sample_weights(WeightLaw law, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("need at least one bank");
  check_marginal(law.in);
  check_marginal(law.out);
  for (Marginal* m : {&law.in, &law.out}) {
    if (auto* e = std::get_if<EmpiricalLaw>(m)) std::sort(e->values.begin(), e->values.end());
  }
  Weights w;
  w.w_minus.resize(n);
  w.w_plus.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(seed, {stream_tag::kWeights, i});
    const double u = rng.uniform_open_left();
    const double v = law.dependence == Dependence::Comonotone ? u : rng.uniform_open_left();
    w.w_minus[i] = upper_quantile(law.in, u);
    w.w_plus[i] = upper_quantile(law.out, v);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Edge skeleton

/// Ordered pairs (debtor i, creditor j), sorted.
using Skeleton = std::vector<std::pair<BankId, BankId>>;

/// Independent Bernoulli(min{1, w+_i w-_j / n}) for every ordered pair i != j.
///
/// Targets are visited in decreasing in-weight, so along one source the
/// probabilities are nonincreasing; candidates are reached by geometric
/// skips at the current probability and thinned by the ratio to the next one.
/// Expected cost O(n + m). Each source has its own stream.
inline Skeleton sample_edges(std::span<const double> w_minus, std::span<const double> w_plus,
                             std::uint64_t seed, std::size_t workers = 1) {
  const std::size_t n = w_minus.size();
  if (w_plus.size() != n) throw std::invalid_argument("weight vectors differ in length");
  std::vector<BankId> order(n);
  std::iota(order.begin(), order.end(), BankId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](BankId a, BankId b) { return w_minus[a] > w_minus[b]; });
  std::vector<double> sorted_w(n);
  for (std::size_t k = 0; k < n; ++k) sorted_w[k] = w_minus[order[k]];
  const double inv_n = 1.0 / static_cast<double>(n);

  auto sample_source = [&](std::size_t i, std::vector<std::pair<BankId, BankId>>& out) {
    const std::size_t first = out.size();
    Rng rng = Rng::stream(seed, {stream_tag::kEdges, i});
    const double wp = w_plus[i] * inv_n;
    std::size_t k = 0;
    double p = std::min(1.0, wp * sorted_w[0]);
    while (k < n && p > 0.0) {
      if (p < 1.0) {
        const std::uint64_t skip = rng.geometric(p);
        if (skip >= n - k) break;
        k += static_cast<std::size_t>(skip);
      }
      const double q = std::min(1.0, wp * sorted_w[k]);
      if (q >= p || rng.uniform() < q / p) {
        if (order[k] != i) out.emplace_back(static_cast<BankId>(i), order[k]);
      }
      p = q;
      ++k;
    }
    std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end());
  };

  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::size_t>(n, 64 * workers));
  std::vector<Skeleton> parts(chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t lo = n * c / chunks;
    const std::size_t hi = n * (c + 1) / chunks;
    for (std::size_t i = lo; i < hi; ++i) sample_source(i, parts[c]);
  });
  Skeleton edges;
  std::size_t total = 0;
  for (const auto& part : parts) total += part.size();
  edges.reserve(total);
  for (auto& part : parts) edges.insert(edges.end(), part.begin(), part.end());
  return edges;
}

/// sum_{j != i} min{1, w+_i w-_j / n}: the exact expected out-degree of i.
inline double expected_out_degree(std::span<const double> w_minus, std::span<const double> w_plus,
                                  std::size_t i) {
  const double n = static_cast<double>(w_minus.size());
  double s = 0.0;
  for (std::size_t j = 0; j < w_minus.size(); ++j) {
    if (j != i) s += std::min(1.0, w_plus[i] * w_minus[j] / n);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Exposures

struct ExposureLaw {
  Marginal law = ConstantLaw{1.0};

  static ExposureLaw unit() { return {}; }
  static ExposureLaw pareto(double xi, double e_min) { return {ParetoLaw{xi, e_min}}; }
  static ExposureLaw empirical(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    return {EmpiricalLaw{std::move(values)}};
  }

  [[nodiscard]] double mean() const { return marginal_mean(law); }
};

/// Exposure of creditor j to debtor i. Every ordered pair owns a stream, so
/// realized and hypothetical exposures are one and the same i.i.d. family.
inline double exposure_draw(const ExposureLaw& law, std::uint64_t seed, BankId creditor,
                            BankId debtor) {
  if (const auto* c = std::get_if<ConstantLaw>(&law.law)) return c->value;
  Rng rng = Rng::stream(seed, {stream_tag::kExposure, creditor, debtor});
  const double v = rng.uniform_open_left();
  return upper_quantile(law.law, v);
}

// ---------------------------------------------------------------------------
// Capitals

struct ConstantThreshold {
  Threshold tau{2};
};
/// c_i = tau(w-_i): threshold model with a weight-dependent threshold.
struct FunctionalThreshold {
  ThresholdRule tau;
};
struct MaxExposurePlusEps {
  double eps = -1.0;  // negative: 1e-3 times the mean exposure
};
struct RobustTopK {
  ThresholdRule tau;
  double eps = -1.0;
};
struct AverageBased {
  ThresholdRule tau;
  double eps = -1.0;
};
struct ExplicitCapitals {
  std::vector<double> capitals;
};

using CapitalRuleSpec = std::variant<ConstantThreshold, FunctionalThreshold, MaxExposurePlusEps,
                                     RobustTopK, AverageBased, ExplicitCapitals>;

inline std::string capital_rule_name(const CapitalRuleSpec& r) {
  static const char* names[] = {"constant-threshold", "functional-threshold", "max-exposure-plus-eps",
                                "robust-top-k",       "average-based",        "explicit"};
  return names[r.index()];
}

inline double default_eps(const ExposureLaw& law) { return 1e-3 * law.mean(); }

/// Sum of the (tau - 1) largest exposures plus eps; all of them if fewer.
inline double capital_requirement_robust(std::span<const double> exposures, Threshold tau, double eps) {
  if (tau < Threshold(2)) throw std::invalid_argument("robust requirement needs tau >= 2");
  if (tau.is_infinite()) return kInfiniteCapital;
  std::vector<double> e(exposures.begin(), exposures.end());
  const std::size_t k = std::min<std::size_t>(e.size(), tau.value() - 1);
  std::partial_sort(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(k), e.end(), std::greater<>());
  double s = 0.0;
  for (std::size_t j = 0; j < k; ++j) s += e[j];
  return s + eps;
}

/// max{tau mu, largest exposure + eps}.
inline double capital_requirement_average(Threshold tau, double mu, std::span<const double> exposures,
                                          double eps) {
  if (tau < Threshold(2)) throw std::invalid_argument("average requirement needs tau >= 2");
  if (!(mu > 0.0)) throw std::invalid_argument("mean exposure must be positive");
  if (tau.is_infinite()) return kInfiniteCapital;
  double mx = 0.0;
  for (double x : exposures) mx = std::max(mx, x);
  const double floor = exposures.empty() ? eps : mx + eps;
  return std::max(static_cast<double>(tau.value()) * mu, floor);
}

inline double threshold_capital(Threshold t) {
  return t.is_infinite() ? kInfiniteCapital : static_cast<double>(t.value());
}

/// Capitals for every bank of `net` from its realized in-exposures.
inline std::vector<double> assign_capitals(const FinancialNetwork& net, const CapitalRuleSpec& rule,
                                           const ExposureLaw& law) {
  const std::size_t n = net.size();
  std::vector<double> c(n);
  const double eps_default = default_eps(law);
  auto eps_of = [&](double e) { return e < 0.0 ? eps_default : e; };
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, ExplicitCapitals>) {
          if (r.capitals.size() != n) throw std::invalid_argument("explicit capital list has wrong length");
          c = r.capitals;
        } else {
          for (std::size_t i = 0; i < n; ++i) {
            const auto id = static_cast<BankId>(i);
            const double wm = net.bank(id).w_minus;
            if constexpr (std::is_same_v<R, ConstantThreshold>) {
              c[i] = threshold_capital(r.tau);
            } else if constexpr (std::is_same_v<R, FunctionalThreshold>) {
              c[i] = threshold_capital(r.tau(wm));
            } else if constexpr (std::is_same_v<R, MaxExposurePlusEps>) {
              double mx = 0.0;
              for (std::uint32_t pos : net.in_edge_positions(id)) mx = std::max(mx, net.edges()[pos].exposure);
              c[i] = mx + eps_of(r.eps);
            } else if constexpr (std::is_same_v<R, RobustTopK>) {
              c[i] = capital_requirement_robust(net.exposures_of_creditor(id), r.tau(wm), eps_of(r.eps));
            } else if constexpr (std::is_same_v<R, AverageBased>) {
              c[i] = capital_requirement_average(r.tau(wm), law.mean(), net.exposures_of_creditor(id),
                                                 eps_of(r.eps));
            }
          }
        }
      },
      rule);
  for (double x : c) {
    if (!(x >= 0.0)) throw std::invalid_argument("capital rule produced a negative capital");
  }
  return c;
}

struct NetworkConfig {
  WeightLaw weights;
  ExposureLaw exposures;
  CapitalRuleSpec capital = ConstantThreshold{};
  double importance = 1.0;  // s_i for every bank
};

/// Attaches exposures (one draw per realized edge from the creditor's law)
/// and capitals to a skeleton.
inline FinancialNetwork sample_exposures_and_capitals(const Weights& w, const Skeleton& skeleton,
                                                      const ExposureLaw& exposures,
                                                      const CapitalRuleSpec& capital,
                                                      std::uint64_t seed, double importance = 1.0) {
  check_marginal(exposures.law);
  if (const auto* e = std::get_if<EmpiricalLaw>(&exposures.law)) {
    if (!std::is_sorted(e->values.begin(), e->values.end())) {
      return sample_exposures_and_capitals(w, skeleton, ExposureLaw::empirical(e->values), capital, seed,
                                           importance);
    }
  }
  const std::size_t n = w.w_minus.size();
  std::vector<BankProfile> banks(n);
  for (std::size_t i = 0; i < n; ++i) {
    banks[i] = BankProfile{static_cast<BankId>(i), w.w_minus[i], w.w_plus[i], importance, 0.0};
  }
  std::vector<Edge> edges;
  edges.reserve(skeleton.size());
  for (const auto& [i, j] : skeleton) edges.push_back(Edge{i, j, exposure_draw(exposures, seed, j, i)});
  FinancialNetwork net(std::move(banks), std::move(edges));
  const auto c = assign_capitals(net, capital, exposures);
  return net.with_capitals(c);
}

/// Full pipeline: weights, skeleton, exposures, capitals.
inline FinancialNetwork generate_network(const NetworkConfig& cfg, std::size_t n, std::uint64_t seed,
                                         std::size_t workers = 1) {
  const Weights w = sample_weights(cfg.weights, n, seed);
  const Skeleton sk = sample_edges(w.w_minus, w.w_plus, seed, workers);
  return sample_exposures_and_capitals(w, sk, cfg.exposures, cfg.capital, seed, cfg.importance);
}

/// Thresholds tau_i under the natural enumeration of potential debtors
/// (ascending id, skipping i): realized exposures where the edge exists,
/// the pair's own draw from the creditor law otherwise; scaled by (1 - R).
inline std::vector<Threshold> hypothetical_thresholds(const FinancialNetwork& net,
                                                      const ExposureLaw& law, std::uint64_t seed,
                                                      double recovery = 0.0) {
  const std::size_t n = net.size();
  const double keep = 1.0 - recovery;
  std::vector<Threshold> tau(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = static_cast<BankId>(i);
    const auto positions = net.in_edge_positions(id);
    std::size_t cursor = 0;
    BankId next_debtor = 0;
    tau[i] = compute_threshold(net.bank(id).capital, n - 1, [&] {
      if (next_debtor == id) ++next_debtor;
      const BankId j = next_debtor++;
      while (cursor < positions.size() && net.edges()[positions[cursor]].debtor < j) ++cursor;
      if (cursor < positions.size() && net.edges()[positions[cursor]].debtor == j) {
        return keep * net.edges()[positions[cursor]].exposure;
      }
      return keep * exposure_draw(law, seed, id, j);
    });
  }
  return tau;
}

/// Thresholds when the realized exposures arrive largest first: the fewest
/// debtor defaults that can bring bank i down.
inline std::vector<Threshold> worst_case_thresholds(const FinancialNetwork& net, double recovery = 0.0) {
  std::vector<Threshold> tau(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto e = net.exposures_of_creditor(static_cast<BankId>(i));
    std::sort(e.begin(), e.end(), std::greater<>());
    for (double& x : e) x *= 1.0 - recovery;
    tau[i] = compute_threshold(net.bank(static_cast<BankId>(i)).capital, e);
  }
  return tau;
}

}  // namespace contagion
