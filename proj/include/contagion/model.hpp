#pragma once

// Domain types shared by every module: bank profiles, the sparse weighted
// exposure digraph, shocks and cascade results.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "contagion/rng.hpp"

namespace contagion {

using BankId = std::uint32_t;

inline constexpr double kInfiniteCapital = std::numeric_limits<double>::infinity();

struct BankProfile {
  BankId id = 0;
  double w_minus = 1.0;     // in-weight
  double w_plus = 1.0;      // out-weight
  double importance = 1.0;  // systemic importance s_i
  double capital = 0.0;     // c_i, may be kInfiniteCapital

  bool operator==(const BankProfile&) const = default;
};

/// Exposure of `creditor` to `debtor`: when the debtor defaults the
/// creditor writes off `exposure`.
struct Edge {
  BankId debtor = 0;
  BankId creditor = 0;
  double exposure = 0.0;

  bool operator==(const Edge&) const = default;
};

/// Immutable sparse exposure network.
///
/// Edges are kept sorted by (debtor, creditor), which doubles as the
/// debtor-grouped adjacency the cascade walks. A second index groups edge
/// positions by creditor for per-creditor exposure lists.
class FinancialNetwork {
 public:
  FinancialNetwork() = default;

  FinancialNetwork(std::vector<BankProfile> banks, std::vector<Edge> edges)
      : banks_(std::move(banks)), edges_(std::move(edges)) {
    const std::size_t n = banks_.size();
    if (n > std::numeric_limits<BankId>::max()) throw std::invalid_argument("too many banks");
    for (const Edge& e : edges_) {
      if (e.debtor >= n || e.creditor >= n) {
        throw std::invalid_argument("edge endpoint out of range: " + std::to_string(e.debtor) +
                                    " -> " + std::to_string(e.creditor));
      }
    }
    if (!std::is_sorted(edges_.begin(), edges_.end(), edge_order)) {
      std::stable_sort(edges_.begin(), edges_.end(), edge_order);
    }
    out_offsets_.assign(n + 1, 0);
    in_offsets_.assign(n + 1, 0);
    for (const Edge& e : edges_) {
      ++out_offsets_[e.debtor + 1];
      ++in_offsets_[e.creditor + 1];
    }
    std::partial_sum(out_offsets_.begin(), out_offsets_.end(), out_offsets_.begin());
    std::partial_sum(in_offsets_.begin(), in_offsets_.end(), in_offsets_.begin());
    in_index_.resize(edges_.size());
    std::vector<std::size_t> cursor(in_offsets_.begin(), in_offsets_.end() - 1);
    // Debtor-major order means each creditor's list comes out sorted by debtor.
    for (std::size_t k = 0; k < edges_.size(); ++k) {
      in_index_[cursor[edges_[k].creditor]++] = static_cast<std::uint32_t>(k);
    }
  }

  [[nodiscard]] std::size_t size() const { return banks_.size(); }
  [[nodiscard]] std::size_t edge_count() const { return edges_.size(); }
  [[nodiscard]] const std::vector<BankProfile>& banks() const { return banks_; }
  [[nodiscard]] const BankProfile& bank(BankId i) const { return banks_[i]; }
  [[nodiscard]] const std::vector<Edge>& edges() const { return edges_; }

  /// Edges whose debtor is i, sorted by creditor.
  [[nodiscard]] std::span<const std::size_t> out_offsets() const { return out_offsets_; }
  [[nodiscard]] std::span<const Edge> out_edges(BankId i) const {
    return {edges_.data() + out_offsets_[i], edges_.data() + out_offsets_[i + 1]};
  }

  /// Positions (into edges()) of the edges whose creditor is i, sorted by debtor.
  [[nodiscard]] std::span<const std::uint32_t> in_edge_positions(BankId i) const {
    return {in_index_.data() + in_offsets_[i], in_index_.data() + in_offsets_[i + 1]};
  }

  [[nodiscard]] std::size_t out_degree(BankId i) const {
    return out_offsets_[i + 1] - out_offsets_[i];
  }
  [[nodiscard]] std::size_t in_degree(BankId i) const {
    return in_offsets_[i + 1] - in_offsets_[i];
  }

  /// Realized exposures of creditor i (its in-edges), in debtor order.
  [[nodiscard]] std::vector<double> exposures_of_creditor(BankId i) const {
    std::vector<double> out;
    out.reserve(in_degree(i));
    for (std::uint32_t pos : in_edge_positions(i)) out.push_back(edges_[pos].exposure);
    return out;
  }

  [[nodiscard]] std::vector<double> capitals() const {
    std::vector<double> c(banks_.size());
    for (std::size_t i = 0; i < banks_.size(); ++i) c[i] = banks_[i].capital;
    return c;
  }

  /// Same topology, exposures and weights with capitals replaced.
  [[nodiscard]] FinancialNetwork with_capitals(std::span<const double> capitals) const {
    if (capitals.size() != banks_.size()) throw std::invalid_argument("capital vector size mismatch");
    FinancialNetwork copy = *this;
    for (std::size_t i = 0; i < banks_.size(); ++i) copy.banks_[i].capital = capitals[i];
    return copy;
  }

  bool operator==(const FinancialNetwork& o) const {
    return banks_ == o.banks_ && edges_ == o.edges_;
  }

 private:
  static bool edge_order(const Edge& a, const Edge& b) {
    return a.debtor != b.debtor ? a.debtor < b.debtor : a.creditor < b.creditor;
  }

  std::vector<BankProfile> banks_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> out_offsets_{0};
  std::vector<std::size_t> in_offsets_{0};
  std::vector<std::uint32_t> in_index_;
};

struct Violation {
  enum class Kind {
    BankIdMismatch,
    NonPositiveWeight,
    NonPositiveImportance,
    InvalidCapital,
    SelfLoop,
    DuplicateEdge,
    NonPositiveExposure,
  };
  Kind kind;
  std::string message;
};

/// All invariant violations; empty iff the network is well formed.
inline std::vector<Violation> validate(const FinancialNetwork& net) {
  std::vector<Violation> out;
  const auto& banks = net.banks();
  for (std::size_t i = 0; i < banks.size(); ++i) {
    const BankProfile& b = banks[i];
    const std::string at = std::to_string(i);
    if (b.id != i) {
      out.push_back({Violation::Kind::BankIdMismatch,
                     "bank at position " + at + " carries id " + std::to_string(b.id)});
    }
    if (!(b.w_minus > 0.0) || !(b.w_plus > 0.0) || !std::isfinite(b.w_minus) ||
        !std::isfinite(b.w_plus)) {
      out.push_back({Violation::Kind::NonPositiveWeight, "non-positive weight at " + at});
    }
    if (!(b.importance > 0.0) || !std::isfinite(b.importance)) {
      out.push_back({Violation::Kind::NonPositiveImportance, "non-positive importance at " + at});
    }
    if (!(b.capital >= 0.0)) {
      out.push_back({Violation::Kind::InvalidCapital, "negative or NaN capital at " + at});
    }
  }
  const auto& edges = net.edges();
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const Edge& e = edges[k];
    if (e.debtor == e.creditor) {
      out.push_back({Violation::Kind::SelfLoop, "self-loop at " + std::to_string(e.debtor)});
    }
    if (k > 0 && edges[k - 1].debtor == e.debtor && edges[k - 1].creditor == e.creditor) {
      out.push_back({Violation::Kind::DuplicateEdge, "duplicate ordered pair (" +
                                                         std::to_string(e.debtor) + "," +
                                                         std::to_string(e.creditor) + ")"});
    }
    if (!(e.exposure > 0.0) || !std::isfinite(e.exposure)) {
      out.push_back({Violation::Kind::NonPositiveExposure,
                     "non-positive exposure on (" + std::to_string(e.debtor) + "," +
                         std::to_string(e.creditor) + ")"});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shocks

struct UniformFraction {
  double p = 0.0;  // floor(p n) banks chosen uniformly without replacement
};

/// The largest banks by in-weight (ties: out-weight, then id).
struct LargestK {
  std::size_t count = 0;
  double fraction = -1.0;  // when >= 0, count = floor(fraction * n)
};

struct ExplicitMask {
  std::vector<BankId> indices;
};

struct ShockModel {
  std::variant<UniformFraction, LargestK, ExplicitMask> kind = UniformFraction{};
  std::uint64_t seed_scope = 0;  // stream key for the random shock draw

  static ShockModel none() { return ShockModel{ExplicitMask{}, 0}; }
  static ShockModel uniform(double p, std::uint64_t scope = 0) {
    return ShockModel{UniformFraction{p}, scope};
  }
  static ShockModel largest_fraction(double p) { return ShockModel{LargestK{0, p}, 0}; }
  static ShockModel largest_count(std::size_t k) { return ShockModel{LargestK{k, -1.0}, 0}; }
  static ShockModel explicit_set(std::vector<BankId> ids) {
    return ShockModel{ExplicitMask{std::move(ids)}, 0};
  }
};

inline std::size_t shocked_count(double p, std::size_t n) {
  // Guard against p*n landing a hair below an integer.
  const double raw = p * static_cast<double>(n);
  const double k = std::floor(raw + 1e-9 * std::max(1.0, raw));
  return static_cast<std::size_t>(std::min<double>(k, static_cast<double>(n)));
}

/// Indices of ex-post defaults, sorted ascending.
inline std::vector<BankId> resolve_shock(const ShockModel& shock, std::span<const BankProfile> banks,
                                         std::uint64_t seed) {
  const std::size_t n = banks.size();
  std::vector<BankId> out;
  if (const auto* u = std::get_if<UniformFraction>(&shock.kind)) {
    if (!(u->p >= 0.0 && u->p <= 1.0)) throw std::invalid_argument("shock fraction outside [0,1]");
    const std::size_t k = shocked_count(u->p, n);
    Rng rng = Rng::stream(seed, {0x5ec0c4ULL, shock.seed_scope});
    std::vector<BankId> perm(n);
    std::iota(perm.begin(), perm.end(), BankId{0});
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(perm[i], perm[j]);
    }
    out.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  } else if (const auto* l = std::get_if<LargestK>(&shock.kind)) {
    std::size_t k = l->count;
    if (l->fraction >= 0.0) {
      if (l->fraction > 1.0) throw std::invalid_argument("shock fraction outside [0,1]");
      k = shocked_count(l->fraction, n);
    }
    k = std::min(k, n);
    std::vector<BankId> order(n);
    std::iota(order.begin(), order.end(), BankId{0});
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](BankId a, BankId b) {
                        if (banks[a].w_minus != banks[b].w_minus) return banks[a].w_minus > banks[b].w_minus;
                        if (banks[a].w_plus != banks[b].w_plus) return banks[a].w_plus > banks[b].w_plus;
                        return a < b;
                      });
    out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  } else {
    const auto& m = std::get<ExplicitMask>(shock.kind);
    for (BankId i : m.indices) {
      if (i >= n) throw std::invalid_argument("shock index out of range: " + std::to_string(i));
    }
    out = m.indices;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Results

struct CascadeResult {
  std::vector<BankId> defaulted;           // final default cluster, ascending
  double total_importance = 0.0;           // sum of s_i over defaulted, ascending id order
  std::size_t rounds = 0;                  // rounds that added at least one default
  std::vector<std::size_t> per_round_sizes;  // [|D_0|, |D_1 \ D_0|, ...]
  double final_fraction = 0.0;

  bool operator==(const CascadeResult&) const = default;
};

/// Sum of importances over `ids`, accumulated in ascending id order.
inline double total_importance_of(std::span<const BankId> ids, std::span<const BankProfile> banks) {
  double s = 0.0;
  for (BankId i : ids) s += banks[i].importance;
  return s;
}

/// Upper-tail bound 1 - F(w) <= (w / K)^(1 - beta) for large w, on both weights.
struct ParetoTailBound {
  double k_minus = 1.0;
  double k_plus = 1.0;
  double beta_minus = 3.0;
  double beta_plus = 3.0;

  void check() const {
    if (!(k_minus > 0.0 && k_plus > 0.0)) throw std::invalid_argument("tail constants must be positive");
    if (!(beta_minus > 2.0 && beta_plus > 2.0)) throw std::invalid_argument("tail exponents must exceed 2");
  }
};

}  // namespace contagion
