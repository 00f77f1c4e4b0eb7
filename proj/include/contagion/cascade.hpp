#pragma once

// Default cascade on a FinancialNetwork.
//
// D_0 holds the shocked banks and every bank with zero capital; bank i joins
// D_k once c_i <= (1 - R) * sum of e_{j,i} over j in D_{k-1}. The engine pops
// each default once and charges its creditors, so a run costs O(n + m).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "contagion/model.hpp"
#include "contagion/rng.hpp"
#include "contagion/threshold.hpp"

namespace contagion {

/// Reusable cascade workspace bound to one network. Not thread-safe; use one
/// engine per worker.
class CascadeEngine {
 public:
  explicit CascadeEngine(const FinancialNetwork& net) : net_(&net) {
    const std::size_t n = net.size();
    slots_.resize(n);
    queue_.reserve(n);
  }

  /// Runs the cascade from `initial` (need not be sorted). `capitals`, when
  /// non-empty, overrides the network's capitals for this run only.
  CascadeResult run(std::span<const BankId> initial, double recovery = 0.0,
                    std::span<const double> capitals = {}) {
    const FinancialNetwork& net = *net_;
    const std::size_t n = net.size();
    if (!(recovery >= 0.0 && recovery < 1.0)) throw std::invalid_argument("recovery must lie in [0,1)");
    if (!capitals.empty() && capitals.size() != n) throw std::invalid_argument("capital vector size mismatch");
    const auto& banks = net.banks();
    const double keep = 1.0 - recovery;

    for (std::size_t i = 0; i < n; ++i) slots_[i] = Slot{capitals.empty() ? banks[i].capital : capitals[i], 0.0};
    queue_.clear();

    auto mark = [&](BankId i) {
      slots_[i].loss = kDefaulted;
      queue_.push_back(i);
    };
    for (BankId i : initial) {
      if (i >= n) throw std::invalid_argument("shock index out of range");
      if (slots_[i].loss != kDefaulted) mark(i);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (slots_[i].loss != kDefaulted && slots_[i].capital <= 0.0) mark(static_cast<BankId>(i));
    }

    // The queue is in BFS order, so rounds are contiguous runs of it.
    CascadeResult res;
    res.per_round_sizes.assign(1, queue_.size());
    std::size_t round_start = 0;
    while (round_start < queue_.size()) {
      const std::size_t round_end = queue_.size();
      sort_ids(round_start, round_end);
      propagate(round_start, round_end, keep, mark);
      if (queue_.size() > round_end) res.per_round_sizes.push_back(queue_.size() - round_end);
      round_start = round_end;
    }

    res.defaulted.reserve(queue_.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (slots_[i].loss == kDefaulted) res.defaulted.push_back(static_cast<BankId>(i));
    }
    res.total_importance = total_importance_of(res.defaulted, banks);
    res.rounds = res.per_round_sizes.size() - 1;
    res.final_fraction = n == 0 ? 0.0 : static_cast<double>(res.defaulted.size()) / static_cast<double>(n);
    return res;
  }

  /// Number of defaults.
  std::size_t count(std::span<const BankId> initial, std::span<const double> capitals = {}) {
    return run(initial, 0.0, capitals).defaulted.size();
  }

  [[nodiscard]] const FinancialNetwork& network() const { return *net_; }

 private:
  // LSD radix sort of queue_[from, to) by id; linear in the range length.
  void sort_ids(std::size_t from, std::size_t to) {
    const std::size_t m = to - from;
    if (m < 2) return;
    BankId* data = queue_.data() + from;
    if (m < 256) {
      std::sort(data, data + m);
      return;
    }
    scratch_.resize(m);
    BankId* src = data;
    BankId* dst = scratch_.data();
    const std::size_t n = net_->size();
    for (unsigned shift = 0; shift < 32 && (std::size_t{1} << shift) < n; shift += kRadixBits) {
      std::array<std::size_t, (1u << kRadixBits) + 1> count{};
      for (std::size_t k = 0; k < m; ++k) ++count[((src[k] >> shift) & kRadixMask) + 1];
      for (std::size_t b = 1; b < count.size(); ++b) count[b] += count[b - 1];
      for (std::size_t k = 0; k < m; ++k) dst[count[(src[k] >> shift) & kRadixMask]++] = src[k];
      std::swap(src, dst);
    }
    if (src != data) std::copy(src, src + m, data);
  }

  template <class Mark>
  void propagate(std::size_t from, std::size_t to, double keep, Mark& mark) {
    const FinancialNetwork& net = *net_;
    for (std::size_t head = from; head < to; ++head) {
      if (head + kOffsetLookahead < to) __builtin_prefetch(net.out_offsets().data() + queue_[head + kOffsetLookahead]);
      if (head + kLookahead < to) __builtin_prefetch(net.out_edges(queue_[head + kLookahead]).data());
      const auto out = net.out_edges(queue_[head]);
      for (std::size_t k = 0; k < out.size(); ++k) {
        if (k + kLookahead < out.size()) __builtin_prefetch(&slots_[out[k + kLookahead].creditor]);
        Slot& s = slots_[out[k].creditor];
        if (s.loss == kDefaulted) continue;
        s.loss += keep * out[k].exposure;
        if (s.capital <= s.loss) mark(out[k].creditor);
      }
    }
  }

  static constexpr std::size_t kLookahead = 4;
  static constexpr std::size_t kOffsetLookahead = 16;
  static constexpr unsigned kRadixBits = 11;
  static constexpr BankId kRadixMask = (1u << kRadixBits) - 1;
  static constexpr double kDefaulted = std::numeric_limits<double>::infinity();

  // Per-bank state kept together so one creditor touch is one cache access.
  struct Slot {
    double capital;
    double loss;  // kDefaulted once the bank is in the cluster
  };

  const FinancialNetwork* net_;
  std::vector<Slot> slots_;
  std::vector<BankId> queue_;
  std::vector<BankId> scratch_;
};

inline CascadeResult run_cascade(const FinancialNetwork& net, const ShockModel& shock,
                                 double recovery = 0.0, std::uint64_t seed = 0) {
  const auto initial = resolve_shock(shock, net.banks(), seed);
  CascadeEngine engine(net);
  return engine.run(initial, recovery);
}

// ---------------------------------------------------------------------------
// Sequential exposition

enum class ExpositionOrder { Fifo, Lifo, Random };

struct SequentialResult {
  std::vector<BankId> defaulted;  // ascending
  double total_importance = 0.0;
  double final_fraction = 0.0;
  std::size_t exposition_steps = 0;
  std::vector<BankId> exposition_order;
};

/// One defaulted-but-unexposed bank at a time, chosen by `order`; its
/// creditors are charged immediately. The final set does not depend on the order.
inline SequentialResult run_cascade_sequential(const FinancialNetwork& net,
                                               std::span<const BankId> initial,
                                               ExpositionOrder order, double recovery = 0.0,
                                               std::uint64_t seed = 0) {
  const std::size_t n = net.size();
  const auto& banks = net.banks();
  const double keep = 1.0 - recovery;
  std::vector<double> loss(n, 0.0);
  std::vector<char> defaulted(n, 0);
  std::vector<BankId> pending;
  auto mark = [&](BankId i) {
    if (!defaulted[i]) {
      defaulted[i] = 1;
      pending.push_back(i);
    }
  };
  for (BankId i : initial) {
    if (i >= n) throw std::invalid_argument("shock index out of range");
    mark(i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (banks[i].capital <= 0.0) mark(static_cast<BankId>(i));
  }

  Rng rng = Rng::stream(seed, {0x5e9ULL});
  SequentialResult res;
  std::size_t fifo_head = 0;
  while (fifo_head < pending.size()) {
    BankId v;
    switch (order) {
      case ExpositionOrder::Fifo:
        v = pending[fifo_head++];
        break;
      case ExpositionOrder::Lifo:
        v = pending.back();
        pending.pop_back();
        break;
      case ExpositionOrder::Random: {
        const std::size_t k = fifo_head + rng.below(pending.size() - fifo_head);
        std::swap(pending[k], pending.back());
        v = pending.back();
        pending.pop_back();
        break;
      }
    }
    res.exposition_order.push_back(v);
    for (const Edge& e : net.out_edges(v)) {
      if (defaulted[e.creditor]) continue;
      loss[e.creditor] += keep * e.exposure;
      if (banks[e.creditor].capital <= loss[e.creditor]) mark(e.creditor);
    }
  }
  res.exposition_steps = res.exposition_order.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (defaulted[i]) res.defaulted.push_back(static_cast<BankId>(i));
  }
  res.total_importance = total_importance_of(res.defaulted, banks);
  res.final_fraction = n == 0 ? 0.0 : static_cast<double>(res.defaulted.size()) / static_cast<double>(n);
  return res;
}

// ---------------------------------------------------------------------------
// Oracle

inline constexpr std::size_t kBruteForceLimit = 20;

/// Least fixed point by rescanning every bank against D_{k-1} until stable.
inline std::vector<BankId> brute_force_final_set(const FinancialNetwork& net,
                                                 std::span<const BankId> initial,
                                                 double recovery = 0.0) {
  const std::size_t n = net.size();
  if (n > kBruteForceLimit) throw std::invalid_argument("brute force oracle limited to n <= 20");
  const auto& banks = net.banks();
  std::vector<char> in_prev(n, 0);
  for (BankId i : initial) {
    if (i >= n) throw std::invalid_argument("shock index out of range");
    in_prev[i] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (banks[i].capital <= 0.0) in_prev[i] = 1;
  }
  const std::vector<char> shocked = in_prev;
  for (std::size_t round = 0; round < n; ++round) {
    std::vector<char> next = shocked;
    for (std::size_t i = 0; i < n; ++i) {
      double written_off = 0.0;
      for (const Edge& e : net.edges()) {
        if (e.creditor == i && in_prev[e.debtor]) written_off += (1.0 - recovery) * e.exposure;
      }
      if (banks[i].capital <= written_off) next[i] = 1;
    }
    if (next == in_prev) break;
    in_prev = std::move(next);
  }
  std::vector<BankId> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (in_prev[i]) out.push_back(static_cast<BankId>(i));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Thresholds

/// Threshold-model default rule: i defaults once at least tau_i of its
/// debtors have. Used to cross-check the exposure engine on unit exposures.
inline std::vector<BankId> threshold_model_final_set(const FinancialNetwork& net,
                                                     std::span<const Threshold> tau,
                                                     std::span<const BankId> initial) {
  const std::size_t n = net.size();
  std::vector<std::uint64_t> hits(n, 0);
  std::vector<char> defaulted(n, 0);
  std::vector<BankId> queue;
  for (BankId i : initial) {
    if (!defaulted[i]) {
      defaulted[i] = 1;
      queue.push_back(i);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!defaulted[i] && tau[i] == Threshold(0)) {
      defaulted[i] = 1;
      queue.push_back(static_cast<BankId>(i));
    }
  }
  for (std::size_t h = 0; h < queue.size(); ++h) {
    for (const Edge& e : net.out_edges(queue[h])) {
      if (defaulted[e.creditor]) continue;
      if (Threshold(++hits[e.creditor]) >= tau[e.creditor]) {
        defaulted[e.creditor] = 1;
        queue.push_back(e.creditor);
      }
    }
  }
  std::vector<BankId> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (defaulted[i]) out.push_back(static_cast<BankId>(i));
  }
  return out;
}

}  // namespace contagion
