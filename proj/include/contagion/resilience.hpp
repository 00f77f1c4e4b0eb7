#pragma once

// Resilience classification, critical exponents, amplification and buffers.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "contagion/analysis.hpp"
#include "contagion/gen.hpp"
#include "contagion/parallel.hpp"
#include "contagion/quadrature.hpp"
#include "contagion/threshold.hpp"

namespace contagion {

struct CriticalExponents {
  double gamma_c = 0.0;
  double alpha_c = 0.0;
  double beta_minus = 0.0;
  double beta_plus = 0.0;
  double w_min_minus = 1.0;
  double w_min_plus = 1.0;
};

inline CriticalExponents critical_exponents(double beta_minus, double beta_plus, double w_min_minus = 1.0,
                                            double w_min_plus = 1.0) {
  if (!(beta_minus > 2.0 && beta_plus > 2.0)) throw std::invalid_argument("Pareto exponents must exceed 2");
  if (!(w_min_minus > 0.0 && w_min_plus > 0.0)) throw std::invalid_argument("minimal weights must be positive");
  CriticalExponents ce{0.0, 0.0, beta_minus, beta_plus, w_min_minus, w_min_plus};
  ce.gamma_c = 2.0 + (beta_minus - 1.0) / (beta_plus - 1.0) - beta_minus;
  ce.alpha_c = (beta_plus - 1.0) / (beta_plus - 2.0) * w_min_plus * std::pow(w_min_minus, 1.0 - ce.gamma_c);
  return ce;
}

/// Upper tail dependence of (W-, W+): the coefficient lambda and, when it
/// exists, the profile Lambda(x).
struct TailDependence {
  std::optional<double> lambda;
  std::function<double(double)> Lambda;
  std::optional<Dependence> coupling;  // enables moment-based checks

  static TailDependence comonotone() {
    return {1.0, [](double x) { return std::min(1.0, x); }, Dependence::Comonotone};
  }
  static TailDependence independent() {
    return {0.0, [](double) { return 0.0; }, Dependence::Independent};
  }
  static TailDependence marginals_only() { return {}; }
};

/// w_min+ (w_min-)^(1-gamma_c) * int_0^inf Lambda(x^(1-beta+)) dx.
inline double alpha_c_of_Lambda(const std::function<double(double)>& Lambda, double beta_plus, double w_min_minus,
                                double w_min_plus, double gamma_c) {
  if (!(beta_plus > 2.0)) throw std::invalid_argument("beta+ must exceed 2");
  // Domination Lambda(y) <= min{1, y} keeps the integral finite.
  for (double y = 1e-12; y <= 1e3; y *= 1.7) {
    const double l = Lambda(y);
    if (!(l >= -1e-15) || l > std::min(1.0, y) * (1.0 + 1e-9) + 1e-15) {
      throw std::invalid_argument("Lambda is not dominated by min{1, x}; integral may diverge");
    }
  }
  QuadratureOptions opt{1e-14, 1e-12, 400};
  const double e = 1.0 - beta_plus;
  // [0,1] directly; [1, inf) through x = e^u.
  auto head = [&](double x) { return Lambda(x == 0.0 ? std::numeric_limits<double>::infinity() : std::pow(x, e)); };
  double total = integrate_adaptive(head, 0.0, 1.0, opt).value;
  double u = 0.0;
  for (int k = 0; k < 400; ++k) {
    auto tail = [&](double v) { return std::exp(v) * Lambda(std::exp(e * v)); };
    const double part = integrate_adaptive(tail, u, u + 2.0, opt).value;
    total += part;
    u += 2.0;
    if (std::abs(part) < 1e-16 * std::max(1.0, std::abs(total))) break;
    if (k == 399) throw std::invalid_argument("alpha_c(Lambda) integral does not converge");
  }
  return w_min_plus * std::pow(w_min_minus, 1.0 - gamma_c) * total;
}

enum class Verdict { Resilient, NonResilient, Indeterminate };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Resilient: return "resilient";
    case Verdict::NonResilient: return "non-resilient";
    case Verdict::Indeterminate: return "indeterminate";
  }
  return "?";
}

struct ResilienceVerdict {
  Verdict verdict = Verdict::Indeterminate;
  std::string rule;
  std::vector<std::pair<std::string, double>> evidence;
  std::vector<double> mesh;
  std::string note;

  [[nodiscard]] std::optional<double> get(const std::string& key) const {
    for (const auto& [k, v] : evidence) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
};

struct ClassifyOptions {
  double w_max = 1e8;
  double window = 100.0;       // liminf/limsup taken over [w_max / window, w_max]
  std::size_t mesh_points = 4001;
  double rel_tol = 1e-3;
  double gamma_tol = 1e-12;
  bool allow_tau_one = false;  // contagious-link relaxation
};

struct TailRatio {
  double liminf;
  double limsup;
  std::vector<double> mesh;
};

/// min and max of w^-gamma tau(w) over a geometric tail mesh.
inline TailRatio tail_ratio(const ThresholdRule& tau, double gamma, const ClassifyOptions& opt) {
  TailRatio r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(), {}};
  const double lo = std::log(opt.w_max / opt.window);
  const double hi = std::log(opt.w_max);
  for (std::size_t k = 0; k < opt.mesh_points; ++k) {
    const double w = std::exp(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(opt.mesh_points - 1));
    const Threshold t = tau(w);
    const double v = t.is_infinite() ? std::numeric_limits<double>::infinity()
                                     : std::pow(w, -gamma) * static_cast<double>(t.value());
    r.liminf = std::min(r.liminf, v);
    r.limsup = std::max(r.limsup, v);
  }
  r.mesh = {std::exp(lo), std::exp(hi), static_cast<double>(opt.mesh_points)};
  return r;
}

namespace detail {

/// E[W- W+ 1{tau(W-) = 1}] for Pareto marginals under the given coupling.
inline double contagious_link_moment(const CriticalExponents& ce, const ThresholdRule& tau, Dependence coupling) {
  AnalyticPareto a;
  a.beta_minus = ce.beta_minus;
  a.beta_plus = ce.beta_plus;
  a.w_min_minus = ce.w_min_minus;
  a.w_min_plus = ce.w_min_plus;
  a.tau = tau;
  a.coupling = coupling;
  return FixedPointFunctions(LimitDistribution{a, 0.0}).moment_threshold_one(false).value;
}

inline bool strictly_greater(double a, double b, double rel) { return a > b + rel * std::abs(b); }
inline bool strictly_less(double a, double b, double rel) { return a < b - rel * std::abs(b); }

}  // namespace detail

/// Threshold-rule criteria in order: gamma_c < 0; gamma_c = 0 with
/// liminf tau > alpha_c + 1; gamma_c > 0 with liminf w^-gamma_c tau > alpha_c;
/// then the coupling-dependent rules via alpha_c(Lambda) or lambda; then the
/// moment criterion for weights without tail dependence.
inline ResilienceVerdict classify_by_threshold_rule(const CriticalExponents& ce, const ThresholdRule& tau,
                                                    const TailDependence& tail = TailDependence::marginals_only(),
                                                    const ClassifyOptions& opt = {}) {
  ResilienceVerdict v;
  v.evidence = {{"gamma_c", ce.gamma_c}, {"alpha_c", ce.alpha_c}};
  double alpha_c = ce.alpha_c;

  // Smallest threshold on the weight range.
  Threshold tmin = Threshold::infinite();
  for (double w = ce.w_min_minus; w <= opt.w_max; w = std::max(w * 1.01, tau.next_break(w))) {
    tmin = std::min(tmin, tau(w));
    if (tau.is_increasing_power() && tmin >= Threshold(2)) break;
    if (std::isinf(tau.next_break(w))) break;
  }
  if (tmin < Threshold(2)) {
    if (!opt.allow_tau_one) throw std::invalid_argument("threshold rule takes values below 2");
    if (tmin == Threshold(0)) throw std::invalid_argument("threshold rule takes the value 0");
    if (!tail.coupling) throw std::invalid_argument("contagious-link relaxation needs a known coupling");
    const double m = detail::contagious_link_moment(ce, tau, *tail.coupling);
    v.evidence.emplace_back("E[W-W+1{tau=1}]", m);
    if (!(m < 1.0)) throw std::invalid_argument("E[W-W+1{tau(W-)=1}] >= 1: relaxation not applicable");
    alpha_c /= (1.0 - m);
    v.evidence.emplace_back("alpha_c_adjusted", alpha_c);
  }

  if (ce.gamma_c < -opt.gamma_tol) {
    v.verdict = Verdict::Resilient;
    v.rule = "gamma_c<0";
    return v;
  }
  if (std::abs(ce.gamma_c) <= opt.gamma_tol) {
    const TailRatio r = tail_ratio(tau, 0.0, opt);
    v.mesh = r.mesh;
    v.evidence.emplace_back("liminf_tau", r.liminf);
    if (detail::strictly_greater(r.liminf, alpha_c + 1.0, opt.rel_tol)) {
      v.verdict = Verdict::Resilient;
      v.rule = "gamma_c=0:liminf_tau>alpha_c+1";
      return v;
    }
    v.rule = "gamma_c=0:inconclusive";
    return v;
  }

  const TailRatio r = tail_ratio(tau, ce.gamma_c, opt);
  v.mesh = r.mesh;
  v.evidence.emplace_back("liminf", r.liminf);
  v.evidence.emplace_back("limsup", r.limsup);
  if (detail::strictly_greater(r.liminf, alpha_c, opt.rel_tol)) {
    v.verdict = Verdict::Resilient;
    v.rule = "gamma_c>0:liminf>alpha_c";
    return v;
  }
  if (tail.Lambda) {
    double acl = alpha_c_of_Lambda(tail.Lambda, ce.beta_plus, ce.w_min_minus, ce.w_min_plus, ce.gamma_c);
    if (alpha_c != ce.alpha_c) acl *= alpha_c / ce.alpha_c;
    v.evidence.emplace_back("alpha_c_Lambda", acl);
    if (acl > 0.0 && detail::strictly_less(r.limsup, acl, opt.rel_tol)) {
      v.verdict = Verdict::NonResilient;
      v.rule = "Lambda:limsup<alpha_c(Lambda)";
      return v;
    }
    // Not used for a vanishing profile.
    if (acl > 0.0 && detail::strictly_greater(r.liminf, acl, opt.rel_tol)) {
      v.verdict = Verdict::Resilient;
      v.rule = "Lambda:liminf>alpha_c(Lambda)";
      return v;
    }
  } else if (tail.lambda) {
    const double bound = *tail.lambda * (ce.beta_plus - 2.0) / (ce.beta_plus - 1.0) * alpha_c;
    v.evidence.emplace_back("lambda_bound", bound);
    if (detail::strictly_less(r.limsup, bound, opt.rel_tol)) {
      v.verdict = Verdict::NonResilient;
      v.rule = "lambda:limsup<lambda*alpha_c*(beta+-2)/(beta+-1)";
      return v;
    }
  }
  if (tail.coupling == Dependence::Independent) {
    // E[W+ (W-)^(1-g)] < inf for some g in (0, gamma_c]: liminf w^-g tau > 0 suffices.
    for (double frac : {1e-3, 1e-2, 0.1, 0.5, 1.0}) {
      const double g = frac * ce.gamma_c;
      const double mean_plus = ce.w_min_plus * (ce.beta_plus - 1.0) / (ce.beta_plus - 2.0);
      // Numerical moment of (W-)^(1-g): integrate the density in doubling chunks.
      const PowerKernel k{(ce.beta_minus - 1.0) * std::pow(ce.w_min_minus, ce.beta_minus - 1.0),
                          1.0 - g - ce.beta_minus};
      double moment = 0.0;
      bool finite = false;
      for (double w = ce.w_min_minus; w < 1e300; w *= 2.0) {
        const double part = k.mass(w, 2.0 * w);
        moment += part;
        if (part < 1e-14 * moment) {
          finite = true;
          break;
        }
      }
      if (!finite) continue;
      const TailRatio rg = tail_ratio(tau, g, opt);
      if (rg.liminf > opt.rel_tol) {
        v.evidence.emplace_back("moment_gamma", g);
        v.evidence.emplace_back("E[W+(W-)^(1-gamma)]", mean_plus * moment);
        v.evidence.emplace_back("liminf_gamma", rg.liminf);
        v.verdict = Verdict::Resilient;
        v.rule = "no-tail-dependence:moment";
        return v;
      }
    }
  }
  v.rule = "inconclusive";
  return v;
}

/// Same structure with the tail constants K+- in place of w_min+-; only the
/// resilient direction is available.
inline ResilienceVerdict classify_by_tail_bounds(const ParetoTailBound& b, const ThresholdRule& tau,
                                                 const ClassifyOptions& opt = {}) {
  b.check();
  const CriticalExponents ce = critical_exponents(b.beta_minus, b.beta_plus, b.k_minus, b.k_plus);
  ResilienceVerdict v = classify_by_threshold_rule(ce, tau, TailDependence::marginals_only(), opt);
  if (v.verdict == Verdict::NonResilient) {
    v.verdict = Verdict::Indeterminate;
    v.rule = "tail-bound:inconclusive";
  }
  return v;
}

struct FixedPointClassifyOptions {
  std::vector<double> mesh{1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6};
};

/// Conditions near z = 0 on a declared mesh: f > 0 on (0, z0) gives
/// non-resilience with damage at least g(z0); d < 0 or f < 0 near 0 gives resilience.
inline ResilienceVerdict classify_by_fixed_point(const FixedPointFunctions& fns,
                                                 const FixedPointClassifyOptions& opt = {}) {
  if (fns.mass_threshold_zero() > 0.0) throw std::invalid_argument("classification needs an unshocked system");
  ResilienceVerdict v;
  std::vector<double> mesh = opt.mesh;
  std::sort(mesh.begin(), mesh.end());
  v.mesh = mesh;
  std::vector<double> fv, dv;
  for (double z : mesh) {
    fv.push_back(fns.f(z).value);
    dv.push_back(fns.d(z).value);
  }
  std::size_t f_pos = 0;
  while (f_pos < mesh.size() && fv[f_pos] > 0.0) ++f_pos;
  std::size_t d_neg = 0;
  while (d_neg < mesh.size() && dv[d_neg] < 0.0) ++d_neg;
  std::size_t f_neg = 0;
  while (f_neg < mesh.size() && fv[f_neg] < 0.0) ++f_neg;
  if (f_pos >= 3) {
    const double z0 = mesh[f_pos - 1];
    v.verdict = Verdict::NonResilient;
    v.rule = "f>0 on (0,z0)";
    v.evidence = {{"z0", z0}, {"damage_lower_bound", fns.g(z0).value}};
    return v;
  }
  if (d_neg >= 3) {
    v.verdict = Verdict::Resilient;
    v.rule = "d<0 on (0,z0)";
    v.evidence = {{"z0", mesh[d_neg - 1]}};
    return v;
  }
  if (f_neg >= 3) {
    v.verdict = Verdict::Resilient;
    v.rule = "inf{f<0}=0";
    v.evidence = {{"z_last_negative", mesh[f_neg - 1]}};
    return v;
  }
  v.rule = "inconclusive";
  return v;
}

// ---------------------------------------------------------------------------
// Amplification

struct AmplificationEstimate {
  double kappa = 0.0;
  double kappa_s = 0.0;
  double factor = 0.0;
  std::optional<double> closed_form_factor;
  std::vector<double> mesh;
  std::vector<double> kappa_seq;
  std::vector<double> kappa_s_seq;
};

namespace detail {
inline double stable_limit(const std::vector<double>& seq) {
  for (std::size_t k = 0; k + 2 < seq.size(); ++k) {
    const double a = seq[k], b = seq[k + 1], c = seq[k + 2];
    const double s = std::max({std::abs(a), std::abs(b), std::abs(c), 1e-300});
    if (std::abs(a - b) <= 1e-4 * s && std::abs(b - c) <= 1e-4 * s) return c;
  }
  return seq.back();
}
}  // namespace detail

inline AmplificationEstimate amplification(const FixedPointFunctions& fns,
                                           std::vector<double> mesh = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
  if (fns.mass_threshold_zero() > 0.0) throw std::invalid_argument("amplification needs the unshocked system");
  AmplificationEstimate a;
  a.mesh = mesh;
  for (double z : mesh) {
    a.kappa_seq.push_back(fns.d(z).value);
    a.kappa_s_seq.push_back(fns.kappa_s_integrand(z).value);
  }
  a.kappa = detail::stable_limit(a.kappa_seq);
  a.kappa_s = detail::stable_limit(a.kappa_s_seq);
  if (!(a.kappa < 0.0)) throw std::domain_error("kappa >= 0: amplification undefined (non-resilient regime)");
  a.factor = 1.0 - a.kappa_s * fns.mean_w_plus() / (a.kappa * fns.mean_s());
  const double m11 = fns.moment_threshold_one(false).value;
  if (m11 < 1.0) {
    a.closed_form_factor = 1.0 + fns.mean_w_plus() * fns.moment_threshold_one(true).value / (1.0 - m11);
  }
  return a;
}

// ---------------------------------------------------------------------------
// Minimal buffer

struct BufferBase {
  double beta_minus = 2.132;
  double beta_plus = 2.8861;
  double w_min_minus = 1.0;
  double w_min_plus = 1.0;
};

struct BufferOptions {
  std::size_t samples = 400;   // scan of f on [0, E[W+]]
  double delta_hi = 2.0;
  double coarse_step = 0.02;
  double delta_tol = 1e-5;
};

struct BufferResult {
  bool found = false;
  double delta = std::numeric_limits<double>::quiet_NaN();
  std::string message;
};

/// Whether the shocked f dips below zero before its first hump: some sample
/// before the first local maximum is negative, or the refined first local
/// minimum is.
inline bool hump_negative(const FixedPointFunctions& fns, std::size_t samples) {
  const double zmax = fns.mean_w_plus();
  const double h = zmax / static_cast<double>(samples);
  auto f = [&](double z) { return fns.f(z).value; };
  double f_prev2 = f(0.0);
  if (f_prev2 < 0.0) return true;
  double f_prev = f(h);
  if (f_prev < 0.0) return true;
  bool past_min = false;
  for (std::size_t i = 2; i <= samples; ++i) {
    const double z = h * static_cast<double>(i);
    const double fz = f(z);
    if (fz < 0.0) return true;
    if (!past_min && f_prev < f_prev2 && f_prev <= fz) {
      past_min = true;
      auto [zm, fm] = detail::golden_min(f, z - 2.0 * h, z, 1e-9);
      if (fm < 0.0) return true;
    } else if (f_prev > f_prev2 && f_prev >= fz) {
      return false;
    }
    f_prev2 = f_prev;
    f_prev = fz;
  }
  return false;
}

inline FixedPointFunctions buffered_functions(const BufferBase& base, double delta, double p, ShockKind kind) {
  const CriticalExponents ce = critical_exponents(base.beta_minus, base.beta_plus, base.w_min_minus, base.w_min_plus);
  AnalyticPareto a;
  a.beta_minus = base.beta_minus;
  a.beta_plus = base.beta_plus;
  a.w_min_minus = base.w_min_minus;
  a.w_min_plus = base.w_min_plus;
  a.tau = ThresholdRule::buffered(ce.alpha_c, ce.gamma_c, delta);
  a.shock_p = p;
  a.shock = kind;
  QuadratureOptions q;
  q.rel_tol = 1e-9;
  return FixedPointFunctions(LimitDistribution{a, 0.0}, q);
}

/// Least delta in [0, delta_hi] for which the shocked system keeps its
/// negative hump: coarse upward scan for the first success, then bisection.
inline BufferResult min_buffer_delta(double p, ShockKind kind, const BufferBase& base = {},
                                     const BufferOptions& opt = {}) {
  if (!(p > 0.0 && p <= 0.05)) throw std::invalid_argument("shock fraction must lie in (0, 0.05]");
  auto pred = [&](double delta) { return hump_negative(buffered_functions(base, delta, p, kind), opt.samples); };
  BufferResult res;
  double lo = 0.0;
  if (pred(lo)) return {true, 0.0, "resilient without buffer"};
  double hi = lo;
  bool found = false;
  while (hi < opt.delta_hi) {
    hi = std::min(opt.delta_hi, hi + opt.coarse_step);
    if (pred(hi)) {
      found = true;
      break;
    }
    lo = hi;
  }
  if (!found) {
    res.message = "predicate never true within [0, " + std::to_string(opt.delta_hi) + "]";
    return res;
  }
  auto [a, b] = detail::bisect_predicate(pred, lo, hi, opt.delta_tol);
  return {true, 0.5 * (a + b), ""};
}

// ---------------------------------------------------------------------------
// Capital requirements per bank

struct CapitalRow {
  BankId id = 0;
  double w_minus = 0.0;
  Threshold tau;
  double mu = 0.0;
  double requirement = 0.0;
  bool mu_estimated = false;
};

enum class RequirementKind { Robust, Average, NoContagiousLinks };

/// One row per bank, computed from that bank's own in-exposures and weight.
/// mu is the law's mean when known, else the bank's realized mean (flagged).
inline std::vector<CapitalRow> capital_requirements(const FinancialNetwork& net, RequirementKind kind,
                                                    const ThresholdRule& tau, double eps,
                                                    std::optional<double> mu_known) {
  std::vector<CapitalRow> rows;
  rows.reserve(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto id = static_cast<BankId>(i);
    CapitalRow r;
    r.id = id;
    r.w_minus = net.bank(id).w_minus;
    const auto ex = net.exposures_of_creditor(id);
    if (mu_known) {
      r.mu = *mu_known;
    } else {
      r.mu_estimated = true;
      double s = 0.0;
      for (double x : ex) s += x;
      r.mu = ex.empty() ? 0.0 : s / static_cast<double>(ex.size());
    }
    switch (kind) {
      case RequirementKind::NoContagiousLinks:
        r.tau = Threshold(2);
        r.requirement = capital_requirement_robust(ex, r.tau, eps);
        break;
      case RequirementKind::Robust:
        r.tau = tau(r.w_minus);
        r.requirement = capital_requirement_robust(ex, r.tau, eps);
        break;
      case RequirementKind::Average:
        r.tau = tau(r.w_minus);
        r.requirement = r.mu > 0.0 ? capital_requirement_average(r.tau, r.mu, ex, eps) : eps;
        break;
    }
    rows.push_back(r);
  }
  return rows;
}

}  // namespace contagion
