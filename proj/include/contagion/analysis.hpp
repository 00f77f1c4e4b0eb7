#pragma once

// Asymptotic fixed-point machinery:
//   f(z) = E[W+ psi_T(W- z)] - z
//   d(z) = E[W- W+ phi_T(W- z)] - 1
//   g(z) = E[S psi_T(W- z)]
// for Pareto weights (by quadrature) or an equal-mass sample of atoms.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "contagion/gen.hpp"
#include "contagion/model.hpp"
#include "contagion/poisson.hpp"
#include "contagion/quadrature.hpp"
#include "contagion/threshold.hpp"

namespace contagion {

enum class ShockKind { Uniform, Largest };

/// Pareto weights W- ~ Par(beta-, w_min-), W+ ~ Par(beta+, w_min+), T = tau(W-),
/// S constant. The shock marks a fraction p of banks as defaulted: uniformly,
/// or the top-p quantile of W-.
struct AnalyticPareto {
  double beta_minus = 2.132;
  double beta_plus = 2.8861;
  double w_min_minus = 1.0;
  double w_min_plus = 1.0;
  ThresholdRule tau = ThresholdRule::constant(Threshold(2));
  double shock_p = 0.0;
  ShockKind shock = ShockKind::Uniform;
  Dependence coupling = Dependence::Comonotone;
  double importance = 1.0;
};

struct Atom {
  double w_minus = 1.0;
  double w_plus = 1.0;
  double s = 1.0;
  Threshold t{2};
};

struct EmpiricalSample {
  std::vector<Atom> atoms;
  double shock_p = 0.0;
  ShockKind shock = ShockKind::Uniform;
};

struct LimitDistribution {
  std::variant<AnalyticPareto, EmpiricalSample> rep = AnalyticPareto{};
  double recovery = 0.0;  // exposures scaled by (1 - R) before thresholds apply
};

/// Unit exposures scaled by (1 - R): tau defaults become ceil(tau / (1 - R)).
inline Threshold apply_recovery(Threshold t, double recovery) {
  if (recovery == 0.0 || t.is_infinite() || t.value() == 0) return t;
  const double v = std::ceil(static_cast<double>(t.value()) / (1.0 - recovery) - 1e-9);
  if (!(v < 1.8e19)) return Threshold::infinite();
  return Threshold(static_cast<std::uint64_t>(v));
}

/// Atoms from a realized network: weights, importances and hypothetical thresholds.
inline EmpiricalSample empirical_from_network(const FinancialNetwork& net, const ExposureLaw& law,
                                              std::uint64_t seed) {
  EmpiricalSample s;
  const auto tau = hypothetical_thresholds(net, law, seed);
  s.atoms.reserve(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto& b = net.bank(static_cast<BankId>(i));
    s.atoms.push_back(Atom{b.w_minus, b.w_plus, b.importance, tau[i]});
  }
  return s;
}

/// Power-law integrand C w^e on the real line above some cut.
struct PowerKernel {
  double c = 0.0;
  double e = 0.0;

  [[nodiscard]] double mass(double a, double b) const {
    if (!(b > a) || c == 0.0) return 0.0;
    const double e1 = e + 1.0;
    if (std::isinf(b)) {
      if (e1 >= 0.0) return std::numeric_limits<double>::infinity();
      return c * std::pow(a, e1) / -e1;
    }
    if (std::abs(e1) < 1e-14) return c * std::log(b / a);
    return c * (std::pow(b, e1) - std::pow(a, e1)) / e1;
  }
};

class FixedPointFunctions {
 public:
  enum class Mode { Quadrature, MonteCarloAtoms };

  explicit FixedPointFunctions(LimitDistribution dist, QuadratureOptions opt = {})
      : dist_(std::move(dist)), opt_(opt) {
    if (!(dist_.recovery >= 0.0 && dist_.recovery < 1.0)) throw std::invalid_argument("recovery must lie in [0,1)");
    if (auto* a = std::get_if<AnalyticPareto>(&dist_.rep)) {
      if (!(a->beta_minus > 2.0 && a->beta_plus > 2.0)) {
        throw std::invalid_argument("non-integrable configuration: Pareto exponents must exceed 2");
      }
      if (!(a->w_min_minus > 0.0 && a->w_min_plus > 0.0)) throw std::invalid_argument("minimal weights must be positive");
      if (!(a->shock_p >= 0.0 && a->shock_p <= 1.0)) throw std::invalid_argument("shock fraction outside [0,1]");
      if (!(a->importance > 0.0)) throw std::invalid_argument("importance must be positive");
      setup_analytic(*a);
    } else {
      auto& s = std::get<EmpiricalSample>(dist_.rep);
      if (s.atoms.empty()) throw std::invalid_argument("empirical sample needs atoms");
      if (!(s.shock_p >= 0.0 && s.shock_p <= 1.0)) throw std::invalid_argument("shock fraction outside [0,1]");
      setup_atoms(s);
    }
  }

  [[nodiscard]] Mode mode() const {
    return std::holds_alternative<AnalyticPareto>(dist_.rep) ? Mode::Quadrature : Mode::MonteCarloAtoms;
  }
  [[nodiscard]] const LimitDistribution& distribution() const { return dist_; }

  [[nodiscard]] double mean_w_plus() const { return mean_w_plus_; }
  [[nodiscard]] double mean_w_minus() const { return mean_w_minus_; }
  [[nodiscard]] double mean_s() const { return mean_s_; }
  [[nodiscard]] double shock_p() const { return shock_p_; }

  Estimate f(double z) const {
    check_z(z);
    Estimate r = psi_part(Which::WPlus, z);
    r.value -= z;
    return r;
  }

  Estimate d(double z) const {
    check_z(z);
    Estimate r = phi_part(Which::WMinusWPlus, z);
    r.value -= 1.0;
    return r;
  }

  Estimate g(double z) const {
    check_z(z);
    return psi_part(Which::S, z);
  }

  /// E[W- S phi_T(W- z)], the quantity whose small-z limit is kappa_S.
  Estimate kappa_s_integrand(double z) const {
    check_z(z);
    return phi_part(Which::WMinusS, z);
  }

  /// E[W+ psi_T(W- z)] without the shock (T as configured).
  Estimate unshocked_f_part(double z) const {
    check_z(z);
    return raw_psi(Which::WPlus, z);
  }

  /// E[q 1{T = 1}] for q = W- W+ (which = 0) or q = W- (which = 1); unshocked.
  [[nodiscard]] Estimate moment_threshold_one(bool w_minus_only) const {
    const Which w = w_minus_only ? Which::WMinus : Which::WMinusWPlus;
    if (analytic_) return analytic_indicator_one(w);
    std::vector<double> vals;
    vals.reserve(atoms_.size());
    for (const Atom& a : atoms_) vals.push_back(a.t == Threshold(1) ? atom_weight(a, w) : 0.0);
    return mean_and_se(vals);
  }

  /// P(T = 0) after the shock is folded in.
  [[nodiscard]] double mass_threshold_zero() const {
    if (analytic_) {
      const double base = apply_recovery(analytic_->tau(analytic_->w_min_minus), dist_.recovery) == Threshold(0) ? 1.0 : 0.0;
      return shock_p_ + (1.0 - shock_p_) * base;
    }
    double m = 0.0;
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      const double zero = atoms_[k].t == Threshold(0) ? 1.0 : 0.0;
      m += atom_shock_[k] + (1.0 - atom_shock_[k]) * zero;
    }
    return m / static_cast<double>(atoms_.size());
  }

  /// Same distribution with a different shock.
  [[nodiscard]] FixedPointFunctions with_shock(double p, ShockKind kind) const {
    LimitDistribution d = dist_;
    if (auto* a = std::get_if<AnalyticPareto>(&d.rep)) {
      a->shock_p = p;
      a->shock = kind;
    } else {
      auto& s = std::get<EmpiricalSample>(d.rep);
      s.shock_p = p;
      s.shock = kind;
    }
    return FixedPointFunctions(std::move(d), opt_);
  }

 private:
  enum class Which { WPlus, WMinusWPlus, S, WMinusS, WMinus };
  enum class Kern { Psi, Phi };

  static void check_z(double z) {
    if (!(z >= 0.0)) throw std::domain_error("z must be non-negative");
  }

  // ---- analytic -----------------------------------------------------------

  void setup_analytic(const AnalyticPareto& a) {
    analytic_ = a;
    shock_p_ = a.shock_p;
    mean_w_plus_ = a.w_min_plus * (a.beta_plus - 1.0) / (a.beta_plus - 2.0);
    mean_w_minus_ = a.w_min_minus * (a.beta_minus - 1.0) / (a.beta_minus - 2.0);
    mean_s_ = a.importance;
    const double bm = a.beta_minus;
    const double m = a.w_min_minus;
    const double dens_c = (bm - 1.0) * std::pow(m, bm - 1.0);
    const double ex = (bm - 1.0) / (a.beta_plus - 1.0);
    // Comonotone: W+ = w_min+ (W- / w_min-)^ex.
    const double wp_c = a.w_min_plus * std::pow(m, -ex);
    if (a.coupling == Dependence::Comonotone) {
      k_wplus_ = {dens_c * wp_c, ex - bm};
      k_wmwp_ = {dens_c * wp_c, ex + 1.0 - bm};
    } else {
      k_wplus_ = {dens_c * mean_w_plus_, -bm};
      k_wmwp_ = {dens_c * mean_w_plus_, 1.0 - bm};
    }
    k_s_ = {dens_c * a.importance, -bm};
    k_wms_ = {dens_c * a.importance, 1.0 - bm};
    k_wm_ = {dens_c, 1.0 - bm};
    w_cut_ = std::numeric_limits<double>::infinity();
    if (a.shock == ShockKind::Largest && a.shock_p > 0.0) {
      w_cut_ = m * std::pow(a.shock_p, -1.0 / (bm - 1.0));
    }
  }

  [[nodiscard]] PowerKernel kernel(Which w) const {
    switch (w) {
      case Which::WPlus: return k_wplus_;
      case Which::WMinusWPlus: return k_wmwp_;
      case Which::S: return k_s_;
      case Which::WMinusS: return k_wms_;
      case Which::WMinus: return k_wm_;
    }
    return {};
  }

  [[nodiscard]] double full_mean(Which w) const {
    switch (w) {
      case Which::WPlus: return mean_w_plus_;
      case Which::S: return mean_s_;
      default: return kernel(w).mass(analytic_->w_min_minus, std::numeric_limits<double>::infinity());
    }
  }

  Estimate psi_part(Which w, double z) const {
    if (analytic_) {
      if (analytic_->shock == ShockKind::Uniform) {
        Estimate r = integrate_kernel(kernel(w), Kern::Psi, z, analytic_->w_min_minus, w_cut_);
        r.value = (1.0 - shock_p_) * r.value + shock_p_ * full_mean(w);
        r.error *= (1.0 - shock_p_);
        return r;
      }
      Estimate r = integrate_kernel(kernel(w), Kern::Psi, z, analytic_->w_min_minus, w_cut_);
      r.value += kernel(w).mass(w_cut_, std::numeric_limits<double>::infinity());
      return r;
    }
    return atoms_mean(w, Kern::Psi, z, true);
  }

  Estimate phi_part(Which w, double z) const {
    if (analytic_) {
      Estimate r = integrate_kernel(kernel(w), Kern::Phi, z, analytic_->w_min_minus, w_cut_);
      if (analytic_->shock == ShockKind::Uniform) {
        r.value *= (1.0 - shock_p_);
        r.error *= (1.0 - shock_p_);
      }
      return r;
    }
    return atoms_mean(w, Kern::Phi, z, true);
  }

  Estimate raw_psi(Which w, double z) const {
    if (analytic_) {
      return integrate_kernel(kernel(w), Kern::Psi, z, analytic_->w_min_minus, std::numeric_limits<double>::infinity());
    }
    return atoms_mean(w, Kern::Psi, z, false);
  }

  [[nodiscard]] Threshold t_at(double w) const { return apply_recovery(analytic_->tau(w), dist_.recovery); }

  [[nodiscard]] bool saturation_is_final() const {
    const ThresholdRule& r = analytic_->tau;
    return !(r.kind() == ThresholdRule::Kind::Power && r.gamma() >= 1.0);
  }

  static constexpr double kLogNegligible = -40.0;

  // psi_k (or phi_k) is below e^-40 for every x up to x_hi.
  static bool lower_negligible(Kern kind, Threshold t, double x_hi) {
    if (t.is_infinite()) return true;
    const auto k = static_cast<double>(t.value());
    if (kind == Kern::Psi) return t.value() > 0 && log_upper_tail_bound(k, x_hi) < kLogNegligible;
    if (t.value() == 0) return true;
    return log_upper_tail_bound(k - 1.0, x_hi) < kLogNegligible;
  }

  // psi_k >= 1 - e^-40 (or phi_k <= e^-40) for every x from x_lo on.
  static bool upper_saturated(Kern, Threshold t, double x_lo) {
    if (t.is_infinite()) return false;
    const auto k = static_cast<double>(t.value());
    if (t.value() == 0) return true;
    return log_lower_tail_bound(k - 1.0, x_lo) < kLogNegligible;
  }

  static double kern_value(Kern kind, Threshold t, double x) { return kind == Kern::Psi ? psi(t, x) : phi(t, x); }

  /// Integral of q(w) K_{T(w)}(w z) over [lo, hi), piece by piece.
  Estimate integrate_kernel(const PowerKernel& q, Kern kind, double z, double lo, double hi) const {
    Estimate total;
    if (!(hi > lo)) return total;
    const ThresholdRule& rule = analytic_->tau;
    const bool jumpable = rule.is_increasing_power();
    const bool final_saturation = saturation_is_final();
    const double tiny = std::exp(kLogNegligible);
    double w = lo;
    if (z == 0.0) {
      // psi_t(0) = 1{t = 0}, phi_t(0) = 1{t = 1}
      const Threshold hit(kind == Kern::Psi ? 0 : 1);
      while (w < hi) {
        const Threshold t = t_at(w);
        const double piece_end = std::min(rule.next_break(w), hi);
        if (t == hit) total.value += q.mass(w, piece_end);
        if (jumpable && hit < t) break;
        w = piece_end;
      }
      return total;
    }
    for (long guard = 0; w < hi; ++guard) {
      if (guard > 50'000'000) throw std::runtime_error("quadrature did not terminate");
      const Threshold t = t_at(w);
      // Far up an increasing rule, unit steps of tau are replaced by the
      // level midpoint alpha w^gamma -+ 1/2.
      const bool smooth = jumpable && dist_.recovery == 0.0 && !t.is_infinite() &&
                          static_cast<double>(t.value()) >= opt_.smooth_level;
      const double piece_end = smooth ? hi : std::min(rule.next_break(w), hi);
      const double chunk_end = std::min(piece_end, 2.0 * w);
      if (t.is_infinite() || (kind == Kern::Phi && t.value() == 0)) {
        w = piece_end;
        continue;
      }
      if (kind == Kern::Psi && t.value() == 0) {
        total.value += q.mass(w, piece_end);
        w = piece_end;
        continue;
      }
      if (upper_saturated(kind, smooth ? t_at(chunk_end) : t, w * z)) {
        if (final_saturation) {
          if (kind == Kern::Psi) {
            const double m = q.mass(w, hi);
            if (std::isinf(m)) throw std::invalid_argument("non-integrable configuration");
            total.value += m;
            total.error += tiny * m;
          }
          break;
        }
        if (kind == Kern::Psi) total.value += q.mass(w, chunk_end);
        w = chunk_end;
        continue;
      }
      if (lower_negligible(kind, t, chunk_end * z)) {
        double next = chunk_end;
        if (jumpable && chunk_end == piece_end && piece_end < hi) next = skip_negligible_levels(kind, t, z, w, hi);
        const double m = q.mass(w, next);
        if (std::isfinite(m)) total.error += tiny * m;
        w = next;
        continue;
      }
      {
        // Drop a tail lighter than abs_tol.
        const double rest = q.mass(w, hi);
        if (rest < opt_.abs_tol) {
          total.error += rest;
          break;
        }
        if (w > 1e300) throw std::invalid_argument("non-integrable configuration");
      }
      const double lw = std::log(w);
      const double lb = std::log(chunk_end);
      const double e1 = q.e + 1.0;
      if (smooth) {
        const double shift = rule.rounding() == ThresholdRule::Rounding::Floor ? -0.5 : 0.5;
        auto integrand = [&](double u) {
          const double a = rule.alpha() * std::exp(rule.gamma() * u) + shift;
          const double x = std::exp(u) * z;
          return q.c * std::exp(e1 * u) * (kind == Kern::Psi ? psi_real(a, x) : phi_real(a, x));
        };
        // The transition sits where z w = alpha w^gamma and is 1 / (|1 - gamma| sqrt(tau)) wide in log w.
        std::vector<double> cuts{lw};
        const double g = rule.gamma();
        if (z > 0.0 && std::abs(1.0 - g) > 1e-9) {
          const double us = std::log(rule.alpha() / z) / (1.0 - g);
          const double width = 1.0 / (std::abs(1.0 - g) * std::sqrt(rule.alpha() * std::exp(g * us)));
          for (int m = -12; m <= 12; ++m) {
            const double c = us + m * width;
            if (c > cuts.back() && c < lb) cuts.push_back(c);
          }
        }
        cuts.push_back(lb);
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) total += integrate_adaptive(integrand, cuts[k], cuts[k + 1], opt_);
        w = chunk_end;
        continue;
      }
      auto integrand = [&](double u) {
        const double x = std::exp(u);
        return q.c * std::exp(e1 * u) * kern_value(kind, t, x * z);
      };
      total += integrate_adaptive(integrand, lw, lb, opt_);
      w = chunk_end;
    }
    return total;
  }

  /// From a negligible piece, the start of the first later level that is not
  /// negligible (or hi). Negligibility along levels of an increasing power
  /// rule switches off once and stays off, which makes the search valid.
  double skip_negligible_levels(Kern kind, Threshold t, double z, double w, double hi) const {
    const ThresholdRule& rule = analytic_->tau;
    const double level = static_cast<double>(rule(w).value());
    auto negligible_level = [&](double k) {
      const double right = rule.level_start(static_cast<std::uint64_t>(k + 1.0));
      const Threshold tk = apply_recovery(Threshold(static_cast<std::uint64_t>(k)), dist_.recovery);
      return lower_negligible(kind, tk, right * z);
    };
    (void)t;
    double step = 1.0;
    double good = level;  // known negligible
    double probe = level + 1.0;
    while (negligible_level(probe)) {
      good = probe;
      if (rule.level_start(static_cast<std::uint64_t>(probe + 1.0)) >= hi || probe > 1e15) return hi;
      step *= 2.0;
      probe = level + step;
    }
    // first non-negligible level lies in (good, probe]
    while (probe - good > 1.0) {
      const double mid = std::floor(0.5 * (good + probe));
      if (negligible_level(mid)) good = mid;
      else probe = mid;
    }
    const double start = rule.level_start(static_cast<std::uint64_t>(probe));
    return std::min(std::max(start, std::nextafter(w, hi)), hi);
  }

  Estimate analytic_indicator_one(Which w) const {
    const PowerKernel q = kernel(w);
    const ThresholdRule& rule = analytic_->tau;
    Estimate r;
    double x = analytic_->w_min_minus;
    for (long guard = 0; x < std::numeric_limits<double>::infinity(); ++guard) {
      if (guard > 10'000'000) throw std::runtime_error("indicator moment did not terminate");
      const Threshold t = t_at(x);
      const double b = rule.next_break(x);
      if (t == Threshold(1)) r.value += q.mass(x, b);
      if (rule.is_increasing_power() && t > Threshold(1)) break;
      x = b;
    }
    return r;
  }

  // ---- atoms ----------------------------------------------------------------

  void setup_atoms(const EmpiricalSample& s) {
    atoms_ = s.atoms;
    for (Atom& a : atoms_) {
      if (!(a.w_minus > 0.0 && a.w_plus > 0.0 && a.s > 0.0)) throw std::invalid_argument("atom weights must be positive");
      a.t = apply_recovery(a.t, dist_.recovery);
    }
    shock_p_ = s.shock_p;
    const auto n = static_cast<double>(atoms_.size());
    atom_shock_.assign(atoms_.size(), s.shock == ShockKind::Uniform ? s.shock_p : 0.0);
    if (s.shock == ShockKind::Largest && s.shock_p > 0.0) {
      std::vector<std::size_t> order(atoms_.size());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (atoms_[a].w_minus != atoms_[b].w_minus) return atoms_[a].w_minus > atoms_[b].w_minus;
        return atoms_[a].w_plus > atoms_[b].w_plus;
      });
      double left = s.shock_p * n;
      for (std::size_t k = 0; k < order.size() && left > 0.0; ++k) {
        atom_shock_[order[k]] = std::min(1.0, left);
        left -= 1.0;
      }
    }
    mean_w_plus_ = mean_w_minus_ = mean_s_ = 0.0;
    for (const Atom& a : atoms_) {
      mean_w_plus_ += a.w_plus;
      mean_w_minus_ += a.w_minus;
      mean_s_ += a.s;
    }
    mean_w_plus_ /= n;
    mean_w_minus_ /= n;
    mean_s_ /= n;
  }

  static double atom_weight(const Atom& a, Which w) {
    switch (w) {
      case Which::WPlus: return a.w_plus;
      case Which::WMinusWPlus: return a.w_minus * a.w_plus;
      case Which::S: return a.s;
      case Which::WMinusS: return a.w_minus * a.s;
      case Which::WMinus: return a.w_minus;
    }
    return 0.0;
  }

  static Estimate mean_and_se(const std::vector<double>& v) {
    const auto n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return {mean, se};
  }

  Estimate atoms_mean(Which w, Kern kind, double z, bool shocked) const {
    std::vector<double> vals(atoms_.size());
    for (std::size_t k = 0; k < atoms_.size(); ++k) {
      const Atom& a = atoms_[k];
      const double q = atom_weight(a, w);
      const double x = a.w_minus * z;
      const double base = kern_value(kind, a.t, x);
      const double m = shocked ? atom_shock_[k] : 0.0;
      const double hit = kind == Kern::Psi ? 1.0 : 0.0;  // psi_0 = 1, phi_0 = 0
      vals[k] = q * ((1.0 - m) * base + m * hit);
    }
    return mean_and_se(vals);
  }

  LimitDistribution dist_;
  QuadratureOptions opt_;
  std::optional<AnalyticPareto> analytic_;
  PowerKernel k_wplus_, k_wmwp_, k_s_, k_wms_, k_wm_;
  double w_cut_ = std::numeric_limits<double>::infinity();
  std::vector<Atom> atoms_;
  std::vector<double> atom_shock_;
  double shock_p_ = 0.0;
  double mean_w_plus_ = 0.0;
  double mean_w_minus_ = 0.0;
  double mean_s_ = 0.0;
};

// ---------------------------------------------------------------------------
// Roots

struct RootOptions {
  std::size_t samples = 2000;
  double xtol = 1e-8;
  double ftol = 1e-10;  // a sampled local minimum within ftol of zero counts as a touching root
};

struct RootResult {
  bool found = false;
  double z = std::numeric_limits<double>::quiet_NaN();
  double lo = 0.0;
  double hi = 0.0;
  std::string message;
};

namespace detail {

/// Golden-section minimum of f on [a, b]; returns (argmin, min).
template <class F>
std::pair<double, double> golden_min(F& f, double a, double b, double xtol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > xtol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? std::pair{c, fc} : std::pair{d, fd};
}

/// Shrinks [lo, hi] with pred(lo) false and pred(hi) true to width xtol.
template <class P>
std::pair<double, double> bisect_predicate(P& pred, double lo, double hi, double xtol) {
  while (hi - lo > xtol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (pred(mid)) hi = mid;
    else lo = mid;
  }
  return {lo, hi};
}

}  // namespace detail

/// Smallest z in [0, z_max] with f(z) = 0: forward scan, then bisection.
/// Sampled local minima are refined so double roots between samples are not stepped over.
inline RootResult first_root(const std::function<double(double)>& f, double z_max, const RootOptions& opt = {}) {
  RootResult res;
  const double f0 = f(0.0);
  if (f0 < 0.0) {
    res.message = "f(0) < 0";
    return res;
  }
  const double h = z_max / static_cast<double>(opt.samples);
  double z_prev2 = 0.0, f_prev2 = f0;
  double z_prev = 0.0, f_prev = f0;
  if (f0 == 0.0) {
    const double f1 = f(h);
    if (f1 < 0.0) return {true, 0.0, 0.0, h, ""};
  }
  auto nonpositive = [&](double z) { return f(z) <= 0.0; };
  for (std::size_t i = 1; i <= opt.samples; ++i) {
    const double z = h * static_cast<double>(i);
    const double fz = f(z);
    if (fz <= 0.0) {
      if (fz == 0.0) return {true, z, z, z, ""};
      auto [lo, hi] = detail::bisect_predicate(nonpositive, z_prev, z, opt.xtol);
      return {true, 0.5 * (lo + hi), lo, hi, ""};
    }
    if (i >= 2 && f_prev < f_prev2 && f_prev <= fz) {
      auto [zm, fm] = detail::golden_min(f, z_prev2, z, opt.xtol);
      if (fm < 0.0) {
        auto [lo, hi] = detail::bisect_predicate(nonpositive, z_prev2, zm, opt.xtol);
        return {true, 0.5 * (lo + hi), lo, hi, ""};
      }
      if (fm <= opt.ftol) return {true, zm, zm - opt.xtol, zm + opt.xtol, "touching root"};
    }
    z_prev2 = z_prev;
    f_prev2 = f_prev;
    z_prev = z;
    f_prev = fz;
  }
  res.message = "no root below z_max";
  return res;
}

/// inf{ z > 0 : f(z) < 0 } on [0, z_max].
inline RootResult z_star(const std::function<double(double)>& f, double z_max, const RootOptions& opt = {}) {
  RootResult res;
  const double f0 = f(0.0);
  if (f0 < 0.0) return {true, 0.0, 0.0, 0.0, "f(0) < 0"};
  const double h = z_max / static_cast<double>(opt.samples);
  auto negative = [&](double z) { return f(z) < 0.0; };
  double z_prev2 = 0.0, f_prev2 = f0;
  double z_prev = 0.0, f_prev = f0;
  for (std::size_t i = 1; i <= opt.samples; ++i) {
    const double z = h * static_cast<double>(i);
    const double fz = f(z);
    if (fz < 0.0) {
      auto [lo, hi] = detail::bisect_predicate(negative, z_prev, z, opt.xtol);
      return {true, 0.5 * (lo + hi), lo, hi, ""};
    }
    if (i >= 2 && f_prev < f_prev2 && f_prev <= fz) {
      auto [zm, fm] = detail::golden_min(f, z_prev2, z, opt.xtol);
      if (fm < 0.0) {
        auto [lo, hi] = detail::bisect_predicate(negative, z_prev2, zm, opt.xtol);
        return {true, 0.5 * (lo + hi), lo, hi, ""};
      }
    }
    z_prev2 = z_prev;
    f_prev2 = f_prev;
    z_prev = z;
    f_prev = fz;
  }
  res.message = "no root below z_max";
  return res;
}

inline std::function<double(double)> f_of(const FixedPointFunctions& fns) {
  return [&fns](double z) { return fns.f(z).value; };
}

inline RootResult first_root(const FixedPointFunctions& fns, const RootOptions& opt = {}) {
  return first_root(f_of(fns), fns.mean_w_plus(), opt);
}

inline RootResult z_star(const FixedPointFunctions& fns, const RootOptions& opt = {}) {
  return z_star(f_of(fns), fns.mean_w_plus(), opt);
}

struct FinalImportance {
  double lower = std::numeric_limits<double>::quiet_NaN();  // g(z_hat)
  double point = std::numeric_limits<double>::quiet_NaN();  // g(z_hat)
  double upper = std::numeric_limits<double>::quiet_NaN();  // g(z*)
  double z_hat = std::numeric_limits<double>::quiet_NaN();
  double z_star = std::numeric_limits<double>::quiet_NaN();
  bool limit_established = false;
  double kappa = std::numeric_limits<double>::quiet_NaN();  // max of d on the mesh around z_hat
  std::vector<double> d_mesh;
  std::string message;
};

/// Bounds g(z_hat) <= limit <= g(z*) and the evidence for a proper limit:
/// d on 11 points of [z_hat - h, z_hat + h], h = 1e-3 E[W+].
inline FinalImportance asymptotic_final_importance(const FixedPointFunctions& fns, const RootOptions& opt = {}) {
  FinalImportance out;
  const RootResult r = first_root(fns, opt);
  const RootResult s = z_star(fns, opt);
  if (!r.found || !s.found) {
    out.message = r.found ? s.message : r.message;
    return out;
  }
  out.z_hat = r.z;
  out.z_star = s.z;
  out.lower = out.point = fns.g(r.z).value;
  out.upper = std::abs(s.z - r.z) <= 10.0 * opt.xtol ? out.lower : fns.g(s.z).value;
  const double h = 1e-3 * fns.mean_w_plus();
  double kappa = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 10; ++k) {
    const double z = std::max(0.0, r.z - h + 2.0 * h * k / 10.0);
    const double dz = fns.d(z).value;
    out.d_mesh.push_back(dz);
    kappa = std::max(kappa, dz);
  }
  out.kappa = kappa;
  out.limit_established = kappa < 0.0 || std::abs(s.z - r.z) <= 10.0 * opt.xtol;
  return out;
}

}  // namespace contagion
