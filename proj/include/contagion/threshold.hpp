#pragma once

// Integer default thresholds (values in N_0 plus infinity) and the
// weight-dependent threshold rules tau(w) used for capital requirements.

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>

namespace contagion {

/// Threshold value in {0, 1, 2, ...} or infinity.
class Threshold {
 public:
  constexpr Threshold() = default;
  constexpr explicit Threshold(std::uint64_t v) : v_(v) {}

  static constexpr Threshold infinite() { return Threshold(kInf); }

  [[nodiscard]] constexpr bool is_infinite() const { return v_ == kInf; }
  [[nodiscard]] constexpr std::uint64_t value() const { return v_; }

  constexpr auto operator<=>(const Threshold&) const = default;

  [[nodiscard]] std::string to_string() const {
    return is_infinite() ? std::string("inf") : std::to_string(v_);
  }

 private:
  static constexpr std::uint64_t kInf = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t v_ = 0;
};

/// tau(w): either a constant, or max{floor_at, round(alpha * w^gamma)} with
/// round = floor (the buffered rules) or ceil.
class ThresholdRule {
 public:
  enum class Kind { Constant, Power };
  enum class Rounding { Floor, Ceil };

  static ThresholdRule constant(Threshold t) {
    ThresholdRule r;
    r.kind_ = Kind::Constant;
    r.constant_ = t;
    return r;
  }

  static ThresholdRule power(double alpha, double gamma, std::uint64_t floor_at = 2,
                             Rounding rounding = Rounding::Floor) {
    if (!(alpha > 0.0) || !std::isfinite(gamma)) {
      throw std::invalid_argument("power threshold rule needs alpha > 0 and finite gamma");
    }
    ThresholdRule r;
    r.kind_ = Kind::Power;
    r.alpha_ = alpha;
    r.gamma_ = gamma;
    r.floor_at_ = floor_at;
    r.rounding_ = rounding;
    return r;
  }

  /// tau(w) = max{2, floor(alpha_c (1+delta) w^(gamma_c (1+delta)))}.
  static ThresholdRule buffered(double alpha_c, double gamma_c, double delta) {
    if (!(delta > -1.0)) return constant(Threshold(2));
    return power(alpha_c * (1.0 + delta), gamma_c * (1.0 + delta), 2, Rounding::Floor);
  }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] double gamma() const { return gamma_; }
  [[nodiscard]] std::uint64_t floor_at() const { return floor_at_; }
  [[nodiscard]] Rounding rounding() const { return rounding_; }
  [[nodiscard]] Threshold constant_value() const { return constant_; }

  [[nodiscard]] Threshold operator()(double w) const {
    if (kind_ == Kind::Constant) return constant_;
    const double raw = alpha_ * std::pow(w, gamma_);
    const double r = rounding_ == Rounding::Floor ? std::floor(raw) : std::ceil(raw);
    if (!(r < 1.8e19)) return Threshold(std::numeric_limits<std::uint64_t>::max() - 1);
    const auto k = static_cast<std::uint64_t>(r < 0.0 ? 0.0 : r);
    return Threshold(k < floor_at_ ? floor_at_ : k);
  }

  /// Power rules with gamma > 0 are nondecreasing and unbounded; the
  /// analytic integrators use this to enumerate pieces by level.
  [[nodiscard]] bool is_increasing_power() const { return kind_ == Kind::Power && gamma_ > 0.0; }

  /// For increasing power rules: the w at which the unclamped rounded value
  /// reaches level k, i.e. the left edge of the piece where tau = k
  /// (k > floor_at). Floor: alpha w^gamma = k. Ceil: alpha w^gamma = k-1.
  [[nodiscard]] double level_start(std::uint64_t k) const {
    const double target = rounding_ == Rounding::Floor ? static_cast<double>(k)
                                                       : static_cast<double>(k) - 1.0;
    return std::pow(target / alpha_, 1.0 / gamma_);
  }

  /// Smallest breakpoint strictly greater than w, or +inf if tau is
  /// constant on [w, inf).
  [[nodiscard]] double next_break(double w) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (kind_ == Kind::Constant || gamma_ == 0.0) return inf;
    const double raw = alpha_ * std::pow(w, gamma_);
    if (gamma_ > 0.0) {
      double level = rounding_ == Rounding::Floor ? std::floor(raw) + 1.0 : std::ceil(raw);
      if (rounding_ == Rounding::Ceil && level == raw) level += 1.0;
      // Below the clamp tau stays at floor_at until the rounded value passes it.
      const double clamp_exit = rounding_ == Rounding::Floor
                                    ? static_cast<double>(floor_at_) + 1.0
                                    : static_cast<double>(floor_at_);
      if (level < clamp_exit) level = clamp_exit;
      double b = std::pow(level / alpha_, 1.0 / gamma_);
      if (!(b > w)) b = std::nextafter(w, inf);
      return b;
    }
    // gamma < 0: the rounded value decreases; once at or below the clamp it is constant.
    const double current = rounding_ == Rounding::Floor ? std::floor(raw) : std::ceil(raw);
    if (current <= static_cast<double>(floor_at_)) return inf;
    const double level = rounding_ == Rounding::Floor ? current : current - 1.0;
    double b = std::pow(level / alpha_, 1.0 / gamma_);
    if (!(b > w)) b = std::nextafter(w, inf);
    return b;
  }

  [[nodiscard]] std::string describe() const {
    if (kind_ == Kind::Constant) return "constant(" + constant_.to_string() + ")";
    return std::string(rounding_ == Rounding::Floor ? "floor" : "ceil") + "(alpha=" +
           std::to_string(alpha_) + ",gamma=" + std::to_string(gamma_) +
           ",min=" + std::to_string(floor_at_) + ")";
  }

 private:
  Kind kind_ = Kind::Constant;
  Threshold constant_{2};
  double alpha_ = 1.0;
  double gamma_ = 0.0;
  std::uint64_t floor_at_ = 2;
  Rounding rounding_ = Rounding::Floor;
};

/// inf{ s : sum of the first s exposures >= capital }, over at most `limit`
/// draws pulled from `next_exposure`.
template <class Next>
Threshold compute_threshold(double capital, std::uint64_t limit, Next&& next_exposure) {
  if (capital <= 0.0) return Threshold(0);
  if (std::isinf(capital)) return Threshold::infinite();
  double sum = 0.0;
  for (std::uint64_t s = 1; s <= limit; ++s) {
    sum += next_exposure();
    if (sum >= capital) return Threshold(s);
  }
  return Threshold::infinite();
}

inline Threshold compute_threshold(double capital, std::span<const double> exposures) {
  std::size_t k = 0;
  return compute_threshold(capital, exposures.size(), [&] { return exposures[k++]; });
}

}  // namespace contagion
