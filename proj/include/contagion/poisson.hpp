#pragma once

// Poisson tail psi_r(x) = P(Poi(x) >= r) and gated pmf phi_r(x) = P(Poi(x) = r-1) 1{r >= 1}.
//
// Small orders are summed directly: the upper series when x < r, the
// complement of the (short) lower sum otherwise. From r = 32 on the
// regularized incomplete gamma functions take over.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include <boost/math/special_functions/gamma.hpp>

#include "contagion/threshold.hpp"

namespace contagion {

namespace detail {

inline constexpr std::uint64_t kDirectSumLimit = 32;

inline void check_poisson_argument(double x) {
  if (!(x >= 0.0)) throw std::domain_error("Poisson mean must be non-negative");
}

/// log P(Poi(x) = k), x > 0.
inline double log_poisson_pmf(double k, double x) {
  return k * std::log(x) - x - std::lgamma(k + 1.0);
}

inline double poisson_pmf(double k, double x) {
  if (x == 0.0) return k == 0.0 ? 1.0 : 0.0;
  if (k < 20.0 && x < 50.0) {
    // Exact product form for small k.
    double t = std::exp(-x);
    for (int j = 1; j <= static_cast<int>(k); ++j) t *= x / j;
    return t;
  }
  return std::exp(log_poisson_pmf(k, x));
}

/// sum_{j >= r} pmf(j, x), for x < r.
inline double upper_series(std::uint64_t r, double x) {
  double term = poisson_pmf(static_cast<double>(r), x);
  double sum = term;
  for (std::uint64_t j = r + 1; term > sum * 1e-17; ++j) {
    term *= x / static_cast<double>(j);
    sum += term;
  }
  return sum;
}

/// sum_{j < r} pmf(j, x).
inline double lower_sum(std::uint64_t r, double x) {
  if (r == 0) return 0.0;
  double term = std::exp(-x);
  if (term == 0.0 && x > 0.0) {
    // Start from the largest index instead to stay out of underflow.
    double t = poisson_pmf(static_cast<double>(r - 1), x);
    double sum = t;
    for (std::uint64_t j = r - 1; j > 0 && t > sum * 1e-17; --j) {
      t *= static_cast<double>(j) / x;
      sum += t;
    }
    return sum;
  }
  double sum = term;
  for (std::uint64_t j = 1; j < r; ++j) {
    term *= x / static_cast<double>(j);
    sum += term;
  }
  return sum;
}

}  // namespace detail

/// P(Poi(x) >= r).
inline double psi(std::uint64_t r, double x) {
  detail::check_poisson_argument(x);
  if (r == 0) return 1.0;
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  if (r < detail::kDirectSumLimit) {
    if (x < static_cast<double>(r)) return detail::upper_series(r, x);
    return 1.0 - detail::lower_sum(r, x);
  }
  return boost::math::gamma_p(static_cast<double>(r), x);
}

/// P(Poi(x) <= r - 1) = 1 - psi_r(x), computed without the subtraction.
inline double psi_complement(std::uint64_t r, double x) {
  detail::check_poisson_argument(x);
  if (r == 0) return 0.0;
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (r < detail::kDirectSumLimit) {
    if (x < static_cast<double>(r)) return 1.0 - detail::upper_series(r, x);
    return detail::lower_sum(r, x);
  }
  return boost::math::gamma_q(static_cast<double>(r), x);
}

/// P(Poi(x) = r - 1) for r >= 1, zero for r = 0.
inline double phi(std::uint64_t r, double x) {
  detail::check_poisson_argument(x);
  if (r == 0) return 0.0;
  if (std::isinf(x)) return 0.0;
  if (r < detail::kDirectSumLimit) return detail::poisson_pmf(static_cast<double>(r - 1), x);
  if (x == 0.0) return 0.0;
  // d/dx P(a, x) = x^(a-1) e^-x / Gamma(a) with a = r.
  return boost::math::gamma_p_derivative(static_cast<double>(r), x);
}

/// P(a, x) for real order a > 0; equals psi_a(x) at integer a.
inline double psi_real(double a, double x) {
  detail::check_poisson_argument(x);
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return 1.0;
  return boost::math::gamma_p(a, x);
}

/// d/dx P(a, x); equals phi_a(x) at integer a.
inline double phi_real(double a, double x) {
  detail::check_poisson_argument(x);
  if (x == 0.0 || std::isinf(x)) return 0.0;
  return boost::math::gamma_p_derivative(a, x);
}

inline double psi(Threshold t, double x) {
  if (t.is_infinite()) {
    detail::check_poisson_argument(x);
    return 0.0;
  }
  return psi(t.value(), x);
}

inline double phi(Threshold t, double x) {
  if (t.is_infinite()) {
    detail::check_poisson_argument(x);
    return 0.0;
  }
  return phi(t.value(), x);
}

/// Chernoff bound on log P(Poi(x) >= k), valid for k > x; returns 0 otherwise.
inline double log_upper_tail_bound(double k, double x) {
  if (!(k > x)) return 0.0;
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  return -x + k - k * std::log(k / x);
}

/// Chernoff bound on log P(Poi(x) <= k), valid for k < x; returns 0 otherwise.
inline double log_lower_tail_bound(double k, double x) {
  if (!(k < x)) return 0.0;
  if (k <= 0.0) return -x;
  return -x + k - k * std::log(k / x);
}

}  // namespace contagion
