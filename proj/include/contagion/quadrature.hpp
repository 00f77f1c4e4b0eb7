#pragma once

// Globally adaptive 15-point Gauss-Kronrod on finite intervals, built on
// Boost's fixed rule: the interval with the largest error estimate is split
// until the summed estimate meets the tolerance.

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace contagion {

struct Estimate {
  double value = 0.0;
  double error = 0.0;

  Estimate& operator+=(const Estimate& o) {
    value += o.value;
    error += o.error;
    return *this;
  }
};

struct QuadratureOptions {
  double abs_tol = 1e-15;
  double rel_tol = 1e-11;
  int max_intervals = 200;
  double smooth_level = 1e5;  // threshold levels from here on are integrated as a continuum
};

namespace detail {

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gk15(F& f, double a, double b) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, 0, 0.0, &err);
  // The fixed rule reports its error on the reference interval.
  return {a, b, v, std::abs(err) * 0.5 * (b - a)};
}

}  // namespace detail

template <class F>
Estimate integrate_adaptive(F f, double a, double b, const QuadratureOptions& opt = {}) {
  if (!(b > a)) return {};
  std::priority_queue<detail::Segment> heap;
  heap.push(detail::gk15(f, a, b));
  double value = heap.top().value;
  double error = heap.top().error;
  int intervals = 1;
  while (error > std::max(opt.abs_tol, opt.rel_tol * std::abs(value)) && intervals < opt.max_intervals) {
    const detail::Segment s = heap.top();
    const double mid = 0.5 * (s.a + s.b);
    if (!(mid > s.a && mid < s.b)) break;
    heap.pop();
    const auto left = detail::gk15(f, s.a, mid);
    const auto right = detail::gk15(f, mid, s.b);
    value += left.value + right.value - s.value;
    error += left.error + right.error - s.error;
    heap.push(left);
    heap.push(right);
    ++intervals;
  }
  // Re-sum to shed accumulated cancellation in the running totals.
  double v = 0.0;
  double e = 0.0;
  while (!heap.empty()) {
    v += heap.top().value;
    e += heap.top().error;
    heap.pop();
  }
  return {v, e};
}

}  // namespace contagion
