// Verdicts for buffered threshold rules and the least buffer for a few shock sizes.

#include <cstdio>

#include "contagion/resilience.hpp"

using namespace contagion;

int main() {
  const CriticalExponents ce = critical_exponents(2.132, 2.8861);
  std::printf("gamma_c %.4f  alpha_c %.4f\n\n", ce.gamma_c, ce.alpha_c);

  std::printf("%8s  %-14s  %-14s\n", "delta", "rule", "fixed point");
  for (double delta : {-0.2, -0.05, 0.05, 0.2}) {
    const ThresholdRule tau = ThresholdRule::buffered(ce.alpha_c, ce.gamma_c, delta);
    const auto by_rule = classify_by_threshold_rule(ce, tau, TailDependence::comonotone());
    AnalyticPareto a;
    a.tau = tau;
    const auto by_fp = classify_by_fixed_point(FixedPointFunctions(LimitDistribution{a, 0.0}));
    std::printf("%8.2f  %-14s  %-14s\n", delta, to_string(by_rule.verdict), to_string(by_fp.verdict));
  }

  std::printf("\n%8s  %10s  %10s\n", "p", "uniform", "largest");
  for (double p : {0.001, 0.005, 0.01}) {
    const auto u = min_buffer_delta(p, ShockKind::Uniform);
    const auto l = min_buffer_delta(p, ShockKind::Largest);
    std::printf("%8.3f  %9.2f%%  %9.2f%%\n", p, 100.0 * u.delta, 100.0 * l.delta);
  }
}
