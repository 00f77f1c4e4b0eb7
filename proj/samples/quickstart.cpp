// Sample a network, shock 1% of the banks and compare with the large-network limit.

#include <cstdio>

#include "contagion/analysis.hpp"
#include "contagion/cascade.hpp"
#include "contagion/gen.hpp"

using namespace contagion;

int main() {
  NetworkConfig cfg;  // Pareto weights, unit exposures, every threshold 2
  const auto net = generate_network(cfg, 20000, 42);
  std::printf("banks %zu  edges %zu\n", net.size(), net.edge_count());

  const auto r = run_cascade(net, ShockModel::uniform(0.01, 0), 0.0, 42);
  std::printf("simulated final fraction %.4f after %zu rounds\n", r.final_fraction, r.rounds);

  AnalyticPareto a;
  a.shock_p = 0.01;
  const FixedPointFunctions fns(LimitDistribution{a, 0.0});
  const FinalImportance fi = asymptotic_final_importance(fns);
  std::printf("limit final fraction     %.4f (z_hat %.5f)\n", fi.point, fi.z_hat);
}
