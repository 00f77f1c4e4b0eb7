// contagion-lab: command-line front end.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "contagion/analysis.hpp"
#include "contagion/cascade.hpp"
#include "contagion/gen.hpp"
#include "contagion/harness.hpp"
#include "contagion/io.hpp"
#include "contagion/resilience.hpp"

using namespace contagion;

namespace {

struct WeightArgs {
  double beta_minus = 2.132;
  double beta_plus = 2.8861;
  double w_min_minus = 1.0;
  double w_min_plus = 1.0;
  std::string dependence = "comonotone";

  void add(CLI::App* app) {
    app->add_option("--beta-minus", beta_minus, "in-weight Pareto exponent");
    app->add_option("--beta-plus", beta_plus, "out-weight Pareto exponent");
    app->add_option("--w-min-minus", w_min_minus, "in-weight minimum");
    app->add_option("--w-min-plus", w_min_plus, "out-weight minimum");
    app->add_option("--dependence", dependence, "comonotone | independent")
        ->check(CLI::IsMember({"comonotone", "independent"}));
  }
  [[nodiscard]] Dependence coupling() const {
    return dependence == "comonotone" ? Dependence::Comonotone : Dependence::Independent;
  }
  [[nodiscard]] CriticalExponents critical() const {
    return critical_exponents(beta_minus, beta_plus, w_min_minus, w_min_plus);
  }
};

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_to(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << content;
}

/// "unit", "const:v", "pareto:xi[:e_min]".
ExposureLaw parse_exposures(const std::string& s) {
  const auto parts = detail::split(s, ':');
  if (parts[0] == "unit" && parts.size() == 1) return ExposureLaw::unit();
  if (parts[0] == "const" && parts.size() == 2) return ExposureLaw{ConstantLaw{detail::parse_real(parts[1])}};
  if (parts[0] == "pareto" && (parts.size() == 2 || parts.size() == 3)) {
    return ExposureLaw::pareto(detail::parse_real(parts[1]), parts.size() == 3 ? detail::parse_real(parts[2]) : 1.0);
  }
  throw std::invalid_argument("unknown exposure law '" + s + "'");
}

/// "<tau rule>" (threshold model), "max-exposure", "robust:<tau rule>", "average:<tau rule>".
CapitalRuleSpec parse_capital(const std::string& s, const CriticalExponents& ce) {
  if (s == "max-exposure") return MaxExposurePlusEps{};
  if (s.rfind("robust:", 0) == 0) return RobustTopK{parse_threshold_rule(s.substr(7), ce), -1.0};
  if (s.rfind("average:", 0) == 0) return AverageBased{parse_threshold_rule(s.substr(8), ce), -1.0};
  const ThresholdRule r = parse_threshold_rule(s, ce);
  if (r.kind() == ThresholdRule::Kind::Constant) return ConstantThreshold{r.constant_value()};
  return FunctionalThreshold{r};
}

/// "uniform:p", "largest:p", "top:k", "list:i,j,...", "none".
ShockModel parse_shock(const std::string& s, std::uint64_t scope) {
  if (s == "none") return ShockModel::none();
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown shock '" + s + "'");
  const std::string kind = s.substr(0, colon);
  const std::string arg = s.substr(colon + 1);
  if (kind == "uniform") return ShockModel::uniform(detail::parse_real(arg), scope);
  if (kind == "largest") return ShockModel::largest_fraction(detail::parse_real(arg));
  if (kind == "top") return ShockModel::largest_count(detail::parse_uint(arg));
  if (kind == "list") {
    std::vector<BankId> ids;
    for (const auto& t : detail::split(arg, ',')) {
      if (!t.empty()) ids.push_back(static_cast<BankId>(detail::parse_uint(t)));
    }
    return ShockModel::explicit_set(std::move(ids));
  }
  throw std::invalid_argument("unknown shock '" + s + "'");
}

ShockKind parse_shock_kind(const std::string& s) { return s == "largest" ? ShockKind::Largest : ShockKind::Uniform; }

nlohmann::ordered_json verdict_json(const ResilienceVerdict& v) {
  nlohmann::ordered_json j;
  j["verdict"] = to_string(v.verdict);
  j["rule"] = v.rule;
  for (const auto& [k, x] : v.evidence) j["evidence"][k] = x;
  j["mesh"] = v.mesh;
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Default contagion in heavy-tailed interbank networks"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;

  // gen
  auto* gen = app.add_subcommand("gen", "sample a financial network");
  WeightArgs gen_w;
  gen_w.add(gen);
  std::size_t gen_n = 1000;
  std::string gen_exposures = "unit", gen_capital = "const:2", gen_format = "text", gen_out = "-";
  double gen_importance = 1.0;
  std::size_t gen_workers = 0;
  gen->add_option("-n,--n", gen_n, "number of banks")->check(CLI::Range(std::size_t{1}, std::size_t{4000000000}));
  gen->add_option("--exposures", gen_exposures, "unit | const:v | pareto:xi[:e_min]");
  gen->add_option("--capital", gen_capital, "tau rule | max-exposure | robust:<tau> | average:<tau>");
  gen->add_option("--importance", gen_importance, "systemic importance of every bank");
  gen->add_option("--format", gen_format, "text | json")->check(CLI::IsMember({"text", "json"}));
  gen->add_option("-o,--out", gen_out, "output file (- for stdout)");
  gen->add_option("--workers", gen_workers, "edge sampling workers (0: environment)");
  gen->add_option("--seed", seed, "seed");

  // cascade
  auto* cas = app.add_subcommand("cascade", "run the default cascade on a network file");
  std::string cas_net, cas_shock = "uniform:0.01", cas_json = "-", cas_rounds;
  double cas_recovery = 0.0;
  cas->add_option("network", cas_net, "network file (text or JSON)")->required();
  cas->add_option("--shock", cas_shock, "uniform:p | largest:p | top:k | list:i,j,... | none");
  cas->add_option("--recovery", cas_recovery, "recovery rate R in [0,1)");
  cas->add_option("--json", cas_json, "result JSON file (- for stdout)");
  cas->add_option("--rounds-csv", cas_rounds, "per-round CSV file");
  cas->add_option("--seed", seed, "seed");

  // fixedpoint
  auto* fp = app.add_subcommand("fixedpoint", "asymptotic final fraction from the fixed-point equation");
  WeightArgs fp_w;
  fp_w.add(fp);
  std::string fp_tau = "const:2", fp_shock = "uniform", fp_net, fp_exposures = "unit", fp_curve;
  double fp_p = 0.01, fp_recovery = 0.0;
  std::size_t fp_curve_points = 200;
  fp->add_option("--tau", fp_tau, "threshold rule");
  fp->add_option("-p,--p", fp_p, "shock fraction");
  fp->add_option("--shock", fp_shock, "uniform | largest")->check(CLI::IsMember({"uniform", "largest"}));
  fp->add_option("--recovery", fp_recovery, "recovery rate R");
  fp->add_option("--network", fp_net, "use the empirical distribution of this network instead");
  fp->add_option("--exposures", fp_exposures, "exposure law for hypothetical thresholds (with --network)");
  fp->add_option("--curve", fp_curve, "CSV of z, f, g, d on [0, E[W+]]");
  fp->add_option("--curve-points", fp_curve_points, "samples in --curve");
  fp->add_option("--seed", seed, "seed");

  // resilience
  auto* res = app.add_subcommand("resilience", "classify a threshold rule and compute buffers");
  WeightArgs res_w;
  res_w.add(res);
  std::string res_tau = "buffered:0.0839", res_tail = "coupling", res_buffer_shock = "uniform";
  double res_buffer_p = 0.0;
  bool res_fixed = false, res_amp = false, res_allow_one = false;
  res->add_option("--tau", res_tau, "threshold rule");
  res->add_option("--tail", res_tail, "coupling | marginals (tail dependence information used)")
      ->check(CLI::IsMember({"coupling", "marginals"}));
  res->add_flag("--fixed-point", res_fixed, "also classify from f and d near zero");
  res->add_flag("--amplification", res_amp, "also compute the amplification factor");
  res->add_flag("--allow-tau-one", res_allow_one, "admit thresholds equal to 1 (contagious links)");
  res->add_option("--buffer-p", res_buffer_p, "also compute the least buffer delta for this shock size");
  res->add_option("--buffer-shock", res_buffer_shock, "uniform | largest")->check(CLI::IsMember({"uniform", "largest"}));
  res->add_option("--seed", seed, "seed");

  // capreq
  auto* cap = app.add_subcommand("capreq", "per-bank capital requirements");
  WeightArgs cap_w;
  cap_w.add(cap);
  std::string cap_net, cap_rule = "robust", cap_tau = "buffered:0.0839", cap_out = "-";
  double cap_eps = -1.0, cap_mu = 0.0;
  cap->add_option("network", cap_net, "network file")->required();
  cap->add_option("--rule", cap_rule, "robust | average | no-contagious-links")
      ->check(CLI::IsMember({"robust", "average", "no-contagious-links"}));
  cap->add_option("--tau", cap_tau, "threshold rule");
  cap->add_option("--eps", cap_eps, "buffer above the exposure sums (default 1e-3 mean exposure)");
  cap->add_option("--mu", cap_mu, "known mean exposure (default: each bank's realized mean)");
  cap->add_option("-o,--out", cap_out, "CSV file (- for stdout)");
  cap->add_option("--seed", seed, "seed");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run a simulation-study experiment");
  std::string exp_config, exp_preset, exp_out;
  bool exp_full = false, exp_print = false;
  auto* seed_opt = exp->add_option("--seed", seed, "seed (overrides the spec)");
  exp->add_option("--config", exp_config, "spec file");
  exp->add_option("--preset", exp_preset, "built-in spec")->check(CLI::IsMember(experiment_names()));
  exp->add_flag("--full-scale", exp_full, "full sizes and repetition counts");
  exp->add_option("--out", exp_out, "output directory (overrides the spec)");
  exp->add_flag("--print-spec", exp_print, "print the effective spec and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      NetworkConfig cfg;
      cfg.weights = WeightLaw{ParetoLaw{gen_w.beta_minus, gen_w.w_min_minus},
                              ParetoLaw{gen_w.beta_plus, gen_w.w_min_plus}, gen_w.coupling()};
      cfg.exposures = parse_exposures(gen_exposures);
      cfg.capital = parse_capital(gen_capital, gen_w.critical());
      cfg.importance = gen_importance;
      const auto net = generate_network(cfg, gen_n, seed, gen_workers ? gen_workers : default_workers());
      write_to(gen_out, gen_format == "json" ? serialize_json(net) : serialize_text(net));
    } else if (*cas) {
      const auto net = deserialize_any(read_file(cas_net));
      const auto r = run_cascade(net, parse_shock(cas_shock, 0), cas_recovery, seed);
      write_to(cas_json, result_to_json(r).dump(1) + "\n");
      if (!cas_rounds.empty()) {
        std::ostringstream os;
        write_rounds_csv(os, r);
        write_to(cas_rounds, os.str());
      }
    } else if (*fp) {
      LimitDistribution dist;
      dist.recovery = fp_recovery;
      if (fp_net.empty()) {
        AnalyticPareto a;
        a.beta_minus = fp_w.beta_minus;
        a.beta_plus = fp_w.beta_plus;
        a.w_min_minus = fp_w.w_min_minus;
        a.w_min_plus = fp_w.w_min_plus;
        a.tau = parse_threshold_rule(fp_tau, fp_w.critical());
        a.shock_p = fp_p;
        a.shock = parse_shock_kind(fp_shock);
        a.coupling = fp_w.coupling();
        dist.rep = a;
      } else {
        const auto net = deserialize_any(read_file(fp_net));
        EmpiricalSample s = empirical_from_network(net, parse_exposures(fp_exposures), seed);
        s.shock_p = fp_p;
        s.shock = parse_shock_kind(fp_shock);
        dist.rep = std::move(s);
      }
      const FixedPointFunctions fns(dist);
      const FinalImportance fi = asymptotic_final_importance(fns);
      nlohmann::ordered_json j;
      j["mode"] = fns.mode() == FixedPointFunctions::Mode::Quadrature ? "quadrature" : "atoms";
      j["z_hat"] = fi.z_hat;
      j["z_star"] = fi.z_star;
      j["final_importance"] = fi.point;
      j["lower"] = fi.lower;
      j["upper"] = fi.upper;
      j["limit_established"] = fi.limit_established;
      j["max_d_near_root"] = fi.kappa;
      if (!fi.message.empty()) j["message"] = fi.message;
      std::cout << j.dump(1) << '\n';
      if (!fp_curve.empty()) {
        std::ostringstream os;
        os << "z,f,g,d\n";
        for (std::size_t k = 0; k <= fp_curve_points; ++k) {
          const double z = fns.mean_w_plus() * static_cast<double>(k) / static_cast<double>(fp_curve_points);
          os << format_double(z) << ',' << format_double(fns.f(z).value) << ',' << format_double(fns.g(z).value)
             << ',' << format_double(fns.d(z).value) << '\n';
        }
        write_to(fp_curve, os.str());
      }
    } else if (*res) {
      const CriticalExponents ce = res_w.critical();
      const ThresholdRule tau = parse_threshold_rule(res_tau, ce);
      TailDependence tail = TailDependence::marginals_only();
      if (res_tail == "coupling") {
        tail = res_w.coupling() == Dependence::Comonotone ? TailDependence::comonotone() : TailDependence::independent();
      }
      ClassifyOptions opt;
      opt.allow_tau_one = res_allow_one;
      nlohmann::ordered_json j;
      j["gamma_c"] = ce.gamma_c;
      j["alpha_c"] = ce.alpha_c;
      j["tau"] = tau.describe();
      j["threshold_rule"] = verdict_json(classify_by_threshold_rule(ce, tau, tail, opt));
      AnalyticPareto a;
      a.beta_minus = res_w.beta_minus;
      a.beta_plus = res_w.beta_plus;
      a.w_min_minus = res_w.w_min_minus;
      a.w_min_plus = res_w.w_min_plus;
      a.tau = tau;
      a.coupling = res_w.coupling();
      const FixedPointFunctions fns(LimitDistribution{a, 0.0});
      if (res_fixed) j["fixed_point"] = verdict_json(classify_by_fixed_point(fns));
      if (res_amp) {
        try {
          const AmplificationEstimate amp = amplification(fns);
          j["amplification"]["factor"] = amp.factor;
          j["amplification"]["kappa"] = amp.kappa;
          j["amplification"]["kappa_s"] = amp.kappa_s;
          if (amp.closed_form_factor) j["amplification"]["threshold_one_formula"] = *amp.closed_form_factor;
        } catch (const std::domain_error& e) {
          j["amplification"]["error"] = e.what();
        }
      }
      if (res_buffer_p > 0.0) {
        const BufferResult b = min_buffer_delta(res_buffer_p, parse_shock_kind(res_buffer_shock),
                                                BufferBase{res_w.beta_minus, res_w.beta_plus, res_w.w_min_minus,
                                                           res_w.w_min_plus});
        j["buffer"]["p"] = res_buffer_p;
        j["buffer"]["found"] = b.found;
        if (b.found) j["buffer"]["delta"] = b.delta;
        if (!b.message.empty()) j["buffer"]["message"] = b.message;
      }
      std::cout << j.dump(1) << '\n';
    } else if (*cap) {
      const auto net = deserialize_any(read_file(cap_net));
      const ThresholdRule tau = parse_threshold_rule(cap_tau, cap_w.critical());
      const RequirementKind kind = cap_rule == "robust"    ? RequirementKind::Robust
                                   : cap_rule == "average" ? RequirementKind::Average
                                                           : RequirementKind::NoContagiousLinks;
      std::optional<double> mu;
      if (cap_mu > 0.0) mu = cap_mu;
      double eps = cap_eps;
      if (eps < 0.0) {
        double s = 0.0;
        for (const Edge& e : net.edges()) s += e.exposure;
        eps = net.edge_count() ? 1e-3 * s / static_cast<double>(net.edge_count()) : 1e-3;
      }
      std::ostringstream os;
      os << "id,w_minus,tau,mu,requirement,mu_estimated\n";
      for (const CapitalRow& r : capital_requirements(net, kind, tau, eps, mu)) {
        os << r.id << ',' << format_double(r.w_minus) << ',' << r.tau.to_string() << ',' << format_double(r.mu)
           << ',' << format_double(r.requirement) << ',' << (r.mu_estimated ? 1 : 0) << '\n';
      }
      write_to(cap_out, os.str());
    } else if (*exp) {
      if (exp_config.empty() == exp_preset.empty()) throw std::invalid_argument("give exactly one of --config, --preset");
      ExperimentSpec spec;
      std::string text;
      if (!exp_config.empty()) {
        text = read_file(exp_config);
        spec = parse_spec(text);
      } else {
        spec = preset_spec(exp_preset, exp_full);
      }
      if (seed_opt->count()) spec.seed = seed;
      if (!exp_out.empty()) spec.output_dir = exp_out;
      if (exp_config.empty() || seed_opt->count() || !exp_out.empty()) text = format_spec(spec);
      if (exp_print) {
        std::cout << text;
        return 0;
      }
      const Manifest m = run(spec, text);
      std::cout << m.json.dump(1) << '\n';
      return m.complete() ? 0 : 3;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
