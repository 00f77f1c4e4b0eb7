#pragma once

// Experiment specs, the simulation-study experiments and the run manifest.
//
// Spec format: one `key = value` per line, '#' starts a comment. Lists are
// comma separated; real grids may also be written start:step:stop.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "contagion/analysis.hpp"
#include "contagion/cascade.hpp"
#include "contagion/gen.hpp"
#include "contagion/io.hpp"
#include "contagion/parallel.hpp"
#include "contagion/resilience.hpp"
#include "contagion/rng.hpp"
#include "contagion/threshold.hpp"

namespace contagion {

class SpecError : public std::runtime_error {
 public:
  SpecError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "spec line " + std::to_string(line) + ": " + what : "spec: " + what),
        line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"convergence", "delta_sweep", "jump_distribution",
                                              "average_fraction", "exposure_model"};
  return names;
}

struct ExperimentSpec {
  std::string name = "convergence";
  double beta_minus = 2.132;
  double beta_plus = 2.8861;
  double w_min_minus = 1.0;
  double w_min_plus = 1.0;
  double xi = 2.5277;
  double e_min = 1.0;
  Dependence dependence = Dependence::Comonotone;
  std::string tau = "const:2";  // threshold rule of the convergence experiment
  double buffer = 0.0839;       // delta of the RobustTopK / AverageBased rules
  double recovery = 0.0;
  std::vector<std::size_t> n_list{10000};
  std::vector<double> delta_grid{0.0};
  std::vector<double> p_list{0.01};
  std::size_t repetitions = 1;
  ShockKind shock = ShockKind::Uniform;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::size_t workers = 0;  // 0: CONTAGION_WORKERS or hardware

  [[nodiscard]] CriticalExponents critical() const {
    return critical_exponents(beta_minus, beta_plus, w_min_minus, w_min_plus);
  }
  [[nodiscard]] WeightLaw weight_law() const {
    return WeightLaw{ParetoLaw{beta_minus, w_min_minus}, ParetoLaw{beta_plus, w_min_plus}, dependence};
  }
  [[nodiscard]] std::size_t worker_count() const { return workers ? workers : default_workers(); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_real(const std::string& s) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline std::uint64_t parse_uint(const std::string& s) {
  std::uint64_t v = 0;
  // Accept 1e5-style sizes as long as they are integral.
  if (s.find_first_of("eE.") != std::string::npos) {
    const double d = parse_real(s);
    if (!(d >= 0.0) || d != std::floor(d) || d > 1.8e19) throw std::invalid_argument("not a non-negative integer: '" + s + "'");
    return static_cast<std::uint64_t>(d);
  }
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("not a non-negative integer: '" + s + "'");
  }
  return v;
}

/// "a, b, c" or "start:step:stop" (inclusive, snapped to the step).
inline std::vector<double> parse_grid(const std::string& s) {
  if (s.find(':') != std::string::npos) {
    const auto parts = split(s, ':');
    if (parts.size() != 3) throw std::invalid_argument("grid needs start:step:stop");
    const double a = parse_real(parts[0]), h = parse_real(parts[1]), b = parse_real(parts[2]);
    if (!(h > 0.0) || !(b >= a)) throw std::invalid_argument("grid needs step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((b - a) / h + 1e-9)) + 1;
    if (count > 10'000'000) throw std::invalid_argument("grid too large");
    std::vector<double> g(count);
    for (std::size_t k = 0; k < count; ++k) g[k] = a + h * static_cast<double>(k);
    return g;
  }
  std::vector<double> g;
  if (trim(s).empty()) return g;
  for (const auto& t : split(s, ',')) g.push_back(parse_real(t));
  return g;
}

}  // namespace detail

/// "const:K", "K", "inf", "power:alpha:gamma[:min]", "buffered:delta".
inline ThresholdRule parse_threshold_rule(const std::string& text, const CriticalExponents& ce) {
  const auto parts = detail::split(text, ':');
  const std::string& kind = parts[0];
  try {
    if (kind == "inf") return ThresholdRule::constant(Threshold::infinite());
    if (parts.size() == 1) return ThresholdRule::constant(Threshold(detail::parse_uint(kind)));
    if (kind == "const" && parts.size() == 2) {
      if (parts[1] == "inf") return ThresholdRule::constant(Threshold::infinite());
      return ThresholdRule::constant(Threshold(detail::parse_uint(parts[1])));
    }
    if (kind == "power" && (parts.size() == 3 || parts.size() == 4)) {
      const std::uint64_t floor_at = parts.size() == 4 ? detail::parse_uint(parts[3]) : 2;
      return ThresholdRule::power(detail::parse_real(parts[1]), detail::parse_real(parts[2]), floor_at);
    }
    if (kind == "buffered" && parts.size() == 2) {
      return ThresholdRule::buffered(ce.alpha_c, ce.gamma_c, detail::parse_real(parts[1]));
    }
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("threshold rule '" + text + "': " + e.what());
  }
  throw std::invalid_argument("unknown threshold rule '" + text + "'");
}

inline void validate(const ExperimentSpec& s) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), s.name) == names.end()) {
    throw SpecError(0, "unknown experiment '" + s.name + "'");
  }
  if (s.n_list.empty()) throw SpecError(0, "n list is empty");
  if (s.delta_grid.empty()) throw SpecError(0, "delta grid is empty");
  if (s.p_list.empty()) throw SpecError(0, "p list is empty");
  if (s.repetitions < 1) throw SpecError(0, "repetitions must be at least 1");
  for (auto n : s.n_list) {
    if (n < 2) throw SpecError(0, "n must be at least 2");
    if (n > std::numeric_limits<BankId>::max()) throw SpecError(0, "n too large");
  }
  for (double p : s.p_list) {
    if (!(p >= 0.0 && p <= 1.0)) throw SpecError(0, "shock fraction outside [0,1]");
  }
  for (double d : s.delta_grid) {
    if (!std::isfinite(d)) throw SpecError(0, "delta grid must be finite");
  }
  if (!(s.beta_minus > 2.0 && s.beta_plus > 2.0)) throw SpecError(0, "Pareto exponents must exceed 2");
  if (!(s.w_min_minus > 0.0 && s.w_min_plus > 0.0)) throw SpecError(0, "minimal weights must be positive");
  if (!(s.xi > 1.0 && s.e_min > 0.0)) throw SpecError(0, "exposure law needs xi > 1 and e_min > 0");
  if (!(s.recovery >= 0.0 && s.recovery < 1.0)) throw SpecError(0, "recovery must lie in [0,1)");
  try {
    (void)parse_threshold_rule(s.tau, s.critical());
  } catch (const std::invalid_argument& e) {
    throw SpecError(0, e.what());
  }
}

inline ExperimentSpec parse_spec(const std::string& text) {
  ExperimentSpec s;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  std::map<std::string, std::size_t> seen;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string body = detail::trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw SpecError(lineno, "expected key = value");
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    const std::string val = detail::trim(std::string_view(body).substr(eq + 1));
    if (seen.count(key)) throw SpecError(lineno, "duplicate key '" + key + "'");
    seen[key] = lineno;
    try {
      if (key == "name" || key == "experiment") s.name = val;
      else if (key == "beta_minus") s.beta_minus = detail::parse_real(val);
      else if (key == "beta_plus") s.beta_plus = detail::parse_real(val);
      else if (key == "w_min_minus") s.w_min_minus = detail::parse_real(val);
      else if (key == "w_min_plus") s.w_min_plus = detail::parse_real(val);
      else if (key == "xi") s.xi = detail::parse_real(val);
      else if (key == "e_min") s.e_min = detail::parse_real(val);
      else if (key == "dependence") {
        if (val == "comonotone") s.dependence = Dependence::Comonotone;
        else if (val == "independent") s.dependence = Dependence::Independent;
        else throw std::invalid_argument("dependence must be comonotone or independent");
      } else if (key == "tau") s.tau = val;
      else if (key == "buffer") s.buffer = detail::parse_real(val);
      else if (key == "recovery") s.recovery = detail::parse_real(val);
      else if (key == "n") {
        s.n_list.clear();
        for (const auto& t : detail::split(val, ',')) s.n_list.push_back(detail::parse_uint(t));
      } else if (key == "delta") s.delta_grid = detail::parse_grid(val);
      else if (key == "p") s.p_list = detail::parse_grid(val);
      else if (key == "repetitions") s.repetitions = detail::parse_uint(val);
      else if (key == "shock") {
        if (val == "uniform") s.shock = ShockKind::Uniform;
        else if (val == "largest") s.shock = ShockKind::Largest;
        else throw std::invalid_argument("shock must be uniform or largest");
      } else if (key == "seed") s.seed = detail::parse_uint(val);
      else if (key == "output_dir") s.output_dir = val;
      else if (key == "workers") s.workers = detail::parse_uint(val);
      else throw std::invalid_argument("unknown key '" + key + "'");
    } catch (const std::invalid_argument& e) {
      throw SpecError(lineno, e.what());
    }
  }
  validate(s);
  return s;
}

inline std::string format_spec(const ExperimentSpec& s) {
  auto list = [](const auto& v) {
    std::string out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) out += ", ";
      if constexpr (std::is_floating_point_v<std::decay_t<decltype(v[k])>>) out += format_double(v[k]);
      else out += std::to_string(v[k]);
    }
    return out;
  };
  std::ostringstream os;
  os << "name = " << s.name << '\n'
     << "beta_minus = " << format_double(s.beta_minus) << '\n'
     << "beta_plus = " << format_double(s.beta_plus) << '\n'
     << "w_min_minus = " << format_double(s.w_min_minus) << '\n'
     << "w_min_plus = " << format_double(s.w_min_plus) << '\n'
     << "xi = " << format_double(s.xi) << '\n'
     << "e_min = " << format_double(s.e_min) << '\n'
     << "dependence = " << (s.dependence == Dependence::Comonotone ? "comonotone" : "independent") << '\n'
     << "tau = " << s.tau << '\n'
     << "buffer = " << format_double(s.buffer) << '\n'
     << "recovery = " << format_double(s.recovery) << '\n'
     << "n = " << list(s.n_list) << '\n'
     << "delta = " << list(s.delta_grid) << '\n'
     << "p = " << list(s.p_list) << '\n'
     << "repetitions = " << s.repetitions << '\n'
     << "shock = " << (s.shock == ShockKind::Uniform ? "uniform" : "largest") << '\n'
     << "seed = " << s.seed << '\n'
     << "output_dir = " << s.output_dir << '\n';
  if (s.workers) os << "workers = " << s.workers << '\n';
  return os.str();
}

/// Built-in configurations: desk scale by default, the full scale on request.
inline ExperimentSpec preset_spec(const std::string& name, bool full_scale = false) {
  ExperimentSpec s;
  s.name = name;
  s.output_dir = "out/" + name;
  auto range = [](std::size_t step, std::size_t count) {
    std::vector<std::size_t> v;
    for (std::size_t k = 1; k <= count; ++k) v.push_back(step * k);
    return v;
  };
  if (name == "convergence") {
    s.n_list = full_scale ? range(100, 100) : std::vector<std::size_t>{1000, 10000};
    s.repetitions = 100;
  } else if (name == "delta_sweep") {
    s.n_list = {full_scale ? 1000000u : 100000u};
    s.delta_grid = detail::parse_grid(full_scale ? "-1:0.001:1" : "-1:0.01:1");
    s.repetitions = 1;
  } else if (name == "jump_distribution") {
    s.n_list = {full_scale ? 1000000u : 100000u};
    s.delta_grid = detail::parse_grid(full_scale ? "-1:0.001:1" : "-0.5:0.002:0.5");
    s.repetitions = full_scale ? 10000 : 200;
  } else if (name == "average_fraction") {
    s.n_list = range(1000, 10);
    s.delta_grid = detail::parse_grid("-0.3:0.05:0");
    s.repetitions = full_scale ? 100000 : 200;
  } else if (name == "exposure_model") {
    s.n_list = full_scale ? range(100, 100) : std::vector<std::size_t>{1000, 5000, 10000};
    s.repetitions = full_scale ? 100 : 50;
  } else {
    throw SpecError(0, "unknown experiment '" + name + "'");
  }
  validate(s);
  return s;
}

// ---------------------------------------------------------------------------
// Tables

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write_csv(std::ostream& os) const {
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << r[k];
      os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
  }
  [[nodiscard]] std::string csv() const {
    std::ostringstream os;
    write_csv(os);
    return os.str();
  }
};

struct CellError {
  std::size_t cell;
  std::string message;
};

struct ExperimentOutput {
  Table table;
  nlohmann::ordered_json summary;
  std::vector<CellError> errors;
};

namespace detail {

namespace tag {
inline constexpr std::uint64_t kNetwork = 0x6e6574ULL;
inline constexpr std::uint64_t kShockScope = 0x73686bULL;
}  // namespace tag

inline std::uint64_t cell_seed(const ExperimentSpec& s, std::size_t n, std::size_t rep) {
  return derive_stream(s.seed, {tag::kNetwork, n, rep});
}

/// Runs one cell per (n, rep); rows of each cell are kept in cell order.
template <class Fn>
std::vector<std::vector<std::vector<std::string>>> run_cells(const ExperimentSpec& s,
                                                             std::vector<CellError>& errors, Fn&& fn) {
  const std::size_t cells = s.n_list.size() * s.repetitions;
  std::vector<std::vector<std::vector<std::string>>> out(cells);
  std::mutex m;
  parallel_for(cells, s.worker_count(), [&](std::size_t c) {
    const std::size_t n = s.n_list[c / s.repetitions];
    const std::size_t rep = c % s.repetitions;
    try {
      out[c] = fn(n, rep, cell_seed(s, n, rep));
    } catch (const std::exception& e) {
      std::lock_guard lock(m);
      errors.push_back({c, e.what()});
    }
  });
  std::sort(errors.begin(), errors.end(), [](const CellError& a, const CellError& b) { return a.cell < b.cell; });
  return out;
}

inline void append(Table& t, std::vector<std::vector<std::vector<std::string>>>&& cells) {
  for (auto& c : cells) {
    for (auto& r : c) t.rows.push_back(std::move(r));
  }
}

inline std::string fmt(double x) { return format_double(x); }

inline ShockModel shock_model(const ExperimentSpec& s, double p, std::uint64_t scope) {
  return s.shock == ShockKind::Uniform ? ShockModel::uniform(p, scope) : ShockModel::largest_fraction(p);
}

/// Threshold-model network (unit exposures) with the spec's weights.
inline FinancialNetwork threshold_network(const ExperimentSpec& s, std::size_t n, std::uint64_t seed,
                                          const ThresholdRule& tau) {
  NetworkConfig cfg;
  cfg.weights = s.weight_law();
  cfg.exposures = ExposureLaw::unit();
  cfg.capital = FunctionalThreshold{tau};
  return generate_network(cfg, n, seed);
}

inline std::vector<double> buffered_capitals(const FinancialNetwork& net, const CriticalExponents& ce,
                                             double delta) {
  const ThresholdRule tau = ThresholdRule::buffered(ce.alpha_c, ce.gamma_c, delta);
  std::vector<double> c(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) c[i] = threshold_capital(tau(net.bank(static_cast<BankId>(i)).w_minus));
  return c;
}

inline AnalyticPareto analytic_of(const ExperimentSpec& s, const ThresholdRule& tau, double p) {
  AnalyticPareto a;
  a.beta_minus = s.beta_minus;
  a.beta_plus = s.beta_plus;
  a.w_min_minus = s.w_min_minus;
  a.w_min_plus = s.w_min_plus;
  a.tau = tau;
  a.shock_p = p;
  a.shock = s.shock;
  a.coupling = s.dependence;
  return a;
}

}  // namespace detail

/// (n, p, rep, final_fraction); summary carries the asymptotic fraction per p.
inline ExperimentOutput exp_convergence(const ExperimentSpec& s) {
  validate(s);
  const ThresholdRule tau = parse_threshold_rule(s.tau, s.critical());
  ExperimentOutput out;
  out.table.header = {"n", "p", "rep", "final_fraction"};
  auto cells = detail::run_cells(s, out.errors, [&](std::size_t n, std::size_t rep, std::uint64_t seed) {
    const FinancialNetwork net = detail::threshold_network(s, n, seed, tau);
    CascadeEngine engine(net);
    std::vector<std::vector<std::string>> rows;
    for (double p : s.p_list) {
      const auto init = resolve_shock(detail::shock_model(s, p, detail::tag::kShockScope), net.banks(), seed);
      const auto r = engine.run(init, s.recovery);
      rows.push_back({std::to_string(n), detail::fmt(p), std::to_string(rep), detail::fmt(r.final_fraction)});
    }
    return rows;
  });
  detail::append(out.table, std::move(cells));
  auto& refs = out.summary["asymptotic"] = nlohmann::ordered_json::array();
  for (double p : s.p_list) {
    nlohmann::ordered_json j;
    j["p"] = p;
    try {
      const FixedPointFunctions fns(LimitDistribution{detail::analytic_of(s, tau, p), s.recovery});
      const FinalImportance fi = asymptotic_final_importance(fns);
      j["z_hat"] = fi.z_hat;
      j["final_fraction"] = fi.point;
      j["upper"] = fi.upper;
      j["limit_established"] = fi.limit_established;
    } catch (const std::exception& e) {
      j["error"] = e.what();
    }
    refs.push_back(j);
  }
  return out;
}

/// (n, rep, delta, final_fraction) on one skeleton per repetition; the
/// capitals follow the buffered rule of each delta.
inline ExperimentOutput exp_delta_sweep(const ExperimentSpec& s) {
  validate(s);
  const CriticalExponents ce = s.critical();
  const double p = s.p_list.front();
  ExperimentOutput out;
  out.table.header = {"n", "rep", "delta", "final_fraction"};
  auto cells = detail::run_cells(s, out.errors, [&](std::size_t n, std::size_t rep, std::uint64_t seed) {
    const FinancialNetwork net = detail::threshold_network(s, n, seed, ThresholdRule::constant(Threshold(2)));
    const auto init = resolve_shock(detail::shock_model(s, p, detail::tag::kShockScope), net.banks(), seed);
    CascadeEngine engine(net);
    std::vector<std::vector<std::string>> rows;
    for (double d : s.delta_grid) {
      const auto r = engine.run(init, s.recovery, detail::buffered_capitals(net, ce, d));
      rows.push_back({std::to_string(n), std::to_string(rep), detail::fmt(d), detail::fmt(r.final_fraction)});
    }
    return rows;
  });
  detail::append(out.table, std::move(cells));
  out.summary["p"] = p;
  return out;
}

struct JumpPoint {
  std::optional<double> delta;  // empty when censored
  std::size_t evaluations = 0;
};

/// Smallest grid delta whose final fraction is below 2p, by bisection over the
/// sorted grid. fraction_at must be nonincreasing in delta.
template <class FractionAt>
JumpPoint find_jump(const std::vector<double>& grid, double p, FractionAt&& fraction_at) {
  std::vector<double> g = grid;
  std::sort(g.begin(), g.end());
  JumpPoint jp;
  auto below = [&](std::size_t k) {
    ++jp.evaluations;
    return fraction_at(g[k]) < 2.0 * p;
  };
  if (!below(g.size() - 1)) return jp;
  if (below(0)) {
    jp.delta = g.front();
    return jp;
  }
  std::size_t lo = 0, hi = g.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (below(mid)) hi = mid;
    else lo = mid;
  }
  jp.delta = g[hi];
  return jp;
}

/// (n, rep, jump_delta, censored); summary carries the limit buffer for p.
inline ExperimentOutput exp_jump_distribution(const ExperimentSpec& s, bool with_reference = true) {
  validate(s);
  const CriticalExponents ce = s.critical();
  const double p = s.p_list.front();
  ExperimentOutput out;
  out.table.header = {"n", "rep", "jump_delta", "censored"};
  auto cells = detail::run_cells(s, out.errors, [&](std::size_t n, std::size_t rep, std::uint64_t seed) {
    const FinancialNetwork net = detail::threshold_network(s, n, seed, ThresholdRule::constant(Threshold(2)));
    const auto init = resolve_shock(detail::shock_model(s, p, detail::tag::kShockScope), net.banks(), seed);
    CascadeEngine engine(net);
    const JumpPoint jp = find_jump(s.delta_grid, p, [&](double d) {
      return engine.run(init, s.recovery, detail::buffered_capitals(net, ce, d)).final_fraction;
    });
    return std::vector<std::vector<std::string>>{{std::to_string(n), std::to_string(rep),
                                                  jp.delta ? detail::fmt(*jp.delta) : std::string("NA"),
                                                  jp.delta ? "0" : "1"}};
  });
  detail::append(out.table, std::move(cells));
  out.summary["p"] = p;
  if (with_reference && p > 0.0 && p <= 0.05 && s.recovery == 0.0 && s.dependence == Dependence::Comonotone) {
    const BufferResult b = min_buffer_delta(p, s.shock, BufferBase{s.beta_minus, s.beta_plus, s.w_min_minus, s.w_min_plus});
    if (b.found) out.summary["limit_buffer_delta"] = b.delta;
  }
  return out;
}

/// (n, delta, mean_fraction, repetitions).
inline ExperimentOutput exp_average_final_fraction(const ExperimentSpec& s) {
  validate(s);
  const CriticalExponents ce = s.critical();
  const double p = s.p_list.front();
  ExperimentOutput out;
  out.table.header = {"n", "delta", "mean_fraction", "repetitions"};
  auto cells = detail::run_cells(s, out.errors, [&](std::size_t n, std::size_t, std::uint64_t seed) {
    const FinancialNetwork net = detail::threshold_network(s, n, seed, ThresholdRule::constant(Threshold(2)));
    const auto init = resolve_shock(detail::shock_model(s, p, detail::tag::kShockScope), net.banks(), seed);
    CascadeEngine engine(net);
    std::vector<std::vector<std::string>> rows;
    for (double d : s.delta_grid) {
      rows.push_back({detail::fmt(engine.run(init, s.recovery, detail::buffered_capitals(net, ce, d)).final_fraction)});
    }
    return rows;
  });
  // Reduce in cell order: per n, per delta.
  for (std::size_t a = 0; a < s.n_list.size(); ++a) {
    for (std::size_t k = 0; k < s.delta_grid.size(); ++k) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t rep = 0; rep < s.repetitions; ++rep) {
        const auto& c = cells[a * s.repetitions + rep];
        if (c.size() != s.delta_grid.size()) continue;
        sum += detail::parse_real(c[k][0]);
        ++count;
      }
      out.table.rows.push_back({std::to_string(s.n_list[a]), detail::fmt(s.delta_grid[k]),
                                count ? detail::fmt(sum / static_cast<double>(count)) : std::string("NA"),
                                std::to_string(count)});
    }
  }
  out.summary["p"] = p;
  return out;
}

/// (n, rep, rule, final_fraction, total_capital) for the three exposure-model
/// capital rules on shared skeletons and exposures.
inline ExperimentOutput exp_exposure_model(const ExperimentSpec& s) {
  validate(s);
  const CriticalExponents ce = s.critical();
  const ThresholdRule tau = ThresholdRule::buffered(ce.alpha_c, ce.gamma_c, s.buffer);
  const ExposureLaw law = ExposureLaw::pareto(s.xi, s.e_min);
  const double p = s.p_list.front();
  const std::vector<CapitalRuleSpec> rules{MaxExposurePlusEps{}, RobustTopK{tau, -1.0}, AverageBased{tau, -1.0}};
  ExperimentOutput out;
  out.table.header = {"n", "rep", "rule", "final_fraction", "total_capital"};
  auto cells = detail::run_cells(s, out.errors, [&](std::size_t n, std::size_t rep, std::uint64_t seed) {
    const Weights w = sample_weights(s.weight_law(), n, seed);
    const Skeleton sk = sample_edges(w.w_minus, w.w_plus, seed, 1);
    FinancialNetwork net = sample_exposures_and_capitals(w, sk, law, ConstantThreshold{}, seed);
    const auto init = resolve_shock(detail::shock_model(s, p, detail::tag::kShockScope), net.banks(), seed);
    CascadeEngine engine(net);
    std::vector<std::vector<std::string>> rows;
    for (const auto& rule : rules) {
      const auto c = assign_capitals(net, rule, law);
      double total = 0.0;
      for (double x : c) total += x;
      const auto r = engine.run(init, s.recovery, c);
      rows.push_back({std::to_string(n), std::to_string(rep), capital_rule_name(rule), detail::fmt(r.final_fraction),
                      detail::fmt(total)});
    }
    return rows;
  });
  detail::append(out.table, std::move(cells));
  out.summary["p"] = p;
  out.summary["buffer"] = s.buffer;
  return out;
}

inline ExperimentOutput run_experiment(const ExperimentSpec& s) {
  validate(s);
  if (s.name == "convergence") return exp_convergence(s);
  if (s.name == "delta_sweep") return exp_delta_sweep(s);
  if (s.name == "jump_distribution") return exp_jump_distribution(s);
  if (s.name == "average_fraction") return exp_average_final_fraction(s);
  if (s.name == "exposure_model") return exp_exposure_model(s);
  throw SpecError(0, "unknown experiment '" + s.name + "'");
}

// ---------------------------------------------------------------------------
// Manifest

inline std::string sha1_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 15];
  }
  return out;
}

/// Hash git assigns to a blob with this content.
inline std::string git_blob_hash(std::string_view content) {
  std::string framed = "blob " + std::to_string(content.size());
  framed.push_back('\0');
  framed.append(content);
  return sha1_hex(framed);
}

struct Manifest {
  nlohmann::ordered_json json;
  std::filesystem::path path;
  [[nodiscard]] bool complete() const { return json.at("status") == "complete"; }
};

/// Writes <name>.csv, summary.json and manifest.json into the output
/// directory (created when missing).
inline Manifest write_outputs(const ExperimentSpec& s, const std::string& config_text, const ExperimentOutput& out) {
  const std::filesystem::path dir(s.output_dir);
  std::filesystem::create_directories(dir);

  auto write = [&](const std::string& file, const std::string& content) {
    std::ofstream f(dir / file, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + (dir / file).string());
    f << content;
    nlohmann::ordered_json j;
    j["file"] = file;
    j["bytes"] = content.size();
    j["sha1"] = sha1_hex(content);
    return j;
  };
  Manifest m;
  m.json["experiment"] = s.name;
  m.json["seed"] = s.seed;
  m.json["config_hash"] = git_blob_hash(config_text);
  m.json["status"] = out.errors.empty() ? "complete" : "partial";
  auto& files = m.json["files"] = nlohmann::ordered_json::array();
  files.push_back(write(s.name + ".csv", out.table.csv()));
  files.push_back(write("summary.json", out.summary.dump(1) + "\n"));
  auto& errs = m.json["errors"] = nlohmann::ordered_json::array();
  for (const auto& e : out.errors) errs.push_back({{"cell", e.cell}, {"message", e.message}});
  m.path = dir / "manifest.json";
  std::ofstream f(m.path, std::ios::binary);
  f << m.json.dump(1) << '\n';
  return m;
}

inline Manifest run(const ExperimentSpec& s, const std::string& config_text) {
  validate(s);
  std::filesystem::create_directories(s.output_dir);
  return write_outputs(s, config_text, run_experiment(s));
}

inline Manifest run_spec_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read spec file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  return run(parse_spec(text), text);
}

}  // namespace contagion
