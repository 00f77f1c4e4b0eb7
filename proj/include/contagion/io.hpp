#pragma once

// Network and result serialization.
//
// Text form:
//   n=<int>
//   B <id> <w-> <w+> <s> <c|inf>
//   E <debtor> <creditor> <exposure>
// Ids are 0-based. Blank lines and lines starting with '#' are skipped.
// Reals are written in shortest round-trip form, so files reload bit-exactly.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "contagion/model.hpp"

namespace contagion {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, std::size_t offset, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ", offset " + std::to_string(offset) + ": " +
                           what),
        line_(line),
        offset_(offset) {}

  [[nodiscard]] std::size_t line() const { return line_; }
  [[nodiscard]] std::size_t offset() const { return offset_; }

 private:
  std::size_t line_;
  std::size_t offset_;
};

inline std::string format_double(double x) {
  if (std::isinf(x) && x > 0) return "inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc()) throw std::runtime_error("cannot format number");
  return std::string(buf, end);
}

namespace detail {

class LineCursor {
 public:
  LineCursor(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  std::string_view token(const char* what) {
    skip_space();
    if (pos_ >= text_.size()) fail(std::string("expected ") + what);
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\t' && text_[pos_] != '\r') ++pos_;
    start_ = start;
    return text_.substr(start, pos_ - start);
  }

  double real(const char* what, bool allow_inf = false) {
    const auto tok = token(what);
    if (allow_inf && tok == "inf") return kInfiniteCapital;
    double v = 0.0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v)) {
      fail(std::string("malformed ") + what + " '" + std::string(tok) + "'");
    }
    return v;
  }

  std::uint64_t integer(const char* what) {
    const auto tok = token(what);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size()) {
      fail(std::string("malformed ") + what + " '" + std::string(tok) + "'");
    }
    return v;
  }

  void expect_end() {
    skip_space();
    if (pos_ < text_.size()) {
      start_ = pos_;
      fail("unexpected trailing text");
    }
  }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(line_, start_ + 1, msg); }

 private:
  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
    start_ = pos_;
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
  std::size_t start_ = 0;
};

}  // namespace detail

inline void write_network_text(std::ostream& os, const FinancialNetwork& net) {
  os << "n=" << net.size() << '\n';
  for (const BankProfile& b : net.banks()) {
    os << "B " << b.id << ' ' << format_double(b.w_minus) << ' ' << format_double(b.w_plus) << ' '
       << format_double(b.importance) << ' ' << format_double(b.capital) << '\n';
  }
  for (const Edge& e : net.edges()) {
    os << "E " << e.debtor << ' ' << e.creditor << ' ' << format_double(e.exposure) << '\n';
  }
}

inline std::string serialize_text(const FinancialNetwork& net) {
  std::ostringstream os;
  write_network_text(os, net);
  return os.str();
}

inline FinancialNetwork read_network_text(std::istream& is) {
  std::string line;
  std::size_t lineno = 0;
  std::int64_t n = -1;
  std::vector<BankProfile> banks;
  std::vector<Edge> edges;
  std::vector<char> seen;
  while (std::getline(is, line)) {
    ++lineno;
    std::string_view sv(line);
    const auto first = sv.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || sv[first] == '#') continue;
    detail::LineCursor cur(sv, lineno);
    if (n < 0) {
      const auto tok = cur.token("header");
      if (tok.substr(0, 2) != "n=") cur.fail("expected header 'n=<count>'");
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(tok.data() + 2, tok.data() + tok.size(), v);
      if (ec != std::errc() || p != tok.data() + tok.size() || tok.size() == 2) cur.fail("malformed bank count");
      cur.expect_end();
      n = static_cast<std::int64_t>(v);
      banks.resize(v);
      seen.assign(v, 0);
      continue;
    }
    const auto kind = cur.token("record kind");
    if (kind == "B") {
      const auto id = cur.integer("bank id");
      if (id >= static_cast<std::uint64_t>(n)) cur.fail("bank id out of range");
      if (seen[id]) cur.fail("bank listed twice");
      seen[id] = 1;
      BankProfile b;
      b.id = static_cast<BankId>(id);
      b.w_minus = cur.real("in-weight");
      b.w_plus = cur.real("out-weight");
      b.importance = cur.real("importance");
      b.capital = cur.real("capital", true);
      cur.expect_end();
      banks[id] = b;
    } else if (kind == "E") {
      Edge e;
      const auto i = cur.integer("debtor id");
      if (i >= static_cast<std::uint64_t>(n)) cur.fail("debtor id out of range");
      const auto j = cur.integer("creditor id");
      if (j >= static_cast<std::uint64_t>(n)) cur.fail("creditor id out of range");
      e.debtor = static_cast<BankId>(i);
      e.creditor = static_cast<BankId>(j);
      e.exposure = cur.real("exposure");
      cur.expect_end();
      edges.push_back(e);
    } else {
      cur.fail("unknown record kind '" + std::string(kind) + "'");
    }
  }
  if (n < 0) throw ParseError(lineno + 1, 1, "missing header 'n=<count>'");
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (!seen[i]) throw ParseError(lineno + 1, 1, "bank " + std::to_string(i) + " missing");
  }
  return FinancialNetwork(std::move(banks), std::move(edges));
}

inline FinancialNetwork deserialize_text(const std::string& text) {
  std::istringstream is(text);
  return read_network_text(is);
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json capital_to_json(double c) {
  if (std::isinf(c)) return "inf";
  return c;
}

inline nlohmann::ordered_json network_to_json(const FinancialNetwork& net) {
  nlohmann::ordered_json j;
  j["n"] = net.size();
  auto& banks = j["banks"] = nlohmann::ordered_json::array();
  for (const BankProfile& b : net.banks()) {
    nlohmann::ordered_json jb;
    jb["id"] = b.id;
    jb["w_minus"] = b.w_minus;
    jb["w_plus"] = b.w_plus;
    jb["importance"] = b.importance;
    jb["capital"] = capital_to_json(b.capital);
    banks.push_back(std::move(jb));
  }
  auto& edges = j["edges"] = nlohmann::ordered_json::array();
  for (const Edge& e : net.edges()) {
    nlohmann::ordered_json je;
    je["debtor"] = e.debtor;
    je["creditor"] = e.creditor;
    je["exposure"] = e.exposure;
    edges.push_back(std::move(je));
  }
  return j;
}

inline std::string serialize_json(const FinancialNetwork& net) { return network_to_json(net).dump(1) + "\n"; }

inline FinancialNetwork network_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("n").get<std::size_t>();
    std::vector<BankProfile> banks(n);
    std::vector<char> seen(n, 0);
    for (const auto& jb : j.at("banks")) {
      const auto id = jb.at("id").get<std::size_t>();
      if (id >= n) throw std::invalid_argument("bank id out of range");
      if (seen[id]) throw std::invalid_argument("bank listed twice");
      seen[id] = 1;
      BankProfile b;
      b.id = static_cast<BankId>(id);
      b.w_minus = jb.at("w_minus").get<double>();
      b.w_plus = jb.at("w_plus").get<double>();
      b.importance = jb.at("importance").get<double>();
      const auto& c = jb.at("capital");
      if (c.is_string()) {
        if (c.get<std::string>() != "inf") throw std::invalid_argument("capital string must be \"inf\"");
        b.capital = kInfiniteCapital;
      } else {
        b.capital = c.get<double>();
      }
      banks[id] = b;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (!seen[i]) throw std::invalid_argument("bank " + std::to_string(i) + " missing");
    }
    std::vector<Edge> edges;
    for (const auto& je : j.at("edges")) {
      edges.push_back(Edge{je.at("debtor").get<BankId>(), je.at("creditor").get<BankId>(),
                           je.at("exposure").get<double>()});
    }
    return FinancialNetwork(std::move(banks), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("network JSON: ") + e.what());
  }
}

inline FinancialNetwork deserialize_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset -> line/column
    std::size_t line = 1;
    std::size_t col = 1;
    for (std::size_t k = 0; k + 1 < e.byte && k < text.size(); ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(line, col, e.what());
  }
  return network_from_json(j);
}

/// Text unless the first non-blank character opens a JSON object.
inline FinancialNetwork deserialize_any(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') return deserialize_json(text);
  return deserialize_text(text);
}

// ---------------------------------------------------------------------------
// Results

inline nlohmann::ordered_json result_to_json(const CascadeResult& r) {
  nlohmann::ordered_json j;
  j["defaulted"] = r.defaulted;
  j["total_importance"] = r.total_importance;
  j["rounds"] = r.rounds;
  j["per_round_sizes"] = r.per_round_sizes;
  j["final_fraction"] = r.final_fraction;
  return j;
}

inline CascadeResult result_from_json(const nlohmann::json& j) {
  CascadeResult r;
  r.defaulted = j.at("defaulted").get<std::vector<BankId>>();
  r.total_importance = j.at("total_importance").get<double>();
  r.rounds = j.at("rounds").get<std::size_t>();
  r.per_round_sizes = j.at("per_round_sizes").get<std::vector<std::size_t>>();
  r.final_fraction = j.at("final_fraction").get<double>();
  return r;
}

inline void write_rounds_csv(std::ostream& os, const CascadeResult& r) {
  os << "round,new_defaults,cumulative\n";
  std::size_t cum = 0;
  for (std::size_t k = 0; k < r.per_round_sizes.size(); ++k) {
    cum += r.per_round_sizes[k];
    os << k << ',' << r.per_round_sizes[k] << ',' << cum << '\n';
  }
}

}  // namespace contagion
