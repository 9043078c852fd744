#pragma once

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "rstring/geometry.hpp"
#include "rstring/grid.hpp"
#include "rstring/integrator.hpp"
#include "rstring/potential.hpp"

namespace rstring {

// ---------------------------------------------------------------------------
// Minimal strict TOML dialect: sections (dotted names allowed), bare keys,
// strings, booleans, integers, floats, and (nested) arrays. Unknown keys are
// the caller's job; duplicate keys and tables are rejected here.

struct TomlValue;
using TomlArray = std::vector<TomlValue>;

struct TomlValue {
  std::variant<bool, long long, double, std::string, TomlArray> v;
  int line = 0;

  bool is_array() const { return std::holds_alternative<TomlArray>(v); }
  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_number() const {
    return std::holds_alternative<long long>(v) || std::holds_alternative<double>(v);
  }

  double as_double(const std::string& what) const {
    if (auto* d = std::get_if<double>(&v)) return *d;
    if (auto* i = std::get_if<long long>(&v)) return static_cast<double>(*i);
    throw ConfigError("config: " + what + " must be a number (line " +
                      std::to_string(line) + ")");
  }

  long long as_int(const std::string& what) const {
    if (auto* i = std::get_if<long long>(&v)) return *i;
    throw ConfigError("config: " + what + " must be an integer (line " +
                      std::to_string(line) + ")");
  }

  bool as_bool(const std::string& what) const {
    if (auto* b = std::get_if<bool>(&v)) return *b;
    throw ConfigError("config: " + what + " must be a boolean (line " +
                      std::to_string(line) + ")");
  }

  const std::string& as_string(const std::string& what) const {
    if (auto* s = std::get_if<std::string>(&v)) return *s;
    throw ConfigError("config: " + what + " must be a string (line " +
                      std::to_string(line) + ")");
  }

  const TomlArray& as_array(const std::string& what) const {
    if (auto* a = std::get_if<TomlArray>(&v)) return *a;
    throw ConfigError("config: " + what + " must be an array (line " +
                      std::to_string(line) + ")");
  }

  Vec as_vector(const std::string& what) const {
    const TomlArray& a = as_array(what);
    Vec out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
      out(i) = a[i].as_double(what + "[" + std::to_string(i) + "]");
    return out;
  }

  Mat as_matrix(const std::string& what) const {
    const TomlArray& a = as_array(what);
    if (a.empty()) throw ConfigError("config: " + what + " must not be empty");
    std::vector<Vec> rows;
    for (std::size_t i = 0; i < a.size(); ++i)
      rows.push_back(a[i].as_vector(what + "[" + std::to_string(i) + "]"));
    Mat out(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows[0].size())
        throw ConfigError("config: " + what + " rows differ in length");
      out.row(i) = rows[i].transpose();
    }
    return out;
  }

  std::vector<double> as_double_list(const std::string& what) const {
    const TomlArray& a = as_array(what);
    std::vector<double> out;
    for (std::size_t i = 0; i < a.size(); ++i)
      out.push_back(a[i].as_double(what + "[" + std::to_string(i) + "]"));
    return out;
  }

  std::vector<std::string> as_string_list(const std::string& what) const {
    const TomlArray& a = as_array(what);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < a.size(); ++i)
      out.push_back(a[i].as_string(what + "[" + std::to_string(i) + "]"));
    return out;
  }
};

struct TomlTable {
  std::map<std::string, TomlValue> values;
  std::map<std::string, TomlTable> tables;
};

namespace detail {

class TomlParser {
 public:
  explicit TomlParser(const std::string& text) : text_(text) {}

  TomlTable parse() {
    TomlTable root;
    TomlTable* current = &root;
    while (!eof()) {
      skip_blank();
      if (eof()) break;
      if (peek() == '[') {
        current = open_table(root);
      } else {
        read_key_value(*current);
      }
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("config: " + msg + " (line " + std::to_string(line_) + ")");
  }

  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  char take() {
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) take();
  }

  // whitespace, newlines, and comments between statements
  void skip_blank() {
    for (;;) {
      skip_inline_ws();
      if (eof()) return;
      if (peek() == '#') {
        while (!eof() && peek() != '\n') take();
      } else if (peek() == '\n' || peek() == '\r') {
        take();
      } else {
        return;
      }
    }
  }

  void expect_line_end() {
    skip_inline_ws();
    if (eof()) return;
    if (peek() == '#') {
      while (!eof() && peek() != '\n') take();
    }
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected trailing characters");
  }

  std::string bare_key() {
    std::string key;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                      peek() == '-'))
      key.push_back(take());
    if (key.empty()) fail("expected a key");
    return key;
  }

  TomlTable* open_table(TomlTable& root) {
    take();  // '['
    std::vector<std::string> parts;
    for (;;) {
      skip_inline_ws();
      parts.push_back(bare_key());
      skip_inline_ws();
      if (eof()) fail("unterminated section header");
      if (peek() == '.') {
        take();
        continue;
      }
      if (peek() == ']') {
        take();
        break;
      }
      fail("malformed section header");
    }
    expect_line_end();
    TomlTable* t = &root;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const bool last = (i + 1 == parts.size());
      if (last && t->tables.count(parts[i]))
        fail("duplicate section [" + parts[i] + "]");
      t = &t->tables[parts[i]];
    }
    return t;
  }

  void read_key_value(TomlTable& table) {
    const std::string key = bare_key();
    skip_inline_ws();
    if (eof() || take() != '=') fail("expected '=' after key '" + key + "'");
    skip_inline_ws();
    TomlValue value = read_value();
    expect_line_end();
    if (!table.values.emplace(key, std::move(value)).second)
      fail("duplicate key '" + key + "'");
  }

  TomlValue read_value() {
    if (eof()) fail("missing value");
    const int at = line_;
    TomlValue out;
    out.line = at;
    const char c = peek();
    if (c == '"') {
      out.v = read_string();
    } else if (c == '[') {
      out.v = read_array();
    } else {
      std::string token;
      while (!eof() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' &&
             peek() != '\r')
        token.push_back(take());
      while (!token.empty() && (token.back() == ' ' || token.back() == '\t'))
        token.pop_back();
      if (token == "true") {
        out.v = true;
      } else if (token == "false") {
        out.v = false;
      } else {
        out.v = parse_number(token);
      }
    }
    return out;
  }

  std::string read_string() {
    take();  // '"'
    std::string s;
    for (;;) {
      if (eof()) fail("unterminated string");
      char c = take();
      if (c == '"') break;
      if (c == '\n') fail("newline inside string");
      if (c == '\\') {
        if (eof()) fail("dangling escape");
        const char e = take();
        switch (e) {
          case '"': s.push_back('"'); break;
          case '\\': s.push_back('\\'); break;
          case 'n': s.push_back('\n'); break;
          case 't': s.push_back('\t'); break;
          default: fail(std::string("unsupported escape '\\") + e + "'");
        }
      } else {
        s.push_back(c);
      }
    }
    return s;
  }

  TomlArray read_array() {
    take();  // '['
    TomlArray items;
    for (;;) {
      skip_blank();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        take();
        break;
      }
      items.push_back(read_value());
      skip_blank();
      if (eof()) fail("unterminated array");
      if (peek() == ',') {
        take();
        continue;
      }
      if (peek() == ']') {
        take();
        break;
      }
      fail("expected ',' or ']' in array");
    }
    return items;
  }

  std::variant<bool, long long, double, std::string, TomlArray> parse_number(
      const std::string& token) {
    if (token.empty()) fail("missing value");
    bool integral = true;
    for (std::size_t i = 0; i < token.size(); ++i) {
      const char c = token[i];
      if (std::isdigit(static_cast<unsigned char>(c))) continue;
      if ((c == '+' || c == '-') && i == 0) continue;
      integral = false;
      break;
    }
    errno = 0;
    if (integral) {
      char* end = nullptr;
      const long long v = std::strtoll(token.c_str(), &end, 10);
      if (errno == ERANGE) fail("integer '" + token + "' out of range");
      if (end == token.c_str() + token.size()) return v;
    }
    char* end = nullptr;
    const double d = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size() || token.c_str() == end)
      fail("cannot parse value '" + token + "'");
    return d;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

inline void reject_unknown_keys(const TomlTable& table, const std::string& section,
                                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : table.values) {
    bool ok = false;
    for (const char* k : known)
      if (key == k) ok = true;
    if (!ok)
      throw ConfigError("config: unknown key '" + key + "' in [" + section + "] (line " +
                        std::to_string(value.line) + ")");
  }
  if (!table.tables.empty())
    throw ConfigError("config: unexpected subsection under [" + section + "]");
}

inline const TomlValue& require_key(const TomlTable& table, const std::string& section,
                                    const std::string& key) {
  auto it = table.values.find(key);
  if (it == table.values.end())
    throw ConfigError("config: [" + section + "] is missing required key '" + key + "'");
  return it->second;
}

inline const TomlValue* find_key(const TomlTable& table, const std::string& key) {
  auto it = table.values.find(key);
  return it == table.values.end() ? nullptr : &it->second;
}

}  // namespace detail

inline TomlTable parse_toml(const std::string& text) {
  return detail::TomlParser(text).parse();
}

// ---------------------------------------------------------------------------
// RunConfig: the validated object graph behind a config file

enum class InitialKind { Line, Bridge, Invariant };

struct VerifyOptions {
  std::vector<std::string> tests;  // empty means the full default list
  int replicas = 100;
  double t_relax = 2.0;
  double eps0 = 0.01;
  std::vector<double> n_list{10.0, 100.0, 1000.0, 10000.0};
  long ibp_samples = 100000;
  double ess_floor = 500.0;
};

struct OutputOptions {
  std::string directory = "out";
  std::string prefix = "run";
};

struct RunConfig {
  std::uint64_t master_seed;
  Domain domain;
  Potential potential;
  Grid grid;
  SimConfig sim;  // initial left empty; resolved via make_initial
  InitialKind initial_kind = InitialKind::Line;
  VerifyOptions verify;
  OutputOptions output;

  PathState make_initial(SeedStream& rng) const {
    switch (initial_kind) {
      case InitialKind::Line:
        return grid.line();
      case InitialKind::Bridge:
        return sample_bridge(grid, rng);
      case InitialKind::Invariant: {
        Yosida yos(potential, sim.n);
        return sample_invariant_nu_n(grid, yos, SampleStrategy::Rejection, rng).path;
      }
    }
    throw ConfigError("config: unreachable initial kind");
  }
};

namespace detail {

inline Domain load_domain(const TomlTable& t) {
  const std::string& kind = require_key(t, "domain", "kind").as_string("domain.kind");
  if (kind == "interval") {
    reject_unknown_keys(t, "domain", {"kind", "lo", "hi"});
    return Domain::interval(require_key(t, "domain", "lo").as_double("domain.lo"),
                            require_key(t, "domain", "hi").as_double("domain.hi"));
  }
  if (kind == "box") {
    reject_unknown_keys(t, "domain", {"kind", "lo", "hi"});
    return Domain::box(require_key(t, "domain", "lo").as_vector("domain.lo"),
                       require_key(t, "domain", "hi").as_vector("domain.hi"));
  }
  if (kind == "ball") {
    reject_unknown_keys(t, "domain", {"kind", "center", "radius"});
    return Domain::ball(require_key(t, "domain", "center").as_vector("domain.center"),
                        require_key(t, "domain", "radius").as_double("domain.radius"));
  }
  if (kind == "ellipsoid") {
    reject_unknown_keys(t, "domain", {"kind", "center", "semiaxes"});
    return Domain::ellipsoid(
        require_key(t, "domain", "center").as_vector("domain.center"),
        require_key(t, "domain", "semiaxes").as_vector("domain.semiaxes"));
  }
  if (kind == "polytope") {
    reject_unknown_keys(t, "domain", {"kind", "rows", "offsets"});
    return Domain::polytope(require_key(t, "domain", "rows").as_matrix("domain.rows"),
                            require_key(t, "domain", "offsets").as_vector("domain.offsets"));
  }
  throw ConfigError("config: unknown domain kind '" + kind + "'");
}

inline Potential load_potential(const TomlTable& t, const Domain& dom) {
  const std::string& kind = require_key(t, "potential", "kind").as_string("potential.kind");
  if (kind == "zero") {
    reject_unknown_keys(t, "potential", {"kind"});
    return Potential::zero(dom);
  }
  if (kind == "quadratic") {
    reject_unknown_keys(t, "potential", {"kind", "center", "weight"});
    return Potential::quadratic(
        dom, require_key(t, "potential", "center").as_vector("potential.center"),
        require_key(t, "potential", "weight").as_double("potential.weight"));
  }
  if (kind == "log_barrier") {
    reject_unknown_keys(t, "potential", {"kind"});
    return Potential::log_barrier(dom);
  }
  throw ConfigError("config: unknown potential kind '" + kind + "'");
}

inline Grid load_grid(const TomlTable& t) {
  reject_unknown_keys(t, "grid", {"m", "a", "b"});
  const long long m = require_key(t, "grid", "m").as_int("grid.m");
  if (m < 3 || m > 100000) throw ConfigError("config: grid.m out of range");
  return Grid(static_cast<int>(m), require_key(t, "grid", "a").as_vector("grid.a"),
              require_key(t, "grid", "b").as_vector("grid.b"));
}

inline InitialKind load_initial_kind(const std::string& s) {
  if (s == "line") return InitialKind::Line;
  if (s == "bridge") return InitialKind::Bridge;
  if (s == "invariant") return InitialKind::Invariant;
  throw ConfigError("config: integrator.initial must be line, bridge, or invariant");
}

}  // namespace detail

inline RunConfig load_run_config_text(const std::string& text) {
  const TomlTable root = parse_toml(text);

  for (const auto& [name, sub] : root.tables) {
    (void)sub;
    if (name != "domain" && name != "potential" && name != "grid" &&
        name != "integrator" && name != "verify" && name != "output")
      throw ConfigError("config: unknown section [" + name + "]");
  }
  detail::reject_unknown_keys(TomlTable{root.values, {}}, "top level", {"master_seed"});

  const long long seed = detail::require_key(root, "top level", "master_seed")
                             .as_int("master_seed");
  if (seed < 0) throw ConfigError("config: master_seed must be nonnegative");

  auto section = [&](const char* name) -> const TomlTable& {
    auto it = root.tables.find(name);
    if (it == root.tables.end())
      throw ConfigError(std::string("config: missing section [") + name + "]");
    return it->second;
  };

  Domain dom = detail::load_domain(section("domain"));
  Potential pot = detail::load_potential(section("potential"), dom);
  Grid grid = detail::load_grid(section("grid"));
  validate_grid(grid, dom);

  const TomlTable& integ = section("integrator");
  detail::reject_unknown_keys(
      integ, "integrator", {"dt", "steps", "record_every", "n", "noise_scale", "initial"});
  SimConfig sim;
  sim.dt = detail::require_key(integ, "integrator", "dt").as_double("integrator.dt");
  sim.steps = detail::require_key(integ, "integrator", "steps").as_int("integrator.steps");
  sim.n = detail::require_key(integ, "integrator", "n").as_double("integrator.n");
  if (const TomlValue* v = detail::find_key(integ, "record_every"))
    sim.record_every = static_cast<int>(v->as_int("integrator.record_every"));
  if (const TomlValue* v = detail::find_key(integ, "noise_scale"))
    sim.noise_scale = v->as_double("integrator.noise_scale");
  InitialKind init_kind = InitialKind::Line;
  if (const TomlValue* v = detail::find_key(integ, "initial"))
    init_kind = detail::load_initial_kind(v->as_string("integrator.initial"));
  sim.initial = grid.line();
  validate_config(sim, grid);
  sim.initial = PathState();

  VerifyOptions verify;
  if (auto it = root.tables.find("verify"); it != root.tables.end()) {
    const TomlTable& v = it->second;
    detail::reject_unknown_keys(v, "verify",
                                {"tests", "replicas", "t_relax", "eps0", "n_list",
                                 "ibp_samples", "ess_floor"});
    if (const TomlValue* x = detail::find_key(v, "tests"))
      verify.tests = x->as_string_list("verify.tests");
    if (const TomlValue* x = detail::find_key(v, "replicas"))
      verify.replicas = static_cast<int>(x->as_int("verify.replicas"));
    if (const TomlValue* x = detail::find_key(v, "t_relax"))
      verify.t_relax = x->as_double("verify.t_relax");
    if (const TomlValue* x = detail::find_key(v, "eps0"))
      verify.eps0 = x->as_double("verify.eps0");
    if (const TomlValue* x = detail::find_key(v, "n_list"))
      verify.n_list = x->as_double_list("verify.n_list");
    if (const TomlValue* x = detail::find_key(v, "ibp_samples"))
      verify.ibp_samples = x->as_int("verify.ibp_samples");
    if (const TomlValue* x = detail::find_key(v, "ess_floor"))
      verify.ess_floor = x->as_double("verify.ess_floor");
    if (verify.replicas < 2) throw ConfigError("config: verify.replicas must be at least 2");
    if (!(verify.t_relax > 0)) throw ConfigError("config: verify.t_relax must be positive");
    if (!(verify.eps0 > 0)) throw ConfigError("config: verify.eps0 must be positive");
    if (verify.ibp_samples < 100)
      throw ConfigError("config: verify.ibp_samples must be at least 100");
    for (double n : verify.n_list)
      if (!(n > 0)) throw ConfigError("config: verify.n_list entries must be positive");
  }

  OutputOptions output;
  if (auto it = root.tables.find("output"); it != root.tables.end()) {
    const TomlTable& o = it->second;
    detail::reject_unknown_keys(o, "output", {"directory", "prefix"});
    if (const TomlValue* x = detail::find_key(o, "directory"))
      output.directory = x->as_string("output.directory");
    if (const TomlValue* x = detail::find_key(o, "prefix"))
      output.prefix = x->as_string("output.prefix");
  }

  return RunConfig{static_cast<std::uint64_t>(seed), std::move(dom), std::move(pot),
                   std::move(grid),  std::move(sim),  init_kind,
                   std::move(verify), std::move(output)};
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_run_config_text(ss.str());
}

}  // namespace rstring
