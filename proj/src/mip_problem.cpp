#include "restore/mip.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace restore::mip {

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::TimeLimit: return "time_limit";
    case SolveStatus::NumericFailure: return "numeric_failure";
  }
  return "unknown";
}

int MilpProblem::add_variable(const std::string& name, VarKind kind, double lower,
                              double upper) {
  if (lower > upper) throw ModelError("variable " + name + " has lower > upper");
  if (kind == VarKind::Binary && (lower < 0.0 || upper > 1.0))
    throw ModelError("binary variable " + name + " has bounds outside [0,1]");
  vars_.push_back({name, kind, lower, upper});
  priority_.push_back(0);
  obj_linear_.push_back(0.0);
  obj_quad_.push_back(0.0);
  return static_cast<int>(vars_.size()) - 1;
}

void MilpProblem::add_constraint(std::vector<std::pair<int, double>> terms, Sense sense,
                                 double rhs, std::string name) {
  for (auto& [v, c] : terms) {
    if (v < 0 || v >= variable_count())
      throw ModelError("constraint " + name + " references undeclared variable");
  }
  cons_.push_back({std::move(terms), sense, rhs, std::move(name)});
}

void MilpProblem::set_objective_coeff(int var, double coeff) { obj_linear_.at(var) = coeff; }
void MilpProblem::add_objective_coeff(int var, double coeff) { obj_linear_.at(var) += coeff; }

void MilpProblem::add_objective_quad(int var, double coeff) {
  if (vars_.at(var).kind != VarKind::Binary)
    throw ModelError("quadratic objective term on non-binary variable " + vars_[var].name);
  obj_quad_[var] += coeff;
}

void MilpProblem::set_bounds(int var, double lower, double upper) {
  if (lower > upper)
    throw ModelError("variable " + vars_.at(var).name + " would get lower > upper");
  vars_.at(var).lower = lower;
  vars_[var].upper = upper;
}

int MilpProblem::variable_id(const std::string& name) const {
  for (int i = 0; i < variable_count(); ++i)
    if (vars_[i].name == name) return i;
  return -1;
}

std::vector<double> MilpProblem::folded_objective() const {
  std::vector<double> c = obj_linear_;
  for (int i = 0; i < variable_count(); ++i) c[i] += obj_quad_[i];  // x^2 == x on binaries
  return c;
}

double MilpProblem::evaluate_objective(const std::vector<double>& x) const {
  double v = obj_constant_;
  for (int i = 0; i < variable_count(); ++i)
    v += obj_linear_[i] * x[i] + obj_quad_[i] * x[i] * x[i];
  return v;
}

void MilpProblem::check() const {
  if (variable_count() == 0) throw ModelError("problem has no variables");
  for (int i = 0; i < variable_count(); ++i) {
    const Variable& v = vars_[i];
    if (v.kind == VarKind::Binary && (v.lower < -kIntegralityTol || v.upper > 1.0 + kIntegralityTol))
      throw ModelError("binary variable " + v.name + " has bounds outside [0,1]");
    if (obj_quad_[i] != 0.0 && v.kind != VarKind::Binary)
      throw ModelError("quadratic objective term on non-binary variable " + v.name);
    if (!(v.lower <= v.upper)) throw ModelError("variable " + v.name + " has empty domain");
  }
}

// ---------------------------------------------------------------------------
// Backend registry

namespace {
std::mutex g_backend_mutex;
std::unordered_map<std::string, std::shared_ptr<SolverBackend>> g_backends;
std::shared_ptr<SolverBackend> g_active;
}  // namespace

void register_backend(std::shared_ptr<SolverBackend> backend) {
  std::lock_guard<std::mutex> lock(g_backend_mutex);
  const std::string name = backend->name();
  if (g_backends.count(name)) throw ModelError("backend already registered: " + name);
  g_backends[name] = backend;
  g_active = backend;
}

void clear_backends() {
  std::lock_guard<std::mutex> lock(g_backend_mutex);
  g_backends.clear();
  g_active.reset();
}

std::shared_ptr<SolverBackend> active_backend() {
  std::lock_guard<std::mutex> lock(g_backend_mutex);
  return g_active;
}

// ---------------------------------------------------------------------------
// LP-format text dump/load (grammar in docs/lp_format.md)

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_terms(std::ostream& os, const std::vector<std::pair<int, double>>& terms,
                 const MilpProblem& p) {
  bool first = true;
  for (auto [v, c] : terms) {
    if (c >= 0.0 && !first) os << " + ";
    if (c < 0.0) os << (first ? "- " : " - ");
    os << fmt(std::abs(c)) << ' ' << p.variable(v).name;
    first = false;
  }
  if (first) os << "0";
}

}  // namespace

std::string dump_lp(const MilpProblem& p) {
  std::ostringstream os;
  os << (p.objective_sense() == ObjSense::Maximize ? "maximize\n" : "minimize\n");
  os << " obj:";
  bool wrote = false;
  for (int i = 0; i < p.variable_count(); ++i) {
    double c = p.objective_coeff(i);
    if (c == 0.0) continue;
    os << (c < 0.0 ? " - " : (wrote ? " + " : " ")) << fmt(std::abs(c)) << ' '
       << p.variable(i).name;
    wrote = true;
  }
  for (int i = 0; i < p.variable_count(); ++i) {
    double q = p.objective_quad(i);
    if (q == 0.0) continue;
    os << (q < 0.0 ? " - " : (wrote ? " + " : " ")) << fmt(std::abs(q)) << ' '
       << p.variable(i).name << "^2";
    wrote = true;
  }
  if (p.objective_constant() != 0.0) {
    double c = p.objective_constant();
    os << (c < 0.0 ? " - " : (wrote ? " + " : " ")) << fmt(std::abs(c));
    wrote = true;
  }
  if (!wrote) os << " 0";
  os << "\nsubject to\n";
  for (int i = 0; i < p.constraint_count(); ++i) {
    const Constraint& con = p.constraint(i);
    os << ' ' << (con.name.empty() ? "c" + std::to_string(i) : con.name) << ": ";
    write_terms(os, con.terms, p);
    switch (con.sense) {
      case Sense::LessEqual: os << " <= "; break;
      case Sense::Equal: os << " = "; break;
      case Sense::GreaterEqual: os << " >= "; break;
    }
    os << fmt(con.rhs) << '\n';
  }
  os << "bounds\n";
  for (int i = 0; i < p.variable_count(); ++i) {
    const Variable& v = p.variable(i);
    os << ' ';
    os << (std::isinf(v.lower) ? "-inf" : fmt(v.lower)) << " <= " << v.name << " <= "
       << (std::isinf(v.upper) ? "inf" : fmt(v.upper)) << '\n';
  }
  os << "binaries\n";
  for (int i = 0; i < p.variable_count(); ++i)
    if (p.variable(i).kind == VarKind::Binary) os << ' ' << p.variable(i).name << '\n';
  os << "end\n";
  return os.str();
}

void dump_lp_file(const MilpProblem& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ModelError("cannot write " + path);
  out << dump_lp(p);
}

namespace {

struct Tokenizer {
  std::string text;
  size_t pos = 0;

  // Tokens: numbers, identifiers (anything not whitespace/operator), and the
  // operators + - <= >= = : ^2
  std::vector<std::string> tokens;

  void run() {
    while (pos < text.size()) {
      char c = text[pos];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
        continue;
      }
      if (c == '+' || c == '-' || c == ':') {
        tokens.push_back(std::string(1, c));
        ++pos;
        continue;
      }
      if (c == '<' || c == '>') {
        if (pos + 1 < text.size() && text[pos + 1] == '=') {
          tokens.push_back(std::string(1, c) + "=");
          pos += 2;
          continue;
        }
        throw ModelError("lp parse: bare '<' or '>'");
      }
      if (c == '=') {
        tokens.push_back("=");
        ++pos;
        continue;
      }
      size_t start = pos;
      bool numeric = std::isdigit(static_cast<unsigned char>(c)) || c == '.';
      while (pos < text.size()) {
        char d = text[pos];
        // Keep scientific-notation exponents inside numeric tokens.
        if (numeric && (d == 'e' || d == 'E') && pos + 1 < text.size() &&
            (text[pos + 1] == '+' || text[pos + 1] == '-')) {
          pos += 2;
          continue;
        }
        if (std::isspace(static_cast<unsigned char>(d)) || d == '+' || d == '-' ||
            d == '<' || d == '>' || d == '=' || d == ':')
          break;
        ++pos;
      }
      tokens.push_back(text.substr(start, pos - start));
    }
  }
};

bool is_number(const std::string& t, double* out) {
  if (t == "inf") {
    *out = kInfinity;
    return true;
  }
  if (t == "-inf") {
    *out = -kInfinity;
    return true;
  }
  char* end = nullptr;
  double v = std::strtod(t.c_str(), &end);
  if (end == t.c_str() + t.size() && !t.empty() &&
      (std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '.' || t[0] == '-' ||
       t[0] == '+')) {
    *out = v;
    return true;
  }
  return false;
}

}  // namespace

MilpProblem load_lp(const std::string& text) {
  Tokenizer tz;
  tz.text = text;
  tz.run();
  const auto& tk = tz.tokens;
  size_t i = 0;
  auto expect = [&](const std::string& s) {
    if (i >= tk.size() || tk[i] != s) throw ModelError("lp parse: expected '" + s + "'");
    ++i;
  };
  auto peek = [&](const std::string& s) { return i < tk.size() && tk[i] == s; };

  MilpProblem p;
  ObjSense sense;
  if (peek("maximize")) {
    sense = ObjSense::Maximize;
    ++i;
  } else if (peek("minimize")) {
    sense = ObjSense::Minimize;
    ++i;
  } else {
    throw ModelError("lp parse: missing objective sense");
  }
  p.set_objective_sense(sense);

  std::unordered_map<std::string, int> ids;
  // First pass over the bounds/binaries sections to declare variables is
  // avoided by creating variables lazily with default bounds, then patching.
  auto var_of = [&](const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    int id = p.add_continuous(name, -kInfinity, kInfinity);
    ids[name] = id;
    return id;
  };

  // Linear expression: [sign] [coef] name [^2] ... ; returns terms (including
  // quadratic markers) and accumulated constant.
  struct Term {
    int var;
    double coef;
    bool quad;
  };
  auto parse_expr = [&](std::vector<Term>* terms, double* constant) {
    double sign = 1.0;
    bool expect_operand = true;
    while (i < tk.size()) {
      if (tk[i] == "+" || tk[i] == "-") {
        sign *= (tk[i] == "-") ? -1.0 : 1.0;
        ++i;
        expect_operand = true;
        continue;
      }
      if (tk[i] == "<=" || tk[i] == ">=" || tk[i] == "=") break;
      auto is_keyword = [](const std::string& t) {
        return t == "subject" || t == "to" || t == "bounds" || t == "binaries" ||
               t == "end";
      };
      double num;
      if (is_number(tk[i], &num)) {
        ++i;
        // Either "coef name" or a bare constant.
        if (i < tk.size() && tk[i] != "+" && tk[i] != "-" && tk[i] != "<=" &&
            tk[i] != ">=" && tk[i] != "=" && !is_keyword(tk[i]) &&
            !is_number(tk[i], &num)) {
          std::string name = tk[i];
          bool quad = false;
          if (name.size() > 2 && name.substr(name.size() - 2) == "^2") {
            quad = true;
            name = name.substr(0, name.size() - 2);
          }
          double coef;
          is_number(tk[i - 1], &coef);
          terms->push_back({var_of(name), sign * coef, quad});
          ++i;
        } else {
          *constant += sign * num;
        }
      } else {
        // Keyword ends the expression.
        if (tk[i] == "subject" || tk[i] == "bounds" || tk[i] == "binaries" ||
            tk[i] == "end")
          break;
        std::string name = tk[i];
        bool quad = false;
        if (name.size() > 2 && name.substr(name.size() - 2) == "^2") {
          quad = true;
          name = name.substr(0, name.size() - 2);
        }
        terms->push_back({var_of(name), sign, quad});
        ++i;
      }
      sign = 1.0;
      expect_operand = false;
    }
    (void)expect_operand;
  };

  expect("obj");
  expect(":");
  std::vector<Term> obj_terms;
  double obj_const = 0.0;
  parse_expr(&obj_terms, &obj_const);
  expect("subject");
  expect("to");

  auto signed_number = [&](double* out) {
    double sign = 1.0;
    while (i < tk.size() && (tk[i] == "-" || tk[i] == "+")) {
      if (tk[i] == "-") sign = -sign;
      ++i;
    }
    if (i >= tk.size() || !is_number(tk[i], out))
      throw ModelError("lp parse: expected a number");
    *out *= sign;
    ++i;
  };

  struct RawCon {
    std::string name;
    std::vector<Term> terms;
    Sense sense;
    double rhs;
  };
  std::vector<RawCon> raw;
  while (i < tk.size() && tk[i] != "bounds" && tk[i] != "binaries" && tk[i] != "end") {
    RawCon rc;
    rc.name = tk[i];
    ++i;
    expect(":");
    double cst = 0.0;
    parse_expr(&rc.terms, &cst);
    if (i >= tk.size()) throw ModelError("lp parse: constraint missing relation");
    if (tk[i] == "<=")
      rc.sense = Sense::LessEqual;
    else if (tk[i] == ">=")
      rc.sense = Sense::GreaterEqual;
    else if (tk[i] == "=")
      rc.sense = Sense::Equal;
    else
      throw ModelError("lp parse: bad relation " + tk[i]);
    ++i;
    double rhs;
    signed_number(&rhs);
    rc.rhs = rhs - cst;
    raw.push_back(std::move(rc));
  }

  if (peek("bounds")) {
    ++i;
    while (i < tk.size() && tk[i] != "binaries" && tk[i] != "end") {
      double lo, hi;
      signed_number(&lo);
      expect("<=");
      std::string name = tk[i];
      ++i;
      expect("<=");
      signed_number(&hi);
      p.set_bounds(var_of(name), lo, hi);
    }
  }
  if (peek("binaries")) {
    ++i;
    while (i < tk.size() && tk[i] != "end") {
      int v = var_of(tk[i]);
      double lo = std::max(p.variable(v).lower, 0.0);
      double hi = std::min(p.variable(v).upper, 1.0);
      p.set_bounds(v, lo, hi);
      p.set_kind(v, VarKind::Binary);
      ++i;
    }
  }
  expect("end");

  for (const Term& t : obj_terms) {
    if (t.quad)
      p.add_objective_quad(t.var, t.coef);
    else
      p.add_objective_coeff(t.var, t.coef);
  }
  p.add_objective_constant(obj_const);
  for (RawCon& rc : raw) {
    std::vector<std::pair<int, double>> terms;
    for (const Term& t : rc.terms) {
      if (t.quad) throw ModelError("lp parse: quadratic term in constraint");
      terms.push_back({t.var, t.coef});
    }
    p.add_constraint(std::move(terms), rc.sense, rc.rhs, rc.name);
  }
  return p;
}

MilpProblem load_lp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_lp(ss.str());
}

}  // namespace restore::mip
