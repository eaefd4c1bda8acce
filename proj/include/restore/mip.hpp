#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace restore::mip {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Centralized numeric tolerances.
inline constexpr double kFeasibilityTol = 1e-7;
inline constexpr double kIntegralityTol = 1e-6;
inline constexpr double kDefaultMipGap = 1e-6;

enum class VarKind { Continuous, Binary };
enum class Sense { LessEqual, Equal, GreaterEqual };
enum class ObjSense { Minimize, Maximize };

enum class SolveStatus {
  Optimal,
  Feasible,   // incumbent found, gap not closed (limit hit)
  Infeasible,
  Unbounded,
  TimeLimit,  // limit hit with no incumbent
  NumericFailure,
};

std::string to_string(SolveStatus s);

struct Variable {
  std::string name;
  VarKind kind = VarKind::Continuous;
  double lower = 0.0;
  double upper = kInfinity;
};

struct Constraint {
  std::vector<std::pair<int, double>> terms;  // (variable id, coefficient)
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
  std::string name;
};

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Solver-agnostic mixed-integer linear program. The objective may carry
// diagonal quadratic coefficients on binary variables only; those are exact
// under the substitution x^2 = x and are folded into the linear part when
// solving.
class MilpProblem {
 public:
  int add_variable(const std::string& name, VarKind kind, double lower, double upper);
  int add_continuous(const std::string& name, double lower, double upper) {
    return add_variable(name, VarKind::Continuous, lower, upper);
  }
  int add_binary(const std::string& name) {
    return add_variable(name, VarKind::Binary, 0.0, 1.0);
  }

  void add_constraint(std::vector<std::pair<int, double>> terms, Sense sense, double rhs,
                      std::string name = "");

  void set_objective_sense(ObjSense sense) { obj_sense_ = sense; }
  void set_objective_coeff(int var, double coeff);
  void add_objective_coeff(int var, double coeff);
  // Quadratic diagonal term coeff * x^2; var must be binary.
  void add_objective_quad(int var, double coeff);
  void add_objective_constant(double c) { obj_constant_ += c; }

  void set_bounds(int var, double lower, double upper);
  void fix(int var, double value) { set_bounds(var, value, value); }
  void set_kind(int var, VarKind kind) { vars_.at(var).kind = kind; }

  // Branch-and-bound picks fractional binaries from the highest priority
  // tier first (default 0); the model builders mark first-stage decisions.
  void set_branch_priority(int var, int priority) { priority_.at(var) = priority; }
  int branch_priority(int var) const { return priority_[var]; }

  int variable_count() const { return static_cast<int>(vars_.size()); }
  int constraint_count() const { return static_cast<int>(cons_.size()); }
  const Variable& variable(int i) const { return vars_[i]; }
  const Constraint& constraint(int i) const { return cons_[i]; }
  ObjSense objective_sense() const { return obj_sense_; }
  double objective_coeff(int var) const { return obj_linear_[var]; }
  double objective_quad(int var) const { return obj_quad_[var]; }
  double objective_constant() const { return obj_constant_; }
  int variable_id(const std::string& name) const;  // -1 if absent

  // Linear coefficients with the binary quadratic diagonal folded in.
  std::vector<double> folded_objective() const;
  double evaluate_objective(const std::vector<double>& x) const;

  // Throws ModelError if any structural invariant is broken (references,
  // binary bounds, quadratic terms on non-binaries).
  void check() const;

 private:
  std::vector<Variable> vars_;
  std::vector<int> priority_;
  std::vector<Constraint> cons_;
  std::vector<double> obj_linear_;
  std::vector<double> obj_quad_;
  double obj_constant_ = 0.0;
  ObjSense obj_sense_ = ObjSense::Maximize;
};

struct MilpSolution {
  SolveStatus status = SolveStatus::NumericFailure;
  double objective = 0.0;
  std::vector<double> values;
  double bound = 0.0;  // best dual bound (== objective when optimal)
  double wall_seconds = 0.0;
  std::int64_t nodes = 0;
  std::vector<double> incumbent_history;  // objective of each accepted incumbent

  bool usable() const {
    return status == SolveStatus::Optimal || status == SolveStatus::Feasible;
  }
};

struct SolveLimits {
  double time_limit_s = kInfinity;
  double mip_gap = kDefaultMipGap;
};

// Reference LP engine: solves the problem with integrality relaxed.
MilpSolution solve_lp(const MilpProblem& p);

// Reference branch-and-bound over binary variables: best-bound node order,
// most-fractional branching, periodic depth-first dives.
MilpSolution solve_mip(const MilpProblem& p, const SolveLimits& limits = {});

// Pluggable external solver adapter; the reference solver stays the default
// when nothing is registered.
class SolverBackend {
 public:
  virtual ~SolverBackend() = default;
  virtual std::string name() const = 0;
  virtual MilpSolution solve(const MilpProblem& p, const SolveLimits& limits) = 0;
};

// Routes subsequent solve_mip calls through the adapter. Throws ModelError on
// duplicate registration names.
void register_backend(std::shared_ptr<SolverBackend> backend);
void clear_backends();

// LP-format text dump/load for debugging and external cross-checks; the
// grammar is documented in docs/lp_format.md.
std::string dump_lp(const MilpProblem& p);
void dump_lp_file(const MilpProblem& p, const std::string& path);
MilpProblem load_lp(const std::string& text);
MilpProblem load_lp_file(const std::string& path);

}  // namespace restore::mip
