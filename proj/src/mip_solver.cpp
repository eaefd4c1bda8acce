#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <queue>

#include "restore/mip.hpp"
#include "simplex.hpp"

namespace restore::mip {

std::shared_ptr<SolverBackend> active_backend();  // defined in mip_problem.cpp

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Internal minimize form: costs negated for maximize problems, results
// flipped back at the boundary.
struct MinForm {
  std::vector<double> cost;
  double sign;  // +1 minimize, -1 maximize
  explicit MinForm(const MilpProblem& p) {
    cost = p.folded_objective();
    sign = p.objective_sense() == ObjSense::Minimize ? 1.0 : -1.0;
    if (sign < 0.0)
      for (double& c : cost) c = -c;
  }
  double user_objective(const MilpProblem& p, double min_obj) const {
    return sign * min_obj + p.objective_constant();
  }
};

struct BnbNode {
  long id = 0;
  int parent = -1;
  int branch_var = -1;
  double branch_val = 0.0;
  int depth = 0;
};

class BranchAndBound {
 public:
  BranchAndBound(const MilpProblem& p, const SolveLimits& limits)
      : p_(p), limits_(limits), form_(p), engine_(p, form_.cost), start_(Clock::now()) {
    n_ = p.variable_count();
    root_lb_.resize(n_);
    root_ub_.resize(n_);
    for (int j = 0; j < n_; ++j) {
      root_lb_[j] = p.variable(j).lower;
      root_ub_[j] = p.variable(j).upper;
      if (p.variable(j).kind == VarKind::Binary && root_lb_[j] < root_ub_[j])
        binaries_.push_back(j);
    }
  }

  MilpSolution run() {
    MilpSolution out;
    nodes_.push_back(BnbNode{});
    open_.push({-kInfinity, 0});

    bool timed_out = false;
    while (!open_.empty()) {
      if (elapsed_s(start_) > limits_.time_limit_s) {
        timed_out = true;
        break;
      }
      auto [bound, id] = open_.top();
      open_.pop();
      if (have_incumbent_ && bound >= incumbent_obj_ - gap_slack()) continue;
      process(static_cast<int>(id));
      if (gap_closed()) break;
    }

    out.nodes = global_nodes_;
    out.wall_seconds = elapsed_s(start_);
    out.incumbent_history.reserve(incumbent_history_.size());
    for (double v : incumbent_history_) out.incumbent_history.push_back(form_.user_objective(p_, v));

    double best_open = open_.empty() ? kInfinity : open_.top().first;
    if (have_incumbent_) {
      double dual = std::min(best_open, incumbent_obj_);
      out.objective = form_.user_objective(p_, incumbent_obj_);
      out.bound = form_.user_objective(p_, dual);
      out.values = incumbent_x_;
      bool proved = open_.empty() || gap_closed();
      out.status = proved ? SolveStatus::Optimal : SolveStatus::Feasible;
      return out;
    }
    if (timed_out) {
      out.status = SolveStatus::TimeLimit;
      return out;
    }
    if (root_unbounded_) {
      out.status = SolveStatus::Unbounded;
      return out;
    }
    out.status = saw_numeric_trouble_ ? SolveStatus::NumericFailure : SolveStatus::Infeasible;
    return out;
  }

 private:
  double gap_slack() const {
    return limits_.mip_gap * std::max(1.0, std::abs(incumbent_obj_));
  }

  bool gap_closed() const {
    if (!have_incumbent_) return false;
    double best_open = open_.empty() ? kInfinity : open_.top().first;
    return incumbent_obj_ - best_open <= gap_slack();
  }

  void node_bounds(int id, std::vector<double>* lb, std::vector<double>* ub) const {
    *lb = root_lb_;
    *ub = root_ub_;
    int cur = id;
    while (cur > 0) {
      const BnbNode& nd = nodes_[cur];
      (*lb)[nd.branch_var] = nd.branch_val;
      (*ub)[nd.branch_var] = nd.branch_val;
      cur = nd.parent;
    }
  }

  // Picks the branching variable: highest priority tier first, then most
  // fractional, ties to the lowest index. Returns -1 when integral.
  int pick_branch_var(const detail::LpResult& lp) const {
    int frac_var = -1;
    double frac_score = kIntegralityTol;
    int frac_prio = std::numeric_limits<int>::min();
    for (int j : binaries_) {
      double dist = std::abs(lp.x[j] - std::round(lp.x[j]));
      if (dist <= kIntegralityTol) continue;
      int prio = p_.branch_priority(j);
      if (prio > frac_prio || (prio == frac_prio && dist > frac_score)) {
        frac_prio = prio;
        frac_score = dist;
        frac_var = j;
      }
    }
    return frac_var;
  }

  // Solves one node and branches. Every tenth node starts a depth-first dive
  // that follows the rounded branch to a leaf (flipping to the sibling when a
  // branch dies) hunting for an incumbent; dive steps reuse the engine basis,
  // so they cost only a handful of pivots each.
  void process(int id) {
    std::vector<double> lb, ub;
    node_bounds(id, &lb, &ub);
    bool diving = false;

    ++global_nodes_;
    detail::LpResult lp = engine_.resolve(lb, ub);

    while (true) {
      if (lp.status == detail::LpStatus::Unbounded) {
        if (id == 0) root_unbounded_ = true;
        return;
      }
      if (lp.status == detail::LpStatus::NumericFailure) {
        saw_numeric_trouble_ = true;
        return;
      }
      if (lp.status != detail::LpStatus::Optimal) return;  // infeasible
      if (have_incumbent_ && lp.objective >= incumbent_obj_ - gap_slack()) return;

      int frac_var = pick_branch_var(lp);
      if (frac_var < 0) {
        accept_incumbent(lp);
        return;
      }

      double rounded = std::round(lp.x[frac_var]);
      bool dive_now = diving || (global_nodes_ % 10 == 0);

      if (!dive_now) {
        for (double val : {0.0, 1.0}) {
          BnbNode child;
          child.id = static_cast<long>(nodes_.size());
          child.parent = id;
          child.branch_var = frac_var;
          child.branch_val = val;
          child.depth = nodes_[id].depth + 1;
          nodes_.push_back(child);
          open_.push({lp.objective, child.id});
        }
        return;
      }

      // Dive step: rounded child first, sibling on a dead end. Only the
      // untried sibling of a surviving rounded branch joins the queue.
      double parent_bound = lp.objective;
      int chosen_id = -1;
      for (int attempt = 0; attempt < 2 && chosen_id < 0; ++attempt) {
        double val = attempt == 0 ? rounded : 1.0 - rounded;
        lb[frac_var] = val;
        ub[frac_var] = val;
        ++global_nodes_;
        detail::LpResult probe = engine_.resolve(lb, ub);
        if (probe.status == detail::LpStatus::NumericFailure) saw_numeric_trouble_ = true;
        bool dead = probe.status != detail::LpStatus::Optimal ||
                    (have_incumbent_ && probe.objective >= incumbent_obj_ - gap_slack());
        if (dead) continue;
        BnbNode child;
        child.id = static_cast<long>(nodes_.size());
        child.parent = id;
        child.branch_var = frac_var;
        child.branch_val = val;
        child.depth = nodes_[id].depth + 1;
        nodes_.push_back(child);
        chosen_id = static_cast<int>(child.id);
        if (attempt == 0) {
          BnbNode sib = child;
          sib.id = static_cast<long>(nodes_.size());
          sib.branch_val = 1.0 - rounded;
          nodes_.push_back(sib);
          open_.push({parent_bound, sib.id});
        }
        lp = std::move(probe);
      }
      if (chosen_id < 0) return;  // both children dead

      id = chosen_id;
      lb[frac_var] = nodes_[chosen_id].branch_val;
      ub[frac_var] = nodes_[chosen_id].branch_val;
      diving = true;
      if (elapsed_s(start_) > limits_.time_limit_s) return;
    }
  }

  void accept_incumbent(const detail::LpResult& lp) {
    std::vector<double> x = lp.x;
    for (int j : binaries_) x[j] = std::round(x[j]);
    double obj = 0.0;
    for (int j = 0; j < n_; ++j) obj += form_.cost[j] * x[j];
    if (!have_incumbent_ || obj < incumbent_obj_ - 1e-12) {
      have_incumbent_ = true;
      incumbent_obj_ = obj;
      incumbent_x_ = std::move(x);
      incumbent_history_.push_back(obj);
    }
  }

  const MilpProblem& p_;
  SolveLimits limits_;
  MinForm form_;
  detail::SimplexEngine engine_;
  Clock::time_point start_;
  int n_ = 0;
  std::vector<int> binaries_;
  std::vector<double> root_lb_, root_ub_;

  std::vector<BnbNode> nodes_;
  // Best-bound first: smallest parent LP bound in minimize form; ties break
  // by node id so the search order is reproducible.
  using Entry = std::pair<double, long>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open_;

  bool have_incumbent_ = false;
  double incumbent_obj_ = kInfinity;
  std::vector<double> incumbent_x_;
  std::vector<double> incumbent_history_;
  bool root_unbounded_ = false;
  bool saw_numeric_trouble_ = false;
  long global_nodes_ = 0;
};

}  // namespace

MilpSolution solve_lp(const MilpProblem& p) {
  p.check();
  auto start = Clock::now();
  MinForm form(p);
  std::vector<double> lb(p.variable_count()), ub(p.variable_count());
  for (int j = 0; j < p.variable_count(); ++j) {
    lb[j] = p.variable(j).lower;
    ub[j] = p.variable(j).upper;
  }
  detail::LpResult lp = detail::simplex_minimize(p, form.cost, lb, ub);
  MilpSolution out;
  out.wall_seconds = elapsed_s(start);
  switch (lp.status) {
    case detail::LpStatus::Optimal:
      out.status = SolveStatus::Optimal;
      out.objective = form.user_objective(p, lp.objective);
      out.bound = out.objective;
      out.values = lp.x;
      break;
    case detail::LpStatus::Infeasible:
      out.status = SolveStatus::Infeasible;
      break;
    case detail::LpStatus::Unbounded:
      out.status = SolveStatus::Unbounded;
      break;
    case detail::LpStatus::NumericFailure:
      out.status = SolveStatus::NumericFailure;
      break;
  }
  return out;
}

MilpSolution solve_mip(const MilpProblem& p, const SolveLimits& limits) {
  if (auto backend = active_backend()) return backend->solve(p, limits);
  p.check();
  BranchAndBound bnb(p, limits);
  return bnb.run();
}

}  // namespace restore::mip
