#pragma once

// Internal LP engine: bounded-variable primal simplex with an explicit dense
// basis inverse. Phase 1 minimizes the sum of primal infeasibilities of the
// current basis (no artificial variables), which lets branch-and-bound warm
// start from a parent basis after a single bound change. Not part of the
// public interface.

#include <memory>
#include <vector>

#include "restore/mip.hpp"

namespace restore::mip::detail {

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericFailure };

struct LpResult {
  LpStatus status = LpStatus::NumericFailure;
  double objective = 0.0;  // c.x in minimize form, excludes constants
  std::vector<double> x;   // structural variable values
  long iterations = 0;
};

class SimplexEngine {
 public:
  // Minimize c.x over the constraints of `p`; bounds are supplied separately
  // so branch-and-bound can override them without copying the problem.
  SimplexEngine(const MilpProblem& p, const std::vector<double>& c);

  // Cold solve from the slack basis.
  LpResult solve(const std::vector<double>& lb, const std::vector<double>& ub);

  // Re-solve after bound changes, reusing the current basis and inverse.
  LpResult resolve(const std::vector<double>& lb, const std::vector<double>& ub);

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// One-shot convenience wrapper.
LpResult simplex_minimize(const MilpProblem& p, const std::vector<double>& c,
                          const std::vector<double>& lb, const std::vector<double>& ub);

}  // namespace restore::mip::detail

namespace restore::mip::detail {
// Lightweight instrumentation for performance work; zeroed by callers.
struct SimplexStats {
  static long long solves, iterations, refactors;
};
}  // namespace restore::mip::detail
