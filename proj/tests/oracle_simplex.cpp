#include "oracle_simplex.hpp"

#include <cmath>
#include <limits>

namespace restore::test {

namespace {
constexpr double kEps = 1e-9;
}

OracleResult oracle_solve(const OracleLp& lp) {
  const int n0 = static_cast<int>(lp.c.size());
  const int m0 = static_cast<int>(lp.b.size());

  // Shift variables to x' = x - lb >= 0 and add a row per finite upper bound.
  std::vector<std::vector<double>> rows;
  std::vector<int> senses;
  std::vector<double> rhs;
  for (int i = 0; i < m0; ++i) {
    double shift = 0.0;
    for (int j = 0; j < n0; ++j) shift += lp.a[i][j] * lp.lb[j];
    rows.push_back(lp.a[i]);
    senses.push_back(lp.sense[i]);
    rhs.push_back(lp.b[i] - shift);
  }
  for (int j = 0; j < n0; ++j) {
    std::vector<double> r(n0, 0.0);
    r[j] = 1.0;
    rows.push_back(r);
    senses.push_back(-1);
    rhs.push_back(lp.ub[j] - lp.lb[j]);
  }
  const int m = static_cast<int>(rows.size());

  // Normalize to b >= 0.
  for (int i = 0; i < m; ++i) {
    if (rhs[i] < 0.0) {
      for (double& v : rows[i]) v = -v;
      rhs[i] = -rhs[i];
      senses[i] = -senses[i];
    }
  }

  // Columns: structural, slacks/surplus, artificials.
  int ncols = n0;
  std::vector<int> slack_col(m, -1), art_col(m, -1);
  for (int i = 0; i < m; ++i) {
    if (senses[i] == -1) slack_col[i] = ncols++;
    if (senses[i] == +1) slack_col[i] = ncols++;  // surplus
  }
  for (int i = 0; i < m; ++i) {
    if (senses[i] != -1) art_col[i] = ncols++;  // >= and = rows get artificials
  }

  // Tableau: m rows x (ncols + 1), plus cost row handled separately.
  std::vector<std::vector<double>> T(m, std::vector<double>(ncols + 1, 0.0));
  std::vector<int> basis(m, -1);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n0; ++j) T[i][j] = rows[i][j];
    if (senses[i] == -1) {
      T[i][slack_col[i]] = 1.0;
      basis[i] = slack_col[i];
    } else if (senses[i] == +1) {
      T[i][slack_col[i]] = -1.0;
    }
    if (art_col[i] >= 0) {
      T[i][art_col[i]] = 1.0;
      basis[i] = art_col[i];
    }
    T[i][ncols] = rhs[i];
  }

  auto pivot = [&](int pr, int pc) {
    double inv = 1.0 / T[pr][pc];
    for (double& v : T[pr]) v *= inv;
    for (int i = 0; i < m; ++i) {
      if (i == pr) continue;
      double f = T[i][pc];
      if (f == 0.0) continue;
      for (int j = 0; j <= ncols; ++j) T[i][j] -= f * T[pr][j];
    }
    basis[pr] = pc;
  };

  // Bland's rule simplex on the given cost vector; returns false if unbounded.
  auto run = [&](const std::vector<double>& cost) -> bool {
    while (true) {
      // Reduced costs: d_j = c_j - sum_i c_B(i) * T[i][j]
      std::vector<double> cb(m);
      for (int i = 0; i < m; ++i) cb[i] = cost[basis[i]];
      int enter = -1;
      for (int j = 0; j < ncols; ++j) {
        double d = cost[j];
        for (int i = 0; i < m; ++i)
          if (cb[i] != 0.0) d -= cb[i] * T[i][j];
        if (d < -kEps) {
          enter = j;
          break;  // Bland: first improving column
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i) {
        if (T[i][enter] > kEps) {
          double ratio = T[i][ncols] / T[i][enter];
          if (ratio < best - kEps ||
              (ratio < best + kEps && (leave < 0 || basis[i] < basis[leave]))) {
            best = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
  };

  OracleResult out;

  // Phase 1.
  bool has_art = false;
  std::vector<double> cost1(ncols, 0.0);
  for (int i = 0; i < m; ++i) {
    if (art_col[i] >= 0) {
      cost1[art_col[i]] = 1.0;
      has_art = true;
    }
  }
  if (has_art) {
    if (!run(cost1)) {
      out.status = OracleResult::Status::Unbounded;  // cannot happen in phase 1
      return out;
    }
    double infeas = 0.0;
    for (int i = 0; i < m; ++i)
      if (basis[i] >= 0 && cost1[basis[i]] == 1.0) infeas += T[i][ncols];
    if (infeas > 1e-6) {
      out.status = OracleResult::Status::Infeasible;
      return out;
    }
    // Pivot out any artificial still basic at zero when possible.
    for (int i = 0; i < m; ++i) {
      if (cost1[basis[i]] != 1.0) continue;
      for (int j = 0; j < ncols; ++j) {
        if (cost1[j] == 1.0) continue;
        if (std::abs(T[i][j]) > kEps) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  // Phase 2: forbid artificial re-entry by giving them a huge cost.
  std::vector<double> cost2(ncols, 0.0);
  for (int j = 0; j < n0; ++j) cost2[j] = lp.c[j];
  for (int i = 0; i < m; ++i)
    if (art_col[i] >= 0) cost2[art_col[i]] = 1e30;
  if (!run(cost2)) {
    out.status = OracleResult::Status::Unbounded;
    return out;
  }

  std::vector<double> xs(ncols, 0.0);
  for (int i = 0; i < m; ++i) xs[basis[i]] = T[i][ncols];
  out.x.resize(n0);
  out.objective = 0.0;
  for (int j = 0; j < n0; ++j) {
    out.x[j] = xs[j] + lp.lb[j];
    out.objective += lp.c[j] * out.x[j];
  }
  out.status = OracleResult::Status::Optimal;
  return out;
}

}  // namespace restore::test
