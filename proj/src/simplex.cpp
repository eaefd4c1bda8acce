#include "simplex.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <limits>

namespace restore::mip::detail {

long long SimplexStats::solves = 0;
long long SimplexStats::iterations = 0;
long long SimplexStats::refactors = 0;

namespace {

constexpr double kDualTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr double kFeasTol = 1e-8;
constexpr double kEtaDrop = 1e-13;
constexpr int kMaxEtas = 100;
constexpr int kDegenerateLimit = 120;

enum class VarState : unsigned char { Basic, AtLower, AtUpper, FreeZero };

}  // namespace

// Bounded-variable primal simplex over a sparse LU factorization of the basis
// with a product-form eta file between refactorizations. Phase 1 minimizes
// the summed primal infeasibility of the current basis, so a warm basis from
// a sibling branch-and-bound node restarts in a handful of pivots.
struct SimplexEngine::Impl {
  int n = 0;      // structural variables
  int m = 0;      // rows
  int total = 0;  // structural + slacks
  std::vector<std::vector<std::pair<int, double>>> cols;
  std::vector<double> rhs;
  std::vector<double> cost;
  std::vector<double> lb, ub;
  std::vector<double> slack_lb, slack_ub;

  std::vector<VarState> state;
  std::vector<int> basis;
  std::vector<double> xb;
  bool has_basis = false;

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool lu_ok = false;
  struct Eta {
    int row;
    double pivot;                               // w[row]
    std::vector<std::pair<int, double>> terms;  // nonzeros of w excluding row
  };
  std::vector<Eta> etas;

  long iters = 0;

  // scratch
  std::vector<double> work_y, work_w;
  Eigen::VectorXd evec;

  double nonbasic_value(int j) const {
    switch (state[j]) {
      case VarState::AtLower: return lb[j];
      case VarState::AtUpper: return ub[j];
      case VarState::FreeZero: return 0.0;
      case VarState::Basic: break;
    }
    return 0.0;
  }

  double infeas_of(int row) const {
    int j = basis[row];
    if (xb[row] < lb[j] - kFeasTol) return lb[j] - xb[row];
    if (xb[row] > ub[j] + kFeasTol) return xb[row] - ub[j];
    return 0.0;
  }
  double phase1_cost(int row) const {
    int j = basis[row];
    if (xb[row] < lb[j] - kFeasTol) return -1.0;
    if (xb[row] > ub[j] + kFeasTol) return 1.0;
    return 0.0;
  }

  void apply_bounds(const std::vector<double>& lb_in, const std::vector<double>& ub_in) {
    for (int j = 0; j < n; ++j) {
      lb[j] = lb_in[j];
      ub[j] = ub_in[j];
    }
    for (int i = 0; i < m; ++i) {
      lb[n + i] = slack_lb[i];
      ub[n + i] = slack_ub[i];
    }
  }

  // v := B^{-1} v with the factorization plus the eta file.
  void ftran(std::vector<double>& v) {
    Eigen::Map<Eigen::VectorXd> mv(v.data(), m);
    evec = lu.solve(mv);
    for (int i = 0; i < m; ++i) v[i] = evec[i];
    for (const Eta& e : etas) {
      double vr = v[e.row] / e.pivot;
      if (vr != 0.0) {
        for (auto [i, wi] : e.terms) v[i] -= wi * vr;
      }
      v[e.row] = vr;
    }
  }

  // v := B^{-T} v (for pricing).
  void btran(std::vector<double>& v) {
    for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
      double dot = 0.0;
      for (auto [i, wi] : it->terms) dot += v[i] * wi;
      v[it->row] = (v[it->row] - dot) / it->pivot;
    }
    Eigen::Map<Eigen::VectorXd> mv(v.data(), m);
    evec = lu.transpose().solve(mv);
    for (int i = 0; i < m; ++i) v[i] = evec[i];
  }

  void cold_basis() {
    state.assign(total, VarState::AtLower);
    for (int j = 0; j < total; ++j) {
      if (std::isfinite(lb[j]))
        state[j] = VarState::AtLower;
      else if (std::isfinite(ub[j]))
        state[j] = VarState::AtUpper;
      else
        state[j] = VarState::FreeZero;
    }
    basis.resize(m);
    for (int i = 0; i < m; ++i) {
      basis[i] = n + i;
      state[n + i] = VarState::Basic;
    }
    if (m > 0) refactorize();
    has_basis = true;
  }

  void renormalize_states() {
    for (int j = 0; j < total; ++j) {
      if (state[j] == VarState::Basic) continue;
      if (state[j] == VarState::AtLower && !std::isfinite(lb[j]))
        state[j] = std::isfinite(ub[j]) ? VarState::AtUpper : VarState::FreeZero;
      else if (state[j] == VarState::AtUpper && !std::isfinite(ub[j]))
        state[j] = std::isfinite(lb[j]) ? VarState::AtLower : VarState::FreeZero;
      else if (state[j] == VarState::FreeZero && std::isfinite(lb[j]) &&
               (0.0 < lb[j] || 0.0 > ub[j]))
        state[j] = VarState::AtLower;
    }
  }

  void recompute_xb() {
    std::vector<double> r = rhs;
    for (int j = 0; j < total; ++j) {
      if (state[j] == VarState::Basic) continue;
      double v = nonbasic_value(j);
      if (v == 0.0) continue;
      for (auto [i, a] : cols[j]) r[i] -= a * v;
    }
    ftran(r);
    xb = std::move(r);
  }

  bool refactorize() {
    ++SimplexStats::refactors;
    Eigen::SparseMatrix<double> B(m, m);
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(8 * m);
    for (int i = 0; i < m; ++i)
      for (auto [r, a] : cols[basis[i]]) trips.emplace_back(r, i, a);
    B.setFromTriplets(trips.begin(), trips.end());
    B.makeCompressed();
    lu.compute(B);
    lu_ok = lu.info() == Eigen::Success;
    if (!lu_ok) return false;
    etas.clear();
    recompute_xb();
    return true;
  }

  double total_infeasibility() const {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += infeas_of(i);
    return s;
  }

  double residual_norm() const {
    std::vector<double> act(rhs);
    for (int j = 0; j < total; ++j) {
      double v = state[j] == VarState::Basic ? 0.0 : nonbasic_value(j);
      if (v == 0.0) continue;
      for (auto [i, a] : cols[j]) act[i] -= a * v;
    }
    for (int i = 0; i < m; ++i) {
      double v = xb[i];
      if (v == 0.0) continue;
      for (auto [r, a] : cols[basis[i]]) act[r] -= a * v;
    }
    double worst = 0.0;
    for (int i = 0; i < m; ++i) worst = std::max(worst, std::abs(act[i]));
    return worst;
  }

  enum class Outcome { Converged, Unbounded, NumericFailure };

  Outcome iterate(int phase) {
    const long max_iters = 20000L + 200L * (m + n);
    long local_iters = 0;
    bool bland = false;
    int degenerate_run = 0;

    work_y.assign(m, 0.0);
    work_w.assign(m, 0.0);

    while (true) {
      if (++local_iters > max_iters) return Outcome::NumericFailure;
      ++iters;
      ++SimplexStats::iterations;
      if (static_cast<int>(etas.size()) >= kMaxEtas) {
        if (!refactorize()) return Outcome::NumericFailure;
      }
      if (phase == 1 && total_infeasibility() <= kFeasTol) return Outcome::Converged;

      // Pricing: y = cB . B^{-1}.
      std::fill(work_y.begin(), work_y.end(), 0.0);
      bool any_cb = false;
      for (int i = 0; i < m; ++i) {
        double cb = phase == 1 ? phase1_cost(i) : cost[basis[i]];
        if (cb != 0.0) {
          any_cb = true;
          work_y[i] = cb;
        }
      }
      if (phase == 1 && !any_cb) return Outcome::Converged;
      if (any_cb) btran(work_y);
      std::vector<double>& y = work_y;

      int entering = -1, dir = 0;
      double best_score = kDualTol;
      for (int j = 0; j < total; ++j) {
        if (state[j] == VarState::Basic) continue;
        if (lb[j] == ub[j]) continue;
        double d = phase == 1 ? 0.0 : cost[j];
        if (any_cb)
          for (auto [i, a] : cols[j]) d -= y[i] * a;
        int cand = 0;
        if (state[j] == VarState::AtLower && d < -kDualTol) cand = +1;
        else if (state[j] == VarState::AtUpper && d > kDualTol) cand = -1;
        else if (state[j] == VarState::FreeZero && std::abs(d) > kDualTol)
          cand = d < 0.0 ? +1 : -1;
        if (cand == 0) continue;
        if (bland) {
          entering = j;
          dir = cand;
          break;
        }
        if (std::abs(d) > best_score) {
          best_score = std::abs(d);
          entering = j;
          dir = cand;
        }
      }
      if (entering < 0) return Outcome::Converged;

      // FTRAN: w = B^{-1} A[entering].
      std::fill(work_w.begin(), work_w.end(), 0.0);
      for (auto [row, a] : cols[entering]) work_w[row] = a;
      ftran(work_w);
      std::vector<double>& w = work_w;

      double theta = std::numeric_limits<double>::infinity();
      int leave_row = -1;
      double leave_piv = 0.0;
      int leave_target = 0;

      double v_enter = nonbasic_value(entering);
      double theta_self = std::numeric_limits<double>::infinity();
      if (dir > 0 && std::isfinite(ub[entering])) theta_self = ub[entering] - v_enter;
      if (dir < 0 && std::isfinite(lb[entering])) theta_self = v_enter - lb[entering];

      auto consider = [&](int i, double t, int target) {
        if (t < -1e-12) t = 0.0;
        bool better;
        if (t < theta - 1e-12) {
          better = true;
        } else if (t <= theta + 1e-12 && leave_row >= 0) {
          better = bland ? basis[i] < basis[leave_row]
                         : std::abs(w[i]) > std::abs(leave_piv);
        } else {
          better = false;
        }
        if (better) {
          theta = std::min(std::max(t, 0.0), theta);
          leave_row = i;
          leave_piv = w[i];
          leave_target = target;
        }
      };

      for (int i = 0; i < m; ++i) {
        double g = dir * w[i];
        if (std::abs(g) <= kPivotTol) continue;
        int bj = basis[i];
        double v = xb[i];
        bool below = v < lb[bj] - kFeasTol;
        bool above = v > ub[bj] + kFeasTol;
        if (g > 0.0) {
          if (above) {
            consider(i, (v - ub[bj]) / g, +1);
          } else if (!below && std::isfinite(lb[bj])) {
            consider(i, (v - lb[bj]) / g, -1);
          }
        } else {
          double ga = -g;
          if (below) {
            consider(i, (lb[bj] - v) / ga, -1);
          } else if (!above && std::isfinite(ub[bj])) {
            consider(i, (ub[bj] - v) / ga, +1);
          }
        }
      }

      if (!std::isfinite(theta) && !std::isfinite(theta_self)) {
        return phase == 1 ? Outcome::NumericFailure : Outcome::Unbounded;
      }

      if (theta_self <= theta) {
        if (theta_self != 0.0)
          for (int i = 0; i < m; ++i) xb[i] -= dir * theta_self * w[i];
        state[entering] = dir > 0 ? VarState::AtUpper : VarState::AtLower;
        degenerate_run = 0;
        bland = false;
        continue;
      }

      int leaving = basis[leave_row];
      if (theta != 0.0)
        for (int i = 0; i < m; ++i) xb[i] -= dir * theta * w[i];
      state[leaving] = leave_target < 0 ? VarState::AtLower : VarState::AtUpper;
      basis[leave_row] = entering;
      state[entering] = VarState::Basic;
      xb[leave_row] = v_enter + dir * theta;

      // Record the pivot in the eta file.
      Eta e;
      e.row = leave_row;
      e.pivot = leave_piv;
      for (int i = 0; i < m; ++i)
        if (i != leave_row && std::abs(w[i]) > kEtaDrop) e.terms.push_back({i, w[i]});
      etas.push_back(std::move(e));

      if (theta < 1e-11) {
        if (++degenerate_run > kDegenerateLimit) bland = true;
      } else {
        degenerate_run = 0;
        bland = false;
      }
    }
  }

  LpResult optimize() {
    LpResult res;
    if (m == 0) {
      res.x.assign(n, 0.0);
      double obj = 0.0;
      for (int j = 0; j < n; ++j) {
        double v;
        if (cost[j] > 0.0)
          v = lb[j];
        else if (cost[j] < 0.0)
          v = ub[j];
        else
          v = std::isfinite(lb[j]) ? lb[j] : (std::isfinite(ub[j]) ? ub[j] : 0.0);
        if (!std::isfinite(v)) {
          res.status = LpStatus::Unbounded;
          return res;
        }
        res.x[j] = v;
        obj += cost[j] * v;
      }
      res.status = LpStatus::Optimal;
      res.objective = obj;
      return res;
    }
    if (!lu_ok) {
      res.status = LpStatus::NumericFailure;
      return res;
    }

    if (total_infeasibility() > kFeasTol) {
      Outcome o = iterate(1);
      if (o == Outcome::NumericFailure) {
        if (!refactorize() || (total_infeasibility() > kFeasTol &&
                               iterate(1) == Outcome::NumericFailure)) {
          res.status = LpStatus::NumericFailure;
          return res;
        }
      }
      if (total_infeasibility() > 1e-6) {
        res.status = LpStatus::Infeasible;
        res.iterations = iters;
        return res;
      }
    }

    Outcome o = iterate(2);
    res.iterations = iters;
    if (o == Outcome::Unbounded) {
      res.status = LpStatus::Unbounded;
      return res;
    }
    if (o == Outcome::NumericFailure) {
      res.status = LpStatus::NumericFailure;
      return res;
    }
    // Cheap drift check; a genuine violation pays for a refactorization and
    // one repair pass.
    if (residual_norm() > 1e-6 || total_infeasibility() > 1e-6) {
      if (!refactorize()) {
        res.status = LpStatus::NumericFailure;
        return res;
      }
      if (total_infeasibility() > 1e-6) {
        if (iterate(1) == Outcome::NumericFailure || total_infeasibility() > 1e-6 ||
            iterate(2) != Outcome::Converged) {
          res.status = LpStatus::NumericFailure;
          return res;
        }
      }
    }

    res.status = LpStatus::Optimal;
    res.x.assign(n, 0.0);
    for (int j = 0; j < n; ++j) res.x[j] = nonbasic_value(j);
    for (int i = 0; i < m; ++i)
      if (basis[i] < n) res.x[basis[i]] = xb[i];
    res.objective = 0.0;
    for (int j = 0; j < n; ++j) res.objective += cost[j] * res.x[j];
    return res;
  }
};

SimplexEngine::SimplexEngine(const MilpProblem& p, const std::vector<double>& c)
    : impl_(std::make_shared<Impl>()) {
  Impl& im = *impl_;
  im.n = p.variable_count();
  im.m = p.constraint_count();
  im.total = im.n + im.m;
  im.cols.resize(im.total);
  im.cost.assign(im.total, 0.0);
  for (int j = 0; j < im.n; ++j) im.cost[j] = c[j];
  im.rhs.resize(im.m);
  im.slack_lb.resize(im.m);
  im.slack_ub.resize(im.m);
  for (int i = 0; i < im.m; ++i) {
    const Constraint& con = p.constraint(i);
    for (auto [v, a] : con.terms)
      if (a != 0.0) im.cols[v].push_back({i, a});
    im.rhs[i] = con.rhs;
    im.cols[im.n + i].push_back({i, 1.0});
    switch (con.sense) {
      case Sense::LessEqual:
        im.slack_lb[i] = 0.0;
        im.slack_ub[i] = kInfinity;
        break;
      case Sense::GreaterEqual:
        im.slack_lb[i] = -kInfinity;
        im.slack_ub[i] = 0.0;
        break;
      case Sense::Equal:
        im.slack_lb[i] = 0.0;
        im.slack_ub[i] = 0.0;
        break;
    }
  }
  for (auto& col : im.cols) {
    std::sort(col.begin(), col.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    size_t wpos = 0;
    for (size_t r = 0; r < col.size(); ++r) {
      if (wpos > 0 && col[wpos - 1].first == col[r].first)
        col[wpos - 1].second += col[r].second;
      else
        col[wpos++] = col[r];
    }
    col.resize(wpos);
  }
  im.lb.assign(im.total, 0.0);
  im.ub.assign(im.total, 0.0);
}

LpResult SimplexEngine::solve(const std::vector<double>& lb, const std::vector<double>& ub) {
  ++SimplexStats::solves;
  Impl& im = *impl_;
  for (int j = 0; j < im.n; ++j) {
    if (lb[j] > ub[j] + 1e-12) {
      LpResult r;
      r.status = LpStatus::Infeasible;
      return r;
    }
  }
  im.apply_bounds(lb, ub);
  im.iters = 0;
  im.cold_basis();
  return im.optimize();
}

LpResult SimplexEngine::resolve(const std::vector<double>& lb, const std::vector<double>& ub) {
  ++SimplexStats::solves;
  Impl& im = *impl_;
  if (!im.has_basis) return solve(lb, ub);
  for (int j = 0; j < im.n; ++j) {
    if (lb[j] > ub[j] + 1e-12) {
      LpResult r;
      r.status = LpStatus::Infeasible;
      return r;
    }
  }
  im.apply_bounds(lb, ub);
  if (im.m == 0) return im.optimize();
  im.renormalize_states();
  im.iters = 0;
  im.recompute_xb();
  LpResult r = im.optimize();
  if (r.status == LpStatus::NumericFailure) {
    im.cold_basis();
    r = im.optimize();
  }
  return r;
}

LpResult simplex_minimize(const MilpProblem& p, const std::vector<double>& c,
                          const std::vector<double>& lb, const std::vector<double>& ub) {
  SimplexEngine engine(p, c);
  return engine.solve(lb, ub);
}

}  // namespace restore::mip::detail
