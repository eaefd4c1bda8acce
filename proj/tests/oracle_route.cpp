#include "oracle_route.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace restore::test {

using grid::Network;
using mip::MilpProblem;
using mip::Sense;
using scen::ScenarioSet;

double oracle_second_stage(const Network& net, const ScenarioSet& set, int scenario,
                           const std::map<std::string, int>& completion) {
  const int T = net.horizon;
  const double sbase = grid::kPowerBaseKw;
  MilpProblem P;
  P.set_objective_sense(mip::ObjSense::Maximize);

  // Line status per step: -1 marks a free switch variable.
  auto status_at = [&](size_t k, int t) -> double {  // t is 1-based
    const grid::Line& ln = net.lines[k];
    auto it = completion.find(ln.id);
    if (it != completion.end())
      return (it->second > 0 && t >= it->second) ? 1.0 : 0.0;
    return 1.0;  // healthy non-switch line
  };

  std::vector<std::vector<int>> usw(net.lines.size(), std::vector<int>(T, -1));
  for (size_t k = 0; k < net.lines.size(); ++k) {
    const grid::Line& ln = net.lines[k];
    if (ln.has_switch && !completion.count(ln.id)) {
      for (int t = 1; t <= T; ++t)
        usw[k][t - 1] = P.add_binary("u_" + ln.id + "_" + std::to_string(t));
    }
  }

  std::vector<std::vector<int>> y(net.loads.size(), std::vector<int>(T));
  for (size_t i = 0; i < net.loads.size(); ++i)
    for (int t = 1; t <= T; ++t) {
      y[i][t - 1] = P.add_binary("y_" + std::to_string(i) + "_" + std::to_string(t));
      if (net.loads[i].initially_energized) P.set_bounds(y[i][t - 1], 1.0, 1.0);
    }

  std::vector<std::vector<int>> v(net.buses.size(), std::vector<int>(T));
  for (size_t i = 0; i < net.buses.size(); ++i)
    for (int t = 0; t < T; ++t)
      v[i][t] = P.add_continuous("v", net.buses[i].is_substation ? net.v_ref : 1.0 - net.v_epsilon,
                                 net.buses[i].is_substation ? net.v_ref : 1.0 + net.v_epsilon);

  std::vector<std::vector<int>> pb(net.lines.size(), std::vector<int>(T)),
      qb(net.lines.size(), std::vector<int>(T));
  for (size_t k = 0; k < net.lines.size(); ++k)
    for (int t = 0; t < T; ++t) {
      pb[k][t] = P.add_continuous("pb", -net.lines[k].p_max, net.lines[k].p_max);
      qb[k][t] = P.add_continuous("qb", -net.lines[k].q_max, net.lines[k].q_max);
    }

  std::vector<std::vector<int>> pg(net.dgs.size(), std::vector<int>(T)),
      qg(net.dgs.size(), std::vector<int>(T));
  for (size_t g = 0; g < net.dgs.size(); ++g)
    for (int t = 0; t < T; ++t) {
      pg[g][t] = P.add_continuous("pg", 0.0, net.dgs[g].p_max_kw / sbase);
      qg[g][t] = P.add_continuous("qg", 0.0, net.dgs[g].q_max_kvar / sbase);
    }

  double cap = 0.0;
  for (size_t i = 0; i < net.loads.size(); ++i)
    for (int t = 1; t <= T; ++t)
      cap += scen::realized_p_kw(net.loads[i], set, static_cast<int>(i), t, scenario) *
             (1.0 + net.loads[i].undiversified_ratio);
  cap = cap / sbase + 1.0;
  std::vector<int> subs;
  for (size_t i = 0; i < net.buses.size(); ++i)
    if (net.buses[i].is_substation) subs.push_back(static_cast<int>(i));
  std::vector<std::vector<int>> ps(subs.size(), std::vector<int>(T)),
      qs(subs.size(), std::vector<int>(T));
  for (size_t g = 0; g < subs.size(); ++g)
    for (int t = 0; t < T; ++t) {
      ps[g][t] = P.add_continuous("ps", 0.0, cap);
      qs[g][t] = P.add_continuous("qs", 0.0, cap);
    }

  // Balance with the load profile substituted directly (the oracle keeps no
  // separate supplied-load variable; the pickup surge rides on y).
  for (size_t i = 0; i < net.buses.size(); ++i) {
    const std::string& bid = net.buses[i].id;
    for (int t = 1; t <= T; ++t) {
      std::vector<std::pair<int, double>> pt, qt;
      for (size_t k = 0; k < net.lines.size(); ++k) {
        if (net.lines[k].to_bus == bid) {
          pt.push_back({pb[k][t - 1], 1.0});
          qt.push_back({qb[k][t - 1], 1.0});
        } else if (net.lines[k].from_bus == bid) {
          pt.push_back({pb[k][t - 1], -1.0});
          qt.push_back({qb[k][t - 1], -1.0});
        }
      }
      for (size_t g = 0; g < net.dgs.size(); ++g)
        if (net.dgs[g].bus == bid) {
          pt.push_back({pg[g][t - 1], 1.0});
          qt.push_back({qg[g][t - 1], 1.0});
        }
      for (size_t g = 0; g < subs.size(); ++g)
        if (net.buses[subs[g]].id == bid) {
          pt.push_back({ps[g][t - 1], 1.0});
          qt.push_back({qs[g][t - 1], 1.0});
        }
      double rhs_p = 0.0, rhs_q = 0.0;
      for (size_t l = 0; l < net.loads.size(); ++l) {
        if (net.loads[l].bus != bid) continue;
        const grid::Load& ld = net.loads[l];
        double pd = scen::realized_p_kw(ld, set, static_cast<int>(l), t, scenario) / sbase;
        double qd = scen::realized_q_kvar(ld, set, static_cast<int>(l), t, scenario) / sbase;
        double pu = ld.undiversified_ratio * pd, qu = ld.undiversified_ratio * qd;
        int lag = t - net.clpu_steps;
        double y0 = ld.initially_energized ? 1.0 : 0.0;
        pt.push_back({y[l][t - 1], -(pd + pu)});
        qt.push_back({y[l][t - 1], -(qd + qu)});
        if (lag >= 1) {
          pt.push_back({y[l][lag - 1], pu});
          qt.push_back({y[l][lag - 1], qu});
        } else {
          rhs_p -= pu * y0;
          rhs_q -= qu * y0;
        }
      }
      P.add_constraint(pt, Sense::Equal, rhs_p);
      P.add_constraint(qt, Sense::Equal, rhs_q);
    }
  }

  // Voltage coupling and switch gating.
  for (size_t k = 0; k < net.lines.size(); ++k) {
    const grid::Line& ln = net.lines[k];
    int bi = net.bus_index(ln.from_bus), bj = net.bus_index(ln.to_bus);
    double rv = ln.resistance / net.v_ref, xv = ln.reactance / net.v_ref;
    for (int t = 1; t <= T; ++t) {
      std::vector<std::pair<int, double>> base = {{v[bj][t - 1], 1.0},
                                                  {v[bi][t - 1], -1.0},
                                                  {pb[k][t - 1], rv},
                                                  {qb[k][t - 1], xv}};
      if (usw[k][t - 1] >= 0) {
        const double M = 0.2;
        auto up = base;
        up.push_back({usw[k][t - 1], M});
        P.add_constraint(up, Sense::LessEqual, M);
        auto dn = base;
        dn.push_back({usw[k][t - 1], -M});
        P.add_constraint(dn, Sense::GreaterEqual, -M);
        P.add_constraint({{pb[k][t - 1], 1.0}, {usw[k][t - 1], -ln.p_max}}, Sense::LessEqual, 0.0);
        P.add_constraint({{pb[k][t - 1], 1.0}, {usw[k][t - 1], ln.p_max}}, Sense::GreaterEqual, 0.0);
        P.add_constraint({{qb[k][t - 1], 1.0}, {usw[k][t - 1], -ln.q_max}}, Sense::LessEqual, 0.0);
        P.add_constraint({{qb[k][t - 1], 1.0}, {usw[k][t - 1], ln.q_max}}, Sense::GreaterEqual, 0.0);
      } else if (status_at(k, t) >= 0.5) {
        P.add_constraint(base, Sense::Equal, 0.0);
      } else {
        P.set_bounds(pb[k][t - 1], 0.0, 0.0);
        P.set_bounds(qb[k][t - 1], 0.0, 0.0);
      }
    }
  }

  // Service latching.
  for (size_t i = 0; i < net.loads.size(); ++i)
    for (int t = 2; t <= T; ++t)
      P.add_constraint({{y[i][t - 1], 1.0}, {y[i][t - 2], -1.0}}, Sense::GreaterEqual, 0.0);

  // Loop radiality with fixed statuses folded into the rhs.
  for (const auto& loop : grid::find_loops(net)) {
    for (int t = 1; t <= T; ++t) {
      std::vector<std::pair<int, double>> terms;
      double fixed = 0.0;
      for (const auto& id : loop) {
        int k = net.line_index(id);
        if (usw[k][t - 1] >= 0)
          terms.push_back({usw[k][t - 1], 1.0});
        else
          fixed += status_at(k, t);
      }
      double rhs = static_cast<double>(loop.size()) - 1.0 - fixed;
      if (terms.empty()) {
        if (rhs < -1e-9) return -mip::kInfinity;  // permanently meshed: infeasible
        continue;
      }
      P.add_constraint(terms, Sense::LessEqual, rhs);
    }
  }

  for (size_t i = 0; i < net.loads.size(); ++i)
    for (int t = 1; t <= T; ++t)
      P.add_objective_coeff(y[i][t - 1],
                            net.loads[i].weight *
                                scen::realized_p_kw(net.loads[i], set, static_cast<int>(i), t,
                                                    scenario));

  auto sol = mip::solve_mip(P);
  if (sol.status != mip::SolveStatus::Optimal)
    return -mip::kInfinity;
  return sol.objective;
}

namespace {

// Splits `perm` into `crews` ordered segments at every composition and calls
// the visitor with the segments.
void for_each_split(const std::vector<std::string>& perm, int crews,
                    const std::function<void(const std::vector<std::vector<std::string>>&)>& fn) {
  int d = static_cast<int>(perm.size());
  std::vector<int> cuts(crews - 1, 0);
  std::function<void(int, int)> rec = [&](int idx, int from) {
    if (idx == crews - 1) {
      std::vector<std::vector<std::string>> segs(crews);
      int pos = 0;
      for (int c = 0; c < crews - 1; ++c) {
        for (; pos < cuts[c]; ++pos) segs[c].push_back(perm[pos]);
      }
      for (; pos < d; ++pos) segs[crews - 1].push_back(perm[pos]);
      fn(segs);
      return;
    }
    for (int cut = from; cut <= d; ++cut) {
      cuts[idx] = cut;
      rec(idx + 1, cut);
    }
  };
  if (crews == 1) {
    fn({perm});
    return;
  }
  rec(0, 0);
}

}  // namespace

RouteOracleResult oracle_route_ef(const Network& net, const model::CrewFleet& fleet,
                                  const ScenarioSet& set, double completion_eps) {
  RouteOracleResult best;
  std::vector<std::string> damages;
  for (const auto& ln : net.lines)
    if (ln.damaged) damages.push_back(ln.id);
  std::sort(damages.begin(), damages.end());

  const int T = net.horizon;
  std::map<std::pair<int, std::vector<int>>, double> scen_cache;  // (scenario, completions)

  auto evaluate = [&](const std::vector<std::vector<std::string>>& segs) {
    double total = 0.0;
    for (int s = 0; s < set.count(); ++s) {
      // Simulate each crew chain.
      std::map<std::string, int> completion;
      for (const auto& ln : net.lines)
        if (ln.damaged) completion[ln.id] = 0;
      bool ok = true;
      for (int c = 0; c < fleet.count && ok; ++c) {
        double clock = 0.0;
        std::string pos = fleet.starts[c];
        for (const auto& m : segs[c]) {
          clock += net.travel_between(pos, m);
          double rep = 0.0;
          for (int d = 0; d < set.damage_count(); ++d)
            if (set.damaged_lines[d] == m) rep = set.repair_hours(d, s);
          clock += rep;
          int step = static_cast<int>(std::ceil(clock - 1e-9));
          if (step < 1) step = 1;
          // The completion step must fall inside [A, A + 1 - eps].
          if (step > clock + 1.0 - completion_eps + 1e-9 || step > T) {
            ok = false;
            break;
          }
          completion[m] = step;
          pos = m;
        }
      }
      if (!ok) return;  // assignment infeasible in some scenario

      std::vector<int> steps;
      for (const auto& id : damages) steps.push_back(completion[id]);
      auto key = std::make_pair(s, steps);
      auto it = scen_cache.find(key);
      double obj;
      if (it != scen_cache.end()) {
        obj = it->second;
      } else {
        obj = oracle_second_stage(net, set, s, completion);
        scen_cache[key] = obj;
      }
      if (obj == -mip::kInfinity) return;
      total += set.probability[s] * obj;
    }
    if (!best.feasible || total > best.objective + 1e-12) {
      best.feasible = true;
      best.objective = total;
      best.best_routes = segs;
    }
  };

  // All permutations of the damage list, split across crews.
  std::vector<std::string> perm = damages;
  std::sort(perm.begin(), perm.end());
  do {
    for_each_split(perm, fleet.count, evaluate);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace restore::test
