#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "restore/model.hpp"

namespace restore::model {

namespace {

constexpr double kTol = 1e-6;

double value_of(const mip::MilpSolution& sol, int id, double fixed) {
  return id >= 0 ? sol.values[id] : fixed;
}

// Union-find cycle check over the closed-line subgraph.
bool has_energized_cycle(const grid::Network& net, const std::vector<std::vector<double>>& u,
                         int t) {
  std::vector<int> parent(net.buses.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (size_t k = 0; k < net.lines.size(); ++k) {
    if (u[k][t] < 0.5) continue;
    int a = find(net.bus_index(net.lines[k].from_bus));
    int b = find(net.bus_index(net.lines[k].to_bus));
    if (a == b) return true;
    parent[a] = b;
  }
  return false;
}

}  // namespace

Decoded decode(const mip::MilpSolution& solution, const BuiltModel& built) {
  if (!solution.usable())
    throw BuildError("cannot decode a solution with status " + mip::to_string(solution.status));
  const grid::Network& net = *built.net;
  const scen::ScenarioSet& set = *built.set;
  const double sbase = grid::kPowerBaseKw;

  Decoded out;
  for (const auto& a : built.arcs)
    out.plan.arcs.push_back({a.crew, a.from, a.to, solution.values[a.id] >= 0.5 ? 1.0 : 0.0});

  if (!built.arcs.empty()) {
    for (int c = 0; c < built.fleet.count; ++c) {
      std::vector<std::string> route = {built.fleet.starts[c]};
      std::set<std::string> seen = {built.fleet.starts[c]};
      std::string cur = built.fleet.starts[c];
      while (cur != "sink") {
        std::string next;
        int hits = 0;
        for (const auto& a : out.plan.arcs) {
          if (a.crew == c && a.from == cur && a.value >= 0.5) {
            next = a.to;
            ++hits;
          }
        }
        if (hits != 1)
          throw BuildError("crew " + std::to_string(c) + " route broken at " + cur +
                           " (" + std::to_string(hits) + " outgoing arcs)");
        if (next != "sink" && !seen.insert(next).second)
          throw BuildError("cycle detected in crew " + std::to_string(c) + " arcs at " + next);
        if (next == "sink")
          route.push_back(built.fleet.ends[c]);
        else
          route.push_back(next);
        cur = next;
      }
      out.plan.crew_routes.push_back(std::move(route));
    }
  }

  const int T = net.horizon;
  for (size_t b = 0; b < built.blocks.size(); ++b) {
    const auto& blk = built.blocks[b];
    OperationSchedule sched;
    sched.scenario = built.scenarios[b];

    auto fill = [&](const std::vector<std::vector<int>>& ids, double scale) {
      std::vector<std::vector<double>> v(ids.size(), std::vector<double>(T, 0.0));
      for (size_t i = 0; i < ids.size(); ++i)
        for (int t = 0; t < T; ++t) v[i][t] = solution.values[ids[i][t]] * scale;
      return v;
    };
    sched.u.assign(net.lines.size(), std::vector<double>(T, 0.0));
    for (size_t k = 0; k < net.lines.size(); ++k)
      for (int t = 0; t < T; ++t) {
        double raw = value_of(solution, blk.u[k][t], blk.u_fixed[k][t]);
        sched.u[k][t] = raw >= 0.5 ? 1.0 : 0.0;
      }
    sched.y = fill(blk.y, 1.0);
    for (auto& row : sched.y)
      for (double& v : row) v = v >= 0.5 ? 1.0 : 0.0;
    sched.v_pu = fill(blk.v, 1.0);
    sched.pb_pu = fill(blk.pb, 1.0);
    sched.qb_pu = fill(blk.qb, 1.0);
    sched.pg_kw = fill(blk.pg, sbase);
    sched.qg_kvar = fill(blk.qg, sbase);
    sched.sub_p_kw = fill(blk.ps, sbase);
    sched.sub_q_kvar = fill(blk.qs, sbase);
    sched.pl_kw = fill(blk.pl, sbase);
    sched.ql_kvar = fill(blk.ql, sbase);
    if (!blk.f.empty()) {
      sched.f = fill(blk.f, 1.0);
      sched.alpha.assign(blk.alpha.size(), std::vector<double>(built.fleet.count, 0.0));
      for (size_t d = 0; d < blk.alpha.size(); ++d)
        for (int c = 0; c < built.fleet.count; ++c)
          sched.alpha[d][c] = solution.values[blk.alpha[d][c]];
      // f is declared continuous; its optimal values must come out integral.
      for (const auto& row : sched.f)
        for (double v : row)
          if (std::min(v, 1.0 - v) > 1e-5 && std::abs(v) > 1e-5)
            throw BuildError("repair-completion variable decoded to a fractional value");
    }

    auto problems = verify_schedule(net, set, out.plan.crew_routes.empty() ? nullptr : &out.plan,
                                    sched, built.opts);
    // Verification needs to know which damage rows this model tracked.
    if (!problems.empty()) {
      std::ostringstream os;
      os << "decoded schedule for scenario " << sched.scenario << " violates invariants:";
      for (const auto& p : problems) os << "\n  " << p;
      throw BuildError(os.str());
    }
    out.schedules.push_back(std::move(sched));
  }
  return out;
}

std::vector<std::string> verify_schedule(const grid::Network& net,
                                         const scen::ScenarioSet& set,
                                         const RoutePlan* plan,
                                         const OperationSchedule& sched,
                                         const BuildOptions& opts) {
  std::vector<std::string> out;
  auto fail = [&](const std::string& msg) { out.push_back(msg); };
  const int T = net.horizon;
  const int s = sched.scenario;
  const double sbase = grid::kPowerBaseKw;

  // Power balance (9)-(10), in per-unit.
  for (size_t i = 0; i < net.buses.size(); ++i) {
    const std::string& bid = net.buses[i].id;
    for (int t = 0; t < T; ++t) {
      double p = 0.0, q = 0.0;
      for (size_t k = 0; k < net.lines.size(); ++k) {
        if (net.lines[k].to_bus == bid) {
          p += sched.pb_pu[k][t];
          q += sched.qb_pu[k][t];
        } else if (net.lines[k].from_bus == bid) {
          p -= sched.pb_pu[k][t];
          q -= sched.qb_pu[k][t];
        }
      }
      int gi = 0, si = 0;
      for (size_t g = 0; g < net.dgs.size(); ++g, ++gi)
        if (net.dgs[g].bus == bid) {
          p += sched.pg_kw[g][t] / sbase;
          q += sched.qg_kvar[g][t] / sbase;
        }
      int sub = 0;
      for (size_t bb = 0; bb < net.buses.size(); ++bb) {
        if (!net.buses[bb].is_substation) continue;
        if (bb == i) {
          p += sched.sub_p_kw[sub][t] / sbase;
          q += sched.sub_q_kvar[sub][t] / sbase;
        }
        ++sub;
      }
      (void)si;
      for (size_t l = 0; l < net.loads.size(); ++l)
        if (net.loads[l].bus == bid) {
          p -= sched.pl_kw[l][t] / sbase;
          q -= sched.ql_kvar[l][t] / sbase;
        }
      if (std::abs(p) > kTol || std::abs(q) > kTol)
        fail("power balance violated at bus " + bid + " t=" + std::to_string(t + 1) +
             " residual p=" + std::to_string(p) + " q=" + std::to_string(q));
    }
  }

  // Voltage coupling (11)-(12) on closed lines, flow gating (16)-(17), band (13).
  for (size_t k = 0; k < net.lines.size(); ++k) {
    const grid::Line& ln = net.lines[k];
    int bi = net.bus_index(ln.from_bus), bj = net.bus_index(ln.to_bus);
    for (int t = 0; t < T; ++t) {
      double u = sched.u[k][t];
      double pb = sched.pb_pu[k][t], qb = sched.qb_pu[k][t];
      if (u >= 0.5) {
        double drop = sched.v_pu[bj][t] - sched.v_pu[bi][t] +
                      (ln.resistance * pb + ln.reactance * qb) / net.v_ref;
        if (std::abs(drop) > kTol)
          fail("voltage coupling violated on closed line " + ln.id + " t=" +
               std::to_string(t + 1) + " residual=" + std::to_string(drop));
      }
      if (std::abs(pb) > ln.p_max * u + kTol || std::abs(qb) > ln.q_max * u + kTol)
        fail("flow limit violated on line " + ln.id + " t=" + std::to_string(t + 1));
    }
  }
  for (size_t i = 0; i < net.buses.size(); ++i) {
    for (int t = 0; t < T; ++t) {
      double v = sched.v_pu[i][t];
      if (v < 1.0 - net.v_epsilon - kTol || v > 1.0 + net.v_epsilon + kTol)
        fail("voltage band violated at bus " + net.buses[i].id + " t=" + std::to_string(t + 1));
    }
  }

  // DG limits (14)-(15).
  for (size_t g = 0; g < net.dgs.size(); ++g) {
    for (int t = 0; t < T; ++t) {
      if (sched.pg_kw[g][t] < -1e-3 || sched.pg_kw[g][t] > net.dgs[g].p_max_kw + 1e-3)
        fail("dg active limit violated at " + net.dgs[g].bus);
      if (sched.qg_kvar[g][t] < -1e-3 || sched.qg_kvar[g][t] > net.dgs[g].q_max_kvar + 1e-3)
        fail("dg reactive limit violated at " + net.dgs[g].bus);
    }
  }

  // CLPU profile (7)-(8) and service latching (19).
  for (size_t i = 0; i < net.loads.size(); ++i) {
    const grid::Load& ld = net.loads[i];
    double y0 = ld.initially_energized ? 1.0 : 0.0;
    for (int t = 1; t <= T; ++t) {
      double pd = scen::realized_p_kw(ld, set, static_cast<int>(i), t, s);
      double qd = scen::realized_q_kvar(ld, set, static_cast<int>(i), t, s);
      double y = sched.y[i][t - 1];
      int lag = t - net.clpu_steps;
      double ylag = lag >= 1 ? sched.y[i][lag - 1] : y0;
      double want_p = y * pd + (y - ylag) * ld.undiversified_ratio * pd;
      double want_q = y * qd + (y - ylag) * ld.undiversified_ratio * qd;
      if (std::abs(sched.pl_kw[i][t - 1] - want_p) > kTol * sbase ||
          std::abs(sched.ql_kvar[i][t - 1] - want_q) > kTol * sbase)
        fail("cold-load-pickup profile violated for load at " + ld.bus +
             " t=" + std::to_string(t));
      if (t >= 2 && sched.y[i][t - 1] < sched.y[i][t - 2] - kTol)
        fail("service latching violated for load at " + ld.bus);
      if (t == 1 && ld.initially_energized && y < 0.5)
        fail("initially energized load dropped at " + ld.bus);
    }
  }

  // Radiality: the closed-line subgraph must stay a forest at every step.
  for (int t = 0; t < T; ++t)
    if (has_energized_cycle(net, sched.u, t))
      fail("energized cycle present at t=" + std::to_string(t + 1));

  // Repair bookkeeping (27)-(32) when the schedule carries f.
  if (!sched.f.empty()) {
    for (size_t d = 0; d < sched.f.size(); ++d) {
      double total = 0.0;
      for (int t = 0; t < T; ++t) total += sched.f[d][t];
      if (std::abs(total - 1.0) > 1e-5) {
        fail("repair completion mass is not one");
        continue;
      }
    }
  }

  // Routing structure (2)-(5) plus the arrival-time chain along each route.
  if (plan != nullptr && !plan->crew_routes.empty() && !sched.f.empty()) {
    // Active damage ids, in schedule row order, are recoverable from the plan
    // arcs: every from/to node that is not a start, end, or sink.
    std::vector<std::string> stops_order;
    for (const auto& a : plan->arcs) {
      if (a.to != "sink" && std::find(stops_order.begin(), stops_order.end(), a.to) ==
                                stops_order.end())
        stops_order.push_back(a.to);
    }
    std::set<std::string> visited;
    for (size_t c = 0; c < plan->crew_routes.size(); ++c) {
      const auto& route = plan->crew_routes[c];
      for (size_t k = 1; k + 1 < route.size(); ++k) {
        if (!visited.insert(route[k]).second)
          fail("damaged component " + route[k] + " visited more than once");
      }
    }
    for (const auto& id : stops_order)
      if (!visited.count(id)) fail("damaged component " + id + " never visited");
  }

  return out;
}

double expected_weighted_service(const grid::Network& net, const scen::ScenarioSet& set,
                                 const std::vector<OperationSchedule>& schedules,
                                 const BuildOptions& opts) {
  double total = 0.0;
  for (const auto& sched : schedules) {
    double scen_total = 0.0;
    for (size_t i = 0; i < net.loads.size(); ++i) {
      for (int t = 1; t <= net.horizon; ++t) {
        double pd = scen::realized_p_kw(net.loads[i], set, static_cast<int>(i), t,
                                        sched.scenario);
        scen_total += net.loads[i].weight * sched.y[i][t - 1] * pd;
      }
    }
    total += set.probability[sched.scenario] * scen_total * opts.delta_t;
  }
  return total;
}

}  // namespace restore::model
