#include "restore/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace restore::model {

using grid::Network;
using mip::MilpProblem;
using mip::Sense;
using scen::ScenarioSet;

CrewFleet CrewFleet::at_depot(int crews, const Network& net) {
  CrewFleet f;
  f.count = crews;
  f.starts.assign(crews, net.depot);
  f.ends.assign(crews, net.depot);
  return f;
}

BigM compute_big_m(const Network& net, const ScenarioSet& set) {
  BigM m;
  m.voltage = 0.2;
  const double horizon = net.horizon;
  double min_repair = 0.0, max_repair = 0.0, max_travel = 0.0;
  if (set.damage_count() > 0 && set.count() > 0) {
    min_repair = std::numeric_limits<double>::infinity();
    for (int d = 0; d < set.damage_count(); ++d) {
      for (int s = 0; s < set.count(); ++s) {
        double r = set.repair_hours(d, s);
        min_repair = std::min(min_repair, r);
        max_repair = std::max(max_repair, r);
        double direct = net.travel_between(net.depot, set.damaged_lines[d]);
        if (direct + r > horizon + 1e-9) {
          std::ostringstream os;
          os << "horizon too short: repairing " << set.damaged_lines[d]
             << " in scenario " << s << " needs " << direct + r
             << " h from the depot but the horizon is " << horizon << " h";
          throw BuildError(os.str());
        }
      }
    }
  }
  for (const auto& row : net.travel_hours)
    for (double h : row) max_travel = std::max(max_travel, h);
  m.arrival = horizon - min_repair;
  m.chain = m.arrival + max_repair + max_travel;
  return m;
}

std::vector<int> BuiltModel::first_stage_ids() const {
  std::vector<int> ids;
  for (const auto& a : arcs) ids.push_back(a.id);
  for (const auto& [name, id] : z) ids.push_back(id);
  return ids;
}

void BuiltModel::fix_first_stage(std::span<const double> values) {
  std::vector<int> ids = first_stage_ids();
  if (values.size() != ids.size())
    throw BuildError("fix_first_stage: value count mismatch");
  for (size_t i = 0; i < ids.size(); ++i) {
    double v = values[i] >= 0.5 ? 1.0 : 0.0;
    problem.set_bounds(ids[i], v, v);
  }
}

std::vector<std::vector<std::string>> RoutePlan::ordered_stops() const {
  std::vector<std::vector<std::string>> out(crew_routes.size());
  for (size_t c = 0; c < crew_routes.size(); ++c) {
    for (size_t k = 1; k + 1 < crew_routes[c].size(); ++k)
      out[c].push_back(crew_routes[c][k]);
  }
  return out;
}

namespace {

constexpr double kTimeFuzz = 1e-9;

// Smallest integer step at which a repair finishing at time `hours` can be in
// service (ties at integers stay at the integer).
int completion_floor_step(double hours) {
  return static_cast<int>(std::ceil(hours - kTimeFuzz));
}

enum class FirstStage { Routing, Selection };

struct Builder {
  const Network& net;
  const ScenarioSet& set;
  const BuildOptions& opts;
  FirstStage first_stage;
  CrewFleet fleet;                        // routing models only
  std::vector<std::string> current_damage;  // lines still broken in this model
  std::vector<std::string> active;          // subset repairable in this model
  std::vector<int> scenarios;               // global scenario indices to emit
  bool probability_weighted = true;
  int crew_cap = 0;                       // selection models: constraint (37)
  const PhTerms* ph = nullptr;

  BuiltModel out;
  int T = 0;

  std::set<std::string> current_set, active_set;
  std::vector<int> set_row;  // line index -> row in set.damaged_lines, or -1

  Builder(const Network& n, const ScenarioSet& s, const BuildOptions& o)
      : net(n), set(s), opts(o) {
    T = net.horizon;
  }

  bool is_current_damage(int k) const { return current_set.count(net.lines[k].id) > 0; }
  bool is_active(int k) const { return active_set.count(net.lines[k].id) > 0; }

  double repair_hours(const std::string& line_id, int s) const {
    for (int d = 0; d < set.damage_count(); ++d)
      if (set.damaged_lines[d] == line_id) return set.repair_hours(d, s);
    throw BuildError("scenario set has no repair time for line " + line_id);
  }

  double min_travel_to(const std::string& node) const {
    int idx = net.travel_index(node);
    if (idx < 0) throw BuildError("node missing from travel matrix: " + node);
    double best = std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < net.travel_nodes.size(); ++j)
      if (static_cast<int>(j) != idx) best = std::min(best, net.travel_hours[idx][j]);
    return std::isfinite(best) ? best : 0.0;
  }

  BuiltModel build() {
    out.net = &net;
    out.set = &set;
    out.opts = opts;
    out.fleet = fleet;
    out.active_damage = active;
    out.scenarios = scenarios;
    out.big_m = compute_big_m(net, set);
    for (const auto& id : current_damage) current_set.insert(id);
    for (const auto& id : active) active_set.insert(id);

    validate_inputs();
    out.problem.set_objective_sense(mip::ObjSense::Maximize);

    if (first_stage == FirstStage::Routing)
      build_routing_stage();
    else
      build_selection_stage();

    for (size_t b = 0; b < scenarios.size(); ++b) build_scenario_block(b);

    if (first_stage == FirstStage::Selection) {
      // (37): at most `crew_cap` components selected.
      std::vector<std::pair<int, double>> terms;
      for (auto& [id, var] : out.z) terms.push_back({var, 1.0});
      out.problem.add_constraint(terms, Sense::LessEqual, crew_cap, "z_cap");
    }

    apply_ph_terms();
    return std::move(out);
  }

  void validate_inputs() {
    if (T < 1) throw BuildError("network horizon must be at least one step");
    for (const auto& id : active) {
      if (!current_set.count(id))
        throw BuildError("active damage " + id + " is not in the current damaged set");
      int k = net.line_index(id);
      if (k < 0 || !net.lines[k].damaged)
        throw BuildError("active damage " + id + " is not a damaged line");
    }
    if (first_stage == FirstStage::Routing) {
      if (fleet.count < 1) throw BuildError("fleet needs at least one crew");
      for (const auto& s : fleet.starts) {
        if (s != net.depot && net.travel_index(s) < 0)
          throw BuildError("crew start " + s + " is not the depot or a damaged line");
      }
    }
    for (int s : scenarios)
      if (s < 0 || s >= set.count()) throw BuildError("scenario index out of range");
    if (static_cast<int>(net.loads.size()) != set.load_count && set.load_count != 0)
      throw BuildError("scenario set load count differs from the network");
  }

  // ---- first stage -------------------------------------------------------

  void build_routing_stage() {
    // Virtual per-crew start plus one shared sink; the sink arc only marks a
    // crew's final location.
    for (int c = 0; c < fleet.count; ++c) {
      const std::string& start = fleet.starts[c];
      std::vector<std::string> targets = active;
      targets.push_back("sink");
      for (const auto& to : targets) {
        if (to == start) continue;
        int id = out.problem.add_binary(arc_name(c, start, to));
        out.problem.set_branch_priority(id, 2);
        out.arcs.push_back({c, start, to, id});
      }
      for (const auto& from : active) {
        if (from == start) continue;
        for (const auto& to : active) {
          if (to == from || to == start) continue;
          int id = out.problem.add_binary(arc_name(c, from, to));
          out.problem.set_branch_priority(id, 2);
          out.arcs.push_back({c, from, to, id});
        }
        int id = out.problem.add_binary(arc_name(c, from, "sink"));
        out.problem.set_branch_priority(id, 2);
        out.arcs.push_back({c, from, "sink", id});
      }
    }

    // (2): leave the start exactly once.
    for (int c = 0; c < fleet.count; ++c) {
      std::vector<std::pair<int, double>> terms;
      for (const auto& a : out.arcs)
        if (a.crew == c && a.from == fleet.starts[c]) terms.push_back({a.id, 1.0});
      out.problem.add_constraint(terms, Sense::Equal, 1.0, "leave_start_c" + std::to_string(c));
    }
    // (3): arrive at the end exactly once.
    for (int c = 0; c < fleet.count; ++c) {
      std::vector<std::pair<int, double>> terms;
      for (const auto& a : out.arcs)
        if (a.crew == c && a.to == "sink") terms.push_back({a.id, 1.0});
      out.problem.add_constraint(terms, Sense::Equal, 1.0, "reach_end_c" + std::to_string(c));
    }
    // (4): flow conservation at every damaged component.
    for (int c = 0; c < fleet.count; ++c) {
      for (const auto& m : active) {
        if (m == fleet.starts[c]) continue;
        std::vector<std::pair<int, double>> terms;
        for (const auto& a : out.arcs) {
          if (a.crew != c) continue;
          if (a.from == m) terms.push_back({a.id, 1.0});
          if (a.to == m) terms.push_back({a.id, -1.0});
        }
        out.problem.add_constraint(terms, Sense::Equal, 0.0,
                                   "flow_" + m + "_c" + std::to_string(c));
      }
    }
    // (5): each damaged component is repaired by exactly one crew.
    for (const auto& n : active) {
      std::vector<std::pair<int, double>> terms;
      for (const auto& a : out.arcs)
        if (a.to == n) terms.push_back({a.id, 1.0});
      out.problem.add_constraint(terms, Sense::Equal, 1.0, "visit_" + n);
    }

    // Interchangeable crews (same start and end) produce permuted copies of
    // every solution; ordering their first stops prunes the duplicates
    // without touching the optimal value.
    for (int c = 0; c + 1 < fleet.count; ++c) {
      if (fleet.starts[c] != fleet.starts[c + 1] || fleet.ends[c] != fleet.ends[c + 1])
        continue;
      std::vector<std::pair<int, double>> terms;
      auto first_stop_rank = [&](int crew, double sign) {
        for (const auto& a : out.arcs) {
          if (a.crew != crew || a.from != fleet.starts[crew]) continue;
          double rank = static_cast<double>(active.size()) + 1.0;  // sink sorts last
          for (size_t d = 0; d < active.size(); ++d)
            if (active[d] == a.to) rank = static_cast<double>(d) + 1.0;
          terms.push_back({a.id, sign * rank});
        }
      };
      first_stop_rank(c, 1.0);
      first_stop_rank(c + 1, -1.0);
      out.problem.add_constraint(terms, Sense::LessEqual, 0.0,
                                 "crew_order_c" + std::to_string(c));
    }
  }

  void build_selection_stage() {
    std::vector<std::string> sorted_ids = active;
    std::sort(sorted_ids.begin(), sorted_ids.end());
    for (const auto& id : active) {
      int var = out.problem.add_binary("z(" + id + ")");
      out.problem.set_branch_priority(var, 2);
      // Tie-break between equally valuable selections: prefer the
      // lexicographically smallest ids, and none over useless ones.
      size_t rank = std::find(sorted_ids.begin(), sorted_ids.end(), id) - sorted_ids.begin();
      out.problem.add_objective_coeff(var, -1e-9 * static_cast<double>(rank + 1));
      out.z.push_back({id, var});
    }
  }

  std::string arc_name(int c, const std::string& from, const std::string& to) const {
    return "x(" + from + "," + to + ",c" + std::to_string(c) + ")";
  }

  // ---- second stage ------------------------------------------------------

  void build_scenario_block(size_t b) {
    const int s = scenarios[b];
    const std::string tag = ",s" + std::to_string(s) + ")";
    auto vname = [&](const char* base, const std::string& entity, int t) {
      return std::string(base) + "(" + entity + ",t" + std::to_string(t) + tag;
    };
    MilpProblem& P = out.problem;
    BuiltModel::Block blk;
    const int nl = static_cast<int>(net.lines.size());
    const int nb = static_cast<int>(net.buses.size());
    const int nload = static_cast<int>(net.loads.size());
    const double sbase = grid::kPowerBaseKw;

    // Substation injection cap: total worst-case demand incl. pickup surge.
    double cap_p = 0.0, cap_q = 0.0;
    for (int i = 0; i < nload; ++i) {
      const grid::Load& ld = net.loads[i];
      double pmax = 0.0, qmax = 0.0;
      for (int t = 1; t <= T; ++t) {
        pmax = std::max(pmax, scen::realized_p_kw(ld, set, i, t, s));
        qmax = std::max(qmax, scen::realized_q_kvar(ld, set, i, t, s));
      }
      cap_p += pmax * (1.0 + ld.undiversified_ratio);
      cap_q += qmax * (1.0 + ld.undiversified_ratio);
    }
    cap_p = cap_p / sbase * 1.01;
    cap_q = cap_q / sbase * 1.01;

    // Voltage variables; substations pin the reference.
    blk.v.assign(nb, std::vector<int>(T, -1));
    for (int i = 0; i < nb; ++i) {
      for (int t = 1; t <= T; ++t) {
        double lo = net.buses[i].is_substation ? net.v_ref : 1.0 - net.v_epsilon;
        double hi = net.buses[i].is_substation ? net.v_ref : 1.0 + net.v_epsilon;
        blk.v[i][t - 1] = P.add_continuous(vname("V", net.buses[i].id, t), lo, hi);
      }
    }

    // Line status u: fixed for healthy non-switch lines and for inactive
    // damage; a binary elsewhere. Early steps of active damage are pinned to
    // zero (the component cannot be in service before travel plus repair).
    blk.u.assign(nl, std::vector<int>(T, -1));
    blk.u_fixed.assign(nl, std::vector<double>(T, 1.0));
    for (int k = 0; k < nl; ++k) {
      const grid::Line& ln = net.lines[k];
      bool broken = is_current_damage(k);
      if (!broken && !ln.has_switch) continue;  // (18): u == 1
      if (broken && !is_active(k)) {
        for (int t = 0; t < T; ++t) blk.u_fixed[k][t] = 0.0;  // (41)
        continue;
      }
      int tmin = 1;
      if (broken) {
        double rep = repair_hours(ln.id, s);
        double lead = first_stage == FirstStage::Selection ? rep : min_travel_to(ln.id) + rep;
        tmin = completion_floor_step(lead);
      }
      bool timed = broken && first_stage == FirstStage::Routing;
      for (int t = 1; t <= T; ++t) {
        int id = P.add_binary(vname("u", ln.id, t));
        if (broken && t < tmin) P.set_bounds(id, 0.0, 0.0);
        if (timed) P.set_branch_priority(id, 1);  // tied to f by the repair link
        blk.u[k][t - 1] = id;
      }
    }

    // Load service status y; initially energized loads stay served by (19).
    blk.y.assign(nload, std::vector<int>(T, -1));
    for (int i = 0; i < nload; ++i) {
      for (int t = 1; t <= T; ++t) {
        int id = P.add_binary(vname("y", net.loads[i].bus, t));
        if (net.loads[i].initially_energized) P.set_bounds(id, 1.0, 1.0);
        blk.y[i][t - 1] = id;
      }
    }

    // Generation, injection, flows, supplied load.
    blk.pg.assign(net.dgs.size(), std::vector<int>(T, -1));
    blk.qg.assign(net.dgs.size(), std::vector<int>(T, -1));
    for (size_t g = 0; g < net.dgs.size(); ++g) {
      for (int t = 1; t <= T; ++t) {
        blk.pg[g][t - 1] = P.add_continuous(vname("PG", net.dgs[g].bus, t), 0.0,
                                            net.dgs[g].p_max_kw / sbase);
        blk.qg[g][t - 1] = P.add_continuous(vname("QG", net.dgs[g].bus, t), 0.0,
                                            net.dgs[g].q_max_kvar / sbase);
      }
    }
    std::vector<int> substations;
    for (int i = 0; i < nb; ++i)
      if (net.buses[i].is_substation) substations.push_back(i);
    blk.ps.assign(substations.size(), std::vector<int>(T, -1));
    blk.qs.assign(substations.size(), std::vector<int>(T, -1));
    for (size_t g = 0; g < substations.size(); ++g) {
      for (int t = 1; t <= T; ++t) {
        blk.ps[g][t - 1] =
            P.add_continuous(vname("PS", net.buses[substations[g]].id, t), 0.0, cap_p);
        blk.qs[g][t - 1] =
            P.add_continuous(vname("QS", net.buses[substations[g]].id, t), 0.0, cap_q);
      }
    }
    blk.pb.assign(nl, std::vector<int>(T, -1));
    blk.qb.assign(nl, std::vector<int>(T, -1));
    for (int k = 0; k < nl; ++k) {
      for (int t = 1; t <= T; ++t) {
        double pm = net.lines[k].p_max, qm = net.lines[k].q_max;
        bool off = blk.u[k][t - 1] < 0 && blk.u_fixed[k][t - 1] == 0.0;
        blk.pb[k][t - 1] =
            P.add_continuous(vname("PB", net.lines[k].id, t), off ? 0.0 : -pm, off ? 0.0 : pm);
        blk.qb[k][t - 1] =
            P.add_continuous(vname("QB", net.lines[k].id, t), off ? 0.0 : -qm, off ? 0.0 : qm);
      }
    }
    blk.pl.assign(nload, std::vector<int>(T, -1));
    blk.ql.assign(nload, std::vector<int>(T, -1));
    for (int i = 0; i < nload; ++i) {
      for (int t = 1; t <= T; ++t) {
        blk.pl[i][t - 1] =
            P.add_continuous(vname("PL", net.loads[i].bus, t), 0.0, mip::kInfinity);
        blk.ql[i][t - 1] =
            P.add_continuous(vname("QL", net.loads[i].bus, t), 0.0, mip::kInfinity);
      }
    }

    // Repair completion f and arrival alpha exist only in routing models.
    const int nact = static_cast<int>(active.size());
    if (first_stage == FirstStage::Routing) {
      blk.f.assign(nact, std::vector<int>(T, -1));
      blk.alpha.assign(nact, std::vector<int>(fleet.count, -1));
      for (int d = 0; d < nact; ++d) {
        double rep = repair_hours(active[d], s);
        int tmin = completion_floor_step(min_travel_to(active[d]) + rep);
        for (int t = 1; t <= T; ++t) {
          int id = P.add_continuous(vname("f", active[d], t), 0.0, 1.0);  // (27)
          if (t < tmin) P.set_bounds(id, 0.0, 0.0);
          blk.f[d][t - 1] = id;
        }
        for (int c = 0; c < fleet.count; ++c) {
          blk.alpha[d][c] = P.add_continuous(
              "al(" + active[d] + ",c" + std::to_string(c) + tag, 0.0, out.big_m.arrival);
        }
      }
    }

    const double obj_weight =
        (probability_weighted ? set.probability[s] : 1.0) * opts.delta_t;

    for (int i = 0; i < nload; ++i) {
      const grid::Load& ld = net.loads[i];
      const int y0 = ld.initially_energized ? 1 : 0;
      for (int t = 1; t <= T; ++t) {
        double pd = scen::realized_p_kw(ld, set, i, t, s);
        double qd = scen::realized_q_kvar(ld, set, i, t, s);
        // Objective (6)/(33): expected priority-weighted served demand.
        P.add_objective_coeff(blk.y[i][t - 1], obj_weight * ld.weight * pd);

        // (7)-(8): cold-load-pickup block model, in per-unit.
        double pu = ld.undiversified_ratio * pd / sbase;
        double qu = ld.undiversified_ratio * qd / sbase;
        double pd_pu = pd / sbase, qd_pu = qd / sbase;
        int lag = t - net.clpu_steps;
        std::vector<std::pair<int, double>> pterms = {{blk.pl[i][t - 1], 1.0},
                                                      {blk.y[i][t - 1], -(pd_pu + pu)}};
        std::vector<std::pair<int, double>> qterms = {{blk.ql[i][t - 1], 1.0},
                                                      {blk.y[i][t - 1], -(qd_pu + qu)}};
        double prhs = 0.0, qrhs = 0.0;
        if (lag >= 1) {
          pterms.push_back({blk.y[i][lag - 1], pu});
          qterms.push_back({blk.y[i][lag - 1], qu});
        } else {
          prhs = -pu * y0;
          qrhs = -qu * y0;
        }
        P.add_constraint(pterms, Sense::Equal, prhs, vname("clpu_p", ld.bus, t));
        P.add_constraint(qterms, Sense::Equal, qrhs, vname("clpu_q", ld.bus, t));

        // (19): once served, stay served.
        if (t >= 2)
          P.add_constraint({{blk.y[i][t - 1], 1.0}, {blk.y[i][t - 2], -1.0}},
                           Sense::GreaterEqual, 0.0, vname("latch", ld.bus, t));
      }
    }

    // (9)-(10): nodal power balance.
    for (int i = 0; i < nb; ++i) {
      for (int t = 1; t <= T; ++t) {
        std::vector<std::pair<int, double>> pterms, qterms;
        for (int k : net.lines_at_bus(i)) {
          double sign = net.lines[k].to_bus == net.buses[i].id ? 1.0 : -1.0;
          pterms.push_back({blk.pb[k][t - 1], sign});
          qterms.push_back({blk.qb[k][t - 1], sign});
        }
        for (size_t g = 0; g < net.dgs.size(); ++g) {
          if (net.dgs[g].bus == net.buses[i].id) {
            pterms.push_back({blk.pg[g][t - 1], 1.0});
            qterms.push_back({blk.qg[g][t - 1], 1.0});
          }
        }
        for (size_t g = 0; g < substations.size(); ++g) {
          if (substations[g] == i) {
            pterms.push_back({blk.ps[g][t - 1], 1.0});
            qterms.push_back({blk.qs[g][t - 1], 1.0});
          }
        }
        for (int l = 0; l < nload; ++l) {
          if (net.loads[l].bus == net.buses[i].id) {
            pterms.push_back({blk.pl[l][t - 1], -1.0});
            qterms.push_back({blk.ql[l][t - 1], -1.0});
          }
        }
        P.add_constraint(pterms, Sense::Equal, 0.0, vname("balp", net.buses[i].id, t));
        P.add_constraint(qterms, Sense::Equal, 0.0, vname("balq", net.buses[i].id, t));
      }
    }

    // (11)-(12): voltage drop, disjunctive when the line can switch.
    for (int k = 0; k < nl; ++k) {
      const grid::Line& ln = net.lines[k];
      int vi = net.bus_index(ln.from_bus), vj = net.bus_index(ln.to_bus);
      double rv = ln.resistance / net.v_ref, xv = ln.reactance / net.v_ref;
      for (int t = 1; t <= T; ++t) {
        int uid = blk.u[k][t - 1];
        std::vector<std::pair<int, double>> base = {{blk.v[vj][t - 1], 1.0},
                                                    {blk.v[vi][t - 1], -1.0},
                                                    {blk.pb[k][t - 1], rv},
                                                    {blk.qb[k][t - 1], xv}};
        if (uid < 0 && blk.u_fixed[k][t - 1] == 1.0) {
          P.add_constraint(base, Sense::Equal, 0.0, vname("vdrop", ln.id, t));
        } else if (uid >= 0) {
          double M = out.big_m.voltage;
          auto up = base;
          up.push_back({uid, M});
          P.add_constraint(up, Sense::LessEqual, M, vname("vdrop_hi", ln.id, t));
          auto dn = base;
          dn.push_back({uid, -M});
          P.add_constraint(dn, Sense::GreaterEqual, -M, vname("vdrop_lo", ln.id, t));
        }
        // Fixed-open lines carry no flow; the voltages decouple freely.

        // (16)-(17): flow limits gated by the line status.
        if (uid >= 0) {
          double pm = ln.p_max, qm = ln.q_max;
          P.add_constraint({{blk.pb[k][t - 1], 1.0}, {uid, -pm}}, Sense::LessEqual, 0.0,
                           vname("pflow_hi", ln.id, t));
          P.add_constraint({{blk.pb[k][t - 1], 1.0}, {uid, pm}}, Sense::GreaterEqual, 0.0,
                           vname("pflow_lo", ln.id, t));
          P.add_constraint({{blk.qb[k][t - 1], 1.0}, {uid, -qm}}, Sense::LessEqual, 0.0,
                           vname("qflow_hi", ln.id, t));
          P.add_constraint({{blk.qb[k][t - 1], 1.0}, {uid, qm}}, Sense::GreaterEqual, 0.0,
                           vname("qflow_lo", ln.id, t));
        }
      }
    }

    build_radiality(b, blk, s, tag);

    if (first_stage == FirstStage::Routing)
      build_timing(b, blk, s, tag);
    else
      build_selection_coupling(b, blk, s, tag);

    out.blocks.push_back(std::move(blk));
  }

  // (20) or (21)-(24).
  void build_radiality(size_t, BuiltModel::Block& blk, int s, const std::string& tag) {
    MilpProblem& P = out.problem;
    if (opts.radiality == Radiality::Loop) {
      auto loops = grid::find_loops(net);
      for (size_t l = 0; l < loops.size(); ++l) {
        for (int t = 1; t <= T; ++t) {
          std::vector<std::pair<int, double>> terms;
          double fixed_closed = 0.0;
          for (const auto& id : loops[l]) {
            int k = net.line_index(id);
            int uid = blk.u[k][t - 1];
            if (uid >= 0)
              terms.push_back({uid, 1.0});
            else
              fixed_closed += blk.u_fixed[k][t - 1];
          }
          double rhs = static_cast<double>(loops[l].size()) - 1.0 - fixed_closed;
          if (rhs < -1e-9)
            throw BuildError("loop " + std::to_string(l) +
                             " is permanently closed; the network cannot stay radial");
          if (!terms.empty())
            P.add_constraint(terms, Sense::LessEqual, rhs,
                             "loop" + std::to_string(l) + "(t" + std::to_string(t) + tag);
        }
      }
      return;
    }

    // Spanning-tree form: parent indicators per line orientation.
    const int nl = static_cast<int>(net.lines.size());
    std::vector<std::vector<int>> beta_fw(nl, std::vector<int>(T, -1));
    std::vector<std::vector<int>> beta_bw(nl, std::vector<int>(T, -1));
    for (int k = 0; k < nl; ++k) {
      const grid::Line& ln = net.lines[k];
      int bi = net.bus_index(ln.from_bus), bj = net.bus_index(ln.to_bus);
      for (int t = 1; t <= T; ++t) {
        // (23): substations never have a parent.
        double fw_ub = net.buses[bj].is_substation ? 0.0 : 1.0;
        double bw_ub = net.buses[bi].is_substation ? 0.0 : 1.0;
        beta_fw[k][t - 1] = P.add_continuous(
            "bt(" + ln.from_bus + ">" + ln.to_bus + ",t" + std::to_string(t) + tag, 0.0, fw_ub);
        beta_bw[k][t - 1] = P.add_continuous(
            "bt(" + ln.to_bus + ">" + ln.from_bus + ",t" + std::to_string(t) + tag, 0.0, bw_ub);
        // (22): a closed line is a parent edge in exactly one direction.
        std::vector<std::pair<int, double>> terms = {{beta_fw[k][t - 1], 1.0},
                                                     {beta_bw[k][t - 1], 1.0}};
        int uid = blk.u[k][t - 1];
        double rhs = 0.0;
        if (uid >= 0)
          terms.push_back({uid, -1.0});
        else
          rhs = blk.u_fixed[k][t - 1];
        P.add_constraint(terms, Sense::Equal, rhs, "tree(" + ln.id + ",t" + std::to_string(t) + tag);
      }
    }
    // (24): at most one parent per bus.
    for (int i = 0; i < static_cast<int>(net.buses.size()); ++i) {
      for (int t = 1; t <= T; ++t) {
        std::vector<std::pair<int, double>> terms;
        for (int k : net.lines_at_bus(i)) {
          bool incoming_fw = net.lines[k].to_bus == net.buses[i].id;
          int v = incoming_fw ? beta_fw[k][t - 1] : beta_bw[k][t - 1];
          terms.push_back({v, 1.0});
        }
        if (!terms.empty())
          P.add_constraint(terms, Sense::LessEqual, 1.0,
                           "parent(" + net.buses[i].id + ",t" + std::to_string(t) + tag);
      }
    }
  }

  // (25)-(32): arrivals, completion windows, and the routing/operation link.
  void build_timing(size_t b, BuiltModel::Block& blk, int s, const std::string& tag) {
    MilpProblem& P = out.problem;
    const int nact = static_cast<int>(active.size());
    const double Mch = out.big_m.chain;

    auto arc_id = [&](int c, const std::string& from, const std::string& to) {
      for (const auto& a : out.arcs)
        if (a.crew == c && a.from == from && a.to == to) return a.id;
      return -1;
    };
    auto active_index = [&](const std::string& id) {
      for (int d = 0; d < nact; ++d)
        if (active[d] == id) return d;
      return -1;
    };

    for (int c = 0; c < fleet.count; ++c) {
      const std::string& start = fleet.starts[c];
      for (int dn = 0; dn < nact; ++dn) {
        const std::string& n = active[dn];
        if (n == start) continue;
        // From the crew start: alpha_start = 0 and no repair there.
        int x_sn = arc_id(c, start, n);
        if (x_sn >= 0) {
          double tr = net.travel_between(start, n);
          // (25): travel - M(1-x) <= alpha_n  ->  -alpha_n + M x <= M - tr
          P.add_constraint({{blk.alpha[dn][c], -1.0}, {x_sn, Mch}}, Sense::LessEqual,
                           Mch - tr, "arr_lo(" + start + ">" + n + ",c" + std::to_string(c) + tag);
          // (26): alpha_n <= travel + M(1-x)
          P.add_constraint({{blk.alpha[dn][c], 1.0}, {x_sn, Mch}}, Sense::LessEqual,
                           Mch + tr, "arr_hi(" + start + ">" + n + ",c" + std::to_string(c) + tag);
        }
        for (int dm = 0; dm < nact; ++dm) {
          const std::string& m = active[dm];
          if (m == n || m == start) continue;
          int x_mn = arc_id(c, m, n);
          if (x_mn < 0) continue;
          double chain = repair_hours(m, s) + net.travel_between(m, n);
          // (25)/(26) between damaged components.
          P.add_constraint({{blk.alpha[dn][c], -1.0}, {blk.alpha[dm][c], 1.0}, {x_mn, Mch}},
                           Sense::LessEqual, Mch - chain,
                           "arr_lo(" + m + ">" + n + ",c" + std::to_string(c) + tag);
          P.add_constraint({{blk.alpha[dn][c], 1.0}, {blk.alpha[dm][c], -1.0}, {x_mn, Mch}},
                           Sense::LessEqual, Mch + chain,
                           "arr_hi(" + m + ">" + n + ",c" + std::to_string(c) + tag);
        }
      }
    }

    for (int d = 0; d < nact; ++d) {
      const std::string& m = active[d];
      // (28): exactly one completion step.
      std::vector<std::pair<int, double>> sum_f;
      for (int t = 1; t <= T; ++t) sum_f.push_back({blk.f[d][t - 1], 1.0});
      P.add_constraint(sum_f, Sense::Equal, 1.0, "fsum(" + m + tag);

      // (29)-(30): the completion step covers arrival plus repair.
      double rep = repair_hours(m, s);
      std::vector<std::pair<int, double>> lower, upper;
      for (int t = 1; t <= T; ++t) {
        lower.push_back({blk.f[d][t - 1], static_cast<double>(t)});
        upper.push_back({blk.f[d][t - 1], static_cast<double>(t)});
      }
      for (int c = 0; c < fleet.count; ++c) {
        lower.push_back({blk.alpha[d][c], -1.0});
        upper.push_back({blk.alpha[d][c], -1.0});
        for (const auto& a : out.arcs) {
          if (a.crew == c && a.from == m) {
            lower.push_back({a.id, -rep});
            upper.push_back({a.id, -rep});
          }
        }
      }
      P.add_constraint(lower, Sense::GreaterEqual, 0.0, "cmpl_lo(" + m + tag);
      P.add_constraint(upper, Sense::LessEqual, 1.0 - opts.completion_slack_eps,
                       "cmpl_hi(" + m + tag);

      // (31): only the visiting crew carries a nonzero arrival time.
      for (int c = 0; c < fleet.count; ++c) {
        std::vector<std::pair<int, double>> terms = {{blk.alpha[d][c], 1.0}};
        for (const auto& a : out.arcs)
          if (a.crew == c && a.from == m) terms.push_back({a.id, -out.big_m.arrival});
        P.add_constraint(terms, Sense::LessEqual, 0.0,
                         "arr_gate(" + m + ",c" + std::to_string(c) + tag);
      }

      // (32): in service from the completion step onward.
      int k = net.line_index(m);
      for (int t = 1; t <= T; ++t) {
        std::vector<std::pair<int, double>> terms = {{blk.u[k][t - 1], 1.0}};
        for (int tb = 1; tb <= t; ++tb) terms.push_back({blk.f[d][tb - 1], -1.0});
        P.add_constraint(terms, Sense::Equal, 0.0, "avail(" + m + ",t" + std::to_string(t) + tag);
      }
    }
    (void)b;
  }

  // (38)-(39): selected components may be used once their repair time passed.
  void build_selection_coupling(size_t, BuiltModel::Block& blk, int s, const std::string& tag) {
    MilpProblem& P = out.problem;
    for (const auto& [id, zvar] : out.z) {
      int k = net.line_index(id);
      for (int t = 1; t <= T; ++t) {
        if (blk.u[k][t - 1] < 0) continue;  // pinned to zero by (40)
        P.add_constraint({{blk.u[k][t - 1], 1.0}, {zvar, -1.0}}, Sense::LessEqual, 0.0,
                         "select(" + id + ",t" + std::to_string(t) + tag);
      }
    }
    (void)s;
  }

  void apply_ph_terms() {
    if (!ph) return;
    std::vector<int> ids = out.first_stage_ids();
    if (ph->eta.size() != ids.size() || ph->delta_bar.size() != ids.size())
      throw BuildError("ph term dimension mismatch with the first stage");
    // Maximize form: objective - eta.delta - (rho/2)||delta - delta_bar||^2,
    // expanded exactly on binaries via delta^2 = delta.
    for (size_t j = 0; j < ids.size(); ++j) {
      out.problem.add_objective_coeff(ids[j], -ph->eta[j] + ph->rho * ph->delta_bar[j]);
      out.problem.add_objective_quad(ids[j], -0.5 * ph->rho);
      out.problem.add_objective_constant(-0.5 * ph->rho * ph->delta_bar[j] * ph->delta_bar[j]);
    }
  }
};

std::vector<std::string> all_damaged_ids(const Network& net) {
  std::vector<std::string> out;
  for (const auto& ln : net.lines)
    if (ln.damaged) out.push_back(ln.id);
  return out;
}

}  // namespace

BuiltModel build_extensive_form(const Network& net, const CrewFleet& fleet,
                                const ScenarioSet& set, const BuildOptions& opts) {
  Builder b(net, set, opts);
  b.first_stage = FirstStage::Routing;
  b.fleet = fleet;
  b.current_damage = all_damaged_ids(net);
  b.active = b.current_damage;
  for (int s = 0; s < set.count(); ++s) b.scenarios.push_back(s);
  b.probability_weighted = true;
  return b.build();
}

BuiltModel build_scenario_subproblem(const Network& net, const CrewFleet& fleet,
                                     const ScenarioSet& set, int scenario,
                                     const PhTerms* ph, const BuildOptions& opts) {
  Builder b(net, set, opts);
  b.first_stage = FirstStage::Routing;
  b.fleet = fleet;
  b.current_damage = all_damaged_ids(net);
  b.active = b.current_damage;
  b.scenarios = {scenario};
  b.probability_weighted = false;
  b.ph = ph;
  return b.build();
}

BuiltModel build_subproblem1(const Network& net, const ScenarioSet& set, int crews,
                             const BuildOptions& opts,
                             const std::vector<std::string>* damage_subset) {
  Builder b(net, set, opts);
  b.first_stage = FirstStage::Selection;
  b.current_damage = damage_subset ? *damage_subset : all_damaged_ids(net);
  b.active = b.current_damage;
  b.crew_cap = crews;
  for (int s = 0; s < set.count(); ++s) b.scenarios.push_back(s);
  b.probability_weighted = true;
  if (b.active.empty()) throw BuildError("selection subproblem needs at least one damage");
  return b.build();
}

BuiltModel build_subproblem1_scenario(const Network& net, const ScenarioSet& set,
                                      int crews, int scenario, const PhTerms* ph,
                                      const BuildOptions& opts,
                                      const std::vector<std::string>* damage_subset) {
  Builder b(net, set, opts);
  b.first_stage = FirstStage::Selection;
  b.current_damage = damage_subset ? *damage_subset : all_damaged_ids(net);
  b.active = b.current_damage;
  b.crew_cap = crews;
  b.scenarios = {scenario};
  b.probability_weighted = false;
  b.ph = ph;
  if (b.active.empty()) throw BuildError("selection subproblem needs at least one damage");
  return b.build();
}

BuiltModel build_subproblem2(const Network& net, const CrewFleet& fleet,
                             const ScenarioSet& set,
                             const std::vector<std::string>& critical,
                             const BuildOptions& opts,
                             const std::vector<std::string>* current_damage) {
  if (critical.empty()) throw BuildError("routing subproblem needs a nonempty critical set");
  Builder b(net, set, opts);
  b.first_stage = FirstStage::Routing;
  b.fleet = fleet;
  b.current_damage = current_damage ? *current_damage : all_damaged_ids(net);
  b.active = critical;
  for (int s = 0; s < set.count(); ++s) b.scenarios.push_back(s);
  b.probability_weighted = true;
  return b.build();
}

BuiltModel build_subproblem2_scenario(const Network& net, const CrewFleet& fleet,
                                      const ScenarioSet& set,
                                      const std::vector<std::string>& critical,
                                      int scenario, const PhTerms* ph,
                                      const BuildOptions& opts,
                                      const std::vector<std::string>* current_damage) {
  if (critical.empty()) throw BuildError("routing subproblem needs a nonempty critical set");
  Builder b(net, set, opts);
  b.first_stage = FirstStage::Routing;
  b.fleet = fleet;
  b.current_damage = current_damage ? *current_damage : all_damaged_ids(net);
  b.active = critical;
  b.scenarios = {scenario};
  b.probability_weighted = false;
  b.ph = ph;
  return b.build();
}

}  // namespace restore::model
