#include "restore/dph.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

namespace restore::dph {

using model::CrewFleet;
using model::RoutePlan;

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> damaged_ids(const grid::Network& net) {
  std::vector<std::string> out;
  for (const auto& ln : net.lines)
    if (ln.damaged) out.push_back(ln.id);
  return out;
}

// Last physical location of each crew in a cycle plan: the final stop, or the
// start when the crew stayed idle.
std::vector<std::string> last_locations(const RoutePlan& plan, const CrewFleet& fleet) {
  std::vector<std::string> out(fleet.count);
  for (int c = 0; c < fleet.count; ++c) {
    const auto& route = plan.crew_routes[c];
    out[c] = route.size() > 2 ? route[route.size() - 2] : fleet.starts[c];
  }
  return out;
}

}  // namespace

double evaluate_plan(const grid::Network& net, const CrewFleet& fleet,
                     const scen::ScenarioSet& set, const RoutePlan& plan,
                     const DphConfig& cfg,
                     std::vector<model::OperationSchedule>* schedules) {
  double zeta = 0.0;
  std::vector<double> objs(set.count(), 0.0);
  std::vector<std::string> errors(set.count());
  std::vector<std::vector<model::OperationSchedule>> scen_scheds(set.count());

  // Lines the plan repairs; anything else stays out of service, which also
  // covers plans cut short because every load was already servable.
  std::vector<std::string> covered;
  for (const auto& route : plan.crew_routes)
    for (size_t k = 1; k + 1 < route.size(); ++k) covered.push_back(route[k]);
  std::vector<std::string> all_damage = damaged_ids(net);
  std::vector<std::string> ordered;
  for (const auto& id : all_damage)
    if (std::find(covered.begin(), covered.end(), id) != covered.end())
      ordered.push_back(id);
  if (ordered.empty()) throw DphError("plan repairs nothing");

  auto run_one = [&](int s) {
    try {
      auto built = model::build_subproblem2_scenario(net, fleet, set, ordered, s, nullptr,
                                                     cfg.build, &all_damage);
      // Pin the routing to the concatenated plan.
      std::vector<double> values(built.first_stage_ids().size(), 0.0);
      std::set<std::tuple<int, std::string, std::string>> chosen;
      for (int c = 0; c < fleet.count; ++c) {
        const auto& route = plan.crew_routes[c];
        for (size_t k = 0; k + 1 < route.size(); ++k) {
          std::string to = k + 2 == route.size() ? "sink" : route[k + 1];
          chosen.insert({c, route[k], to});
        }
      }
      for (size_t a = 0; a < built.arcs.size(); ++a) {
        const auto& arc = built.arcs[a];
        if (chosen.count({arc.crew, arc.from, arc.to})) values[a] = 1.0;
      }
      built.fix_first_stage(values);
      mip::SolveLimits limits{cfg.ph.subproblem_time_limit_s, cfg.ph.mip_gap};
      auto sol = mip::solve_mip(built.problem, limits);
      if (!sol.usable())
        throw DphError("plan evaluation failed in scenario " + std::to_string(s) + ": " +
                       mip::to_string(sol.status));
      auto dec = model::decode(sol, built);
      objs[s] = sol.objective;
      scen_scheds[s] = std::move(dec.schedules);
    } catch (const std::exception& e) {
      errors[s] = e.what();
    }
  };
  if (cfg.ph.parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = 0; s < set.count(); ++s) run_one(s);
  } else {
    for (int s = 0; s < set.count(); ++s) run_one(s);
  }
  for (int s = 0; s < set.count(); ++s) {
    if (!errors[s].empty()) throw DphError(errors[s]);
    zeta += set.probability[s] * objs[s];
    if (schedules)
      for (auto& sc : scen_scheds[s]) schedules->push_back(std::move(sc));
  }
  return zeta;
}

RoutePlan concatenate_routes(const std::vector<RoutePlan>& cycle_plans,
                             const CrewFleet& original_fleet) {
  if (cycle_plans.empty()) throw DphError("no cycle plans to concatenate");
  const int crews = original_fleet.count;
  std::vector<std::vector<std::string>> stops(crews);
  std::vector<std::string> at = original_fleet.starts;

  for (const RoutePlan& plan : cycle_plans) {
    if (static_cast<int>(plan.crew_routes.size()) != crews)
      throw DphError("cycle plan crew count mismatch");
    for (int c = 0; c < crews; ++c) {
      const auto& route = plan.crew_routes[c];
      if (route.empty() || route.front() != at[c])
        throw DphError("crew " + std::to_string(c) + " starts cycle at " +
                       (route.empty() ? "?" : route.front()) + " but was at " + at[c]);
      for (size_t k = 1; k + 1 < route.size(); ++k) {
        stops[c].push_back(route[k]);
        at[c] = route[k];
      }
    }
  }

  RoutePlan out;
  std::set<std::string> seen;
  for (int c = 0; c < crews; ++c) {
    std::vector<std::string> route = {original_fleet.starts[c]};
    std::string cur = original_fleet.starts[c];
    for (const auto& stop : stops[c]) {
      if (!seen.insert(stop).second)
        throw DphError("damaged component " + stop + " appears in two cycles");
      out.arcs.push_back({c, cur, stop, 1.0});
      route.push_back(stop);
      cur = stop;
    }
    out.arcs.push_back({c, cur, "sink", 1.0});
    route.push_back(original_fleet.ends[c]);
    out.crew_routes.push_back(std::move(route));
  }
  return out;
}

DphResult dph_solve(const grid::Network& net, const CrewFleet& fleet,
                    const scen::ScenarioSet& set, const DphConfig& cfg) {
  DphResult res;
  std::vector<std::string> remaining = damaged_ids(net);
  if (remaining.empty()) throw DphError("network has no damaged line to dispatch for");
  const int crews = fleet.count;
  if (crews < 1) throw DphError("fleet needs at least one crew");

  std::vector<std::string> starts = fleet.starts;
  std::vector<RoutePlan> cycle_plans;
  std::set<std::string> assigned;
  auto t0 = Clock::now();

  const int loop_cycles = static_cast<int>(remaining.size()) / crews;
  for (int r = 1; r <= loop_cycles && !remaining.empty(); ++r) {
    if (static_cast<int>(remaining.size()) <= crews) break;  // final batch below
    auto cycle_start = Clock::now();
    DispatchCycleLog log;
    log.cycle = r;
    log.crew_starts_before = starts;

    // Subproblem I by PH: pick the critical components for this cycle.
    auto fam1 = ph::sub1_family(net, set, crews, cfg.build, remaining);
    auto sel = ph::ph_solve(fam1, cfg.ph);
    log.sub1_state = sel.state;
    std::vector<std::string> critical;
    for (size_t j = 0; j < remaining.size(); ++j)
      if (sel.first_stage[j] >= 0.5) critical.push_back(remaining[j]);
    log.selected = critical;
    if (critical.empty()) {
      res.all_served_break = true;
      res.cycles.push_back(std::move(log));
      break;  // every load can be served without further repairs
    }
    for (const auto& id : critical)
      if (!assigned.insert(id).second)
        throw DphError("cycle " + std::to_string(r) + " re-selected " + id);

    // Subproblem II by PH: route the crews to the critical components.
    CrewFleet cycle_fleet = fleet;
    cycle_fleet.starts = starts;
    auto fam2 = ph::sub2_family(net, cycle_fleet, set, critical, cfg.build, remaining);
    auto routed = ph::ph_solve(fam2, cfg.ph);
    log.sub2_state = routed.state;
    cycle_plans.push_back(routed.plan);

    starts = last_locations(routed.plan, cycle_fleet);
    log.crew_starts_after = starts;
    std::vector<std::string> next;
    for (const auto& id : remaining)
      if (std::find(critical.begin(), critical.end(), id) == critical.end())
        next.push_back(id);
    remaining = std::move(next);
    log.seconds = std::chrono::duration<double>(Clock::now() - cycle_start).count();
    res.cycles.push_back(std::move(log));
  }

  // Steps 11-12: route whatever is left in one final batch (the selection
  // break only ends the selection loop; the repairs still get scheduled).
  if (!remaining.empty()) {
    auto cycle_start = Clock::now();
    DispatchCycleLog log;
    log.cycle = static_cast<int>(res.cycles.size()) + 1;
    log.remainder = true;
    log.crew_starts_before = starts;
    log.selected = remaining;

    CrewFleet cycle_fleet = fleet;
    cycle_fleet.starts = starts;
    auto fam2 = ph::sub2_family(net, cycle_fleet, set, remaining, cfg.build, remaining);
    auto routed = ph::ph_solve(fam2, cfg.ph);
    log.sub2_state = routed.state;
    cycle_plans.push_back(routed.plan);
    starts = last_locations(routed.plan, cycle_fleet);
    log.crew_starts_after = starts;
    log.seconds = std::chrono::duration<double>(Clock::now() - cycle_start).count();
    res.cycles.push_back(std::move(log));
    remaining.clear();
  }

  if (cycle_plans.empty())
    throw DphError("no routing produced: selection broke before any cycle");

  res.plan = concatenate_routes(cycle_plans, fleet);

  // Completeness: the concatenated plan covers every damaged line once.
  {
    std::set<std::string> covered;
    for (const auto& route : res.plan.crew_routes)
      for (size_t k = 1; k + 1 < route.size(); ++k) covered.insert(route[k]);
    for (const auto& id : damaged_ids(net))
      if (!covered.count(id)) throw DphError("plan never repairs " + id);
  }

  res.expected_objective = evaluate_plan(net, fleet, set, res.plan, cfg, &res.schedules);
  (void)t0;
  return res;
}

std::string cycle_log_csv(const std::vector<DispatchCycleLog>& cycles) {
  std::ostringstream os;
  os << "cycle,remainder,selected,starts_after,ph1_iterations,ph2_iterations,seconds\n";
  for (const auto& c : cycles) {
    os << c.cycle << ',' << (c.remainder ? 1 : 0) << ',';
    for (size_t i = 0; i < c.selected.size(); ++i) os << (i ? ";" : "") << c.selected[i];
    os << ',';
    for (size_t i = 0; i < c.crew_starts_after.size(); ++i)
      os << (i ? ";" : "") << c.crew_starts_after[i];
    os << ',' << (c.sub1_state.log.empty() ? -1 : c.sub1_state.iterations) << ','
       << (c.sub2_state.log.empty() ? -1 : c.sub2_state.iterations) << ',' << c.seconds
       << '\n';
  }
  return os.str();
}

std::string route_table(const RoutePlan& plan) {
  std::ostringstream os;
  os << "crew,route\n";
  for (size_t c = 0; c < plan.crew_routes.size(); ++c) {
    os << "crew" << c + 1 << ',';
    const auto& route = plan.crew_routes[c];
    for (size_t k = 0; k < route.size(); ++k) {
      if (k) os << " -> ";
      os << route[k];
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace restore::dph
