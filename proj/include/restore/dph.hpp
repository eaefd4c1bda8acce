#pragma once

#include <string>
#include <vector>

#include "restore/model.hpp"
#include "restore/ph.hpp"
#include "restore/scen.hpp"

namespace restore::dph {

class DphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DphConfig {
  ph::PhConfig ph;
  model::BuildOptions build;
};

struct DispatchCycleLog {
  int cycle = 0;           // 1-based loop cycles; the remainder pass comes last
  bool remainder = false;  // Steps 11-12 (or the whole run when D <= crews)
  std::vector<std::string> selected;            // N'(r)
  std::vector<std::string> crew_starts_before;  // o_c entering the cycle
  std::vector<std::string> crew_starts_after;   // o_c for the next cycle
  double seconds = 0.0;
  ph::PhState sub1_state;  // empty for the remainder pass
  ph::PhState sub2_state;
};

struct DphResult {
  model::RoutePlan plan;  // concatenated routes covering every damaged line
  std::vector<model::OperationSchedule> schedules;  // full-plan re-solve per scenario
  std::vector<DispatchCycleLog> cycles;
  double expected_objective = 0.0;  // zeta of the implemented plan
  bool all_served_break = false;    // selection came back empty
};

// Alternates critical-damage selection and restricted crew routing, both via
// progressive hedging, until every damaged line is assigned, then re-solves
// all second stages with the concatenated plan fixed.
DphResult dph_solve(const grid::Network& net, const model::CrewFleet& fleet,
                    const scen::ScenarioSet& set, const DphConfig& cfg = {});

// Joins per-cycle route plans into one plan per crew; consecutive cycles must
// agree on crew hand-over locations.
model::RoutePlan concatenate_routes(const std::vector<model::RoutePlan>& cycle_plans,
                                    const model::CrewFleet& original_fleet);

// Expected objective ("zeta") of an arbitrary concatenated plan, evaluated by
// fixing the routing in every scenario's full operation model. Schedules are
// appended to *schedules when non-null.
double evaluate_plan(const grid::Network& net, const model::CrewFleet& fleet,
                     const scen::ScenarioSet& set, const model::RoutePlan& plan,
                     const DphConfig& cfg,
                     std::vector<model::OperationSchedule>* schedules);

// Cycle log CSV: one row per cycle plus the remainder pass.
std::string cycle_log_csv(const std::vector<DispatchCycleLog>& cycles);

// Route table formatted one crew per line: "crew,stop -> stop -> ...".
std::string route_table(const model::RoutePlan& plan);

}  // namespace restore::dph
