#pragma once

// Test-only oracle for the two-stage routing problem: enumerates every
// ordered assignment of damaged components to crews, simulates arrival and
// completion times directly, and solves each scenario's remaining operation
// problem as a small MILP with the repair trajectory fixed. Shares no model
// construction code with the production builders.

#include <map>
#include <string>
#include <vector>

#include "restore/grid.hpp"
#include "restore/model.hpp"
#include "restore/scen.hpp"

namespace restore::test {

struct RouteOracleResult {
  bool feasible = false;
  double objective = 0.0;                              // expected weighted kWh
  std::vector<std::vector<std::string>> best_routes;   // per crew, stops only
};

RouteOracleResult oracle_route_ef(const grid::Network& net, const model::CrewFleet& fleet,
                                  const scen::ScenarioSet& set,
                                  double completion_eps = 0.01);

// Second-stage optimum for one scenario given fixed completion steps (step
// index per damaged line, 0 = never repaired within the horizon).
double oracle_second_stage(const grid::Network& net, const scen::ScenarioSet& set,
                           int scenario, const std::map<std::string, int>& completion);

}  // namespace restore::test
