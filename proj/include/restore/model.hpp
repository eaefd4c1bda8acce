#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "restore/grid.hpp"
#include "restore/mip.hpp"
#include "restore/scen.hpp"

namespace restore::model {

class BuildError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CrewFleet {
  int count = 1;
  std::vector<std::string> starts;  // node ids: depot or a damaged line
  std::vector<std::string> ends;    // always depot in this artifact

  static CrewFleet at_depot(int crews, const grid::Network& net);
};

// Disjunctive-constraint constants, kept as small as the formulation allows.
struct BigM {
  double voltage = 0.2;  // p.u.
  double arrival = 0.0;  // hours: horizon minus the smallest repair time
  double chain = 0.0;    // hours: arrival + max repair + max travel
};

// Throws BuildError when some damaged component cannot be repaired within the
// horizon even by a direct trip from the depot.
BigM compute_big_m(const grid::Network& net, const scen::ScenarioSet& set);

enum class Radiality { Loop, SpanningTree };

struct BuildOptions {
  Radiality radiality = Radiality::Loop;
  double completion_slack_eps = 0.01;  // slack in the repair-completion window
  double delta_t = 1.0;                // hours per step
};

// Progressive-hedging terms attached to the first-stage variables of a
// per-scenario subproblem (absent during initialization solves).
struct PhTerms {
  std::vector<double> eta;        // multiplier per first-stage variable
  std::vector<double> delta_bar;  // aggregate per first-stage variable
  double rho = 0.0;
};

struct RoutePlan {
  struct Arc {
    int crew;
    std::string from, to;
    double value;
  };
  std::vector<Arc> arcs;                              // decoded x, all crews
  std::vector<std::vector<std::string>> crew_routes;  // start ... end per crew

  // Arcs with value 1 for a crew, in route order (excludes the sink arc).
  std::vector<std::vector<std::string>> ordered_stops() const;
};

// Second-stage trajectory of one scenario, decoded back to physical units.
struct OperationSchedule {
  int scenario = -1;
  // [damage][crew], hours; zero for crews that skip the component.
  std::vector<std::vector<double>> alpha;
  std::vector<std::vector<double>> f;  // [damage][t]
  std::vector<std::vector<double>> u;  // [line][t]
  std::vector<std::vector<double>> y;  // [load][t]
  std::vector<std::vector<double>> pg_kw, qg_kvar;      // [dg][t]
  std::vector<std::vector<double>> sub_p_kw, sub_q_kvar;  // [substation][t]
  std::vector<std::vector<double>> pb_pu, qb_pu;        // [line][t]
  std::vector<std::vector<double>> pl_kw, ql_kvar;      // [load][t]
  std::vector<std::vector<double>> v_pu;                // [bus][t]
};

// A built MILP plus everything needed to locate variables afterwards.
struct BuiltModel {
  mip::MilpProblem problem;

  const grid::Network* net = nullptr;
  const scen::ScenarioSet* set = nullptr;
  CrewFleet fleet;
  BuildOptions opts;
  BigM big_m;

  // First-stage layout (identical order across sibling scenario builds).
  struct ArcVar {
    int crew;
    std::string from, to;
    int id;
  };
  std::vector<ArcVar> arcs;                       // routing models
  std::vector<std::pair<std::string, int>> z;     // selection models
  std::vector<int> first_stage_ids() const;

  // Damaged lines that this model may repair; others stay out of service.
  std::vector<std::string> active_damage;

  // Scenario blocks present in the problem (global scenario indices).
  std::vector<int> scenarios;

  // Per block, variable ids; -1 means the value is structurally fixed and
  // the fixed value lives in the matching *_fixed table.
  struct Block {
    std::vector<std::vector<int>> u;          // [line][t]
    std::vector<std::vector<double>> u_fixed; // used where u id is -1
    std::vector<std::vector<int>> y;          // [load][t]
    std::vector<std::vector<int>> f;          // [active damage][t]
    std::vector<std::vector<int>> alpha;      // [active damage][crew]
    std::vector<std::vector<int>> pg, qg;     // [dg][t]
    std::vector<std::vector<int>> ps, qs;     // [substation][t]
    std::vector<std::vector<int>> pb, qb;     // [line][t]
    std::vector<std::vector<int>> pl, ql;     // [load][t]
    std::vector<std::vector<int>> v;          // [bus][t]
  };
  std::vector<Block> blocks;

  // Fixes every first-stage variable to the given values (by bounds).
  void fix_first_stage(std::span<const double> values);
};

// The monolithic stochastic MILP over all scenarios (routing first stage).
BuiltModel build_extensive_form(const grid::Network& net, const CrewFleet& fleet,
                                const scen::ScenarioSet& set,
                                const BuildOptions& opts = {});

// Single-scenario copy of the extensive form, optionally augmented with the
// progressive-hedging linear and proximal terms on the routing variables.
BuiltModel build_scenario_subproblem(const grid::Network& net, const CrewFleet& fleet,
                                     const scen::ScenarioSet& set, int scenario,
                                     const PhTerms* ph = nullptr,
                                     const BuildOptions& opts = {});

// Critical-component selection: binary z per damaged line, no routing.
BuiltModel build_subproblem1(const grid::Network& net, const scen::ScenarioSet& set,
                             int crews, const BuildOptions& opts = {},
                             const std::vector<std::string>* damage_subset = nullptr);

// Single-scenario selection subproblem for progressive hedging.
BuiltModel build_subproblem1_scenario(const grid::Network& net,
                                      const scen::ScenarioSet& set, int crews,
                                      int scenario, const PhTerms* ph = nullptr,
                                      const BuildOptions& opts = {},
                                      const std::vector<std::string>* damage_subset = nullptr);

// Routing restricted to the critical set: lines outside `critical` stay out
// of service for the whole horizon.
// `current_damage` lists the lines still broken when the cycle starts
// (default: every damaged line of the network); lines repaired in earlier
// dispatch cycles are treated as healthy.
BuiltModel build_subproblem2(const grid::Network& net, const CrewFleet& fleet,
                             const scen::ScenarioSet& set,
                             const std::vector<std::string>& critical,
                             const BuildOptions& opts = {},
                             const std::vector<std::string>* current_damage = nullptr);

BuiltModel build_subproblem2_scenario(const grid::Network& net, const CrewFleet& fleet,
                                      const scen::ScenarioSet& set,
                                      const std::vector<std::string>& critical,
                                      int scenario, const PhTerms* ph = nullptr,
                                      const BuildOptions& opts = {},
                                      const std::vector<std::string>* current_damage = nullptr);

struct Decoded {
  RoutePlan plan;
  std::vector<OperationSchedule> schedules;  // one per scenario block
};

// Extracts the plan and schedules from a solved model and re-verifies every
// schedule invariant on the decoded values. Throws BuildError on a cycle in
// a crew's arcs or any invariant violation.
Decoded decode(const mip::MilpSolution& solution, const BuiltModel& built);

// Independent feasibility check of a decoded schedule; returns one message
// per violated invariant (empty when clean). `plan` may be null for
// selection models.
std::vector<std::string> verify_schedule(const grid::Network& net,
                                         const scen::ScenarioSet& set,
                                         const RoutePlan* plan,
                                         const OperationSchedule& schedule,
                                         const BuildOptions& opts = {});

// Expected weighted served load of a decoded solution, in weighted kWh:
// sum_s Pr(s) sum_t sum_i w_i * y * P^D * dt.
double expected_weighted_service(const grid::Network& net, const scen::ScenarioSet& set,
                                 const std::vector<OperationSchedule>& schedules,
                                 const BuildOptions& opts = {});

}  // namespace restore::model
