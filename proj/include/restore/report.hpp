#pragma once

#include <string>
#include <utility>
#include <vector>

#include "restore/dph.hpp"
#include "restore/model.hpp"
#include "restore/scen.hpp"

namespace restore::report {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReportConfig {
  model::BuildOptions build;
  double mip_gap = 1e-6;  // tight so the metric sign properties hold
  double time_limit_s = mip::kInfinity;
  bool parallel = true;
};

struct MetricsReport {
  double zeta = 0.0;  // expected weighted served energy of the given plan
  double ws = 0.0;    // wait-and-see value
  double eev = 0.0;   // expected result of the expected-value solution
  double evpi = 0.0;  // ws - zeta
  double vss = 0.0;   // zeta - eev
  double eens = 0.0;  // expected energy not supplied, kWh
  std::vector<double> scenario_objectives;           // zeta per scenario
  std::vector<std::vector<double>> served_fraction;  // [scenario][t]
};

// Mean of the per-scenario deterministic optima (perfect foresight).
double compute_ws(const grid::Network& net, const model::CrewFleet& fleet,
                  const scen::ScenarioSet& set, const ReportConfig& cfg = {});

// Solve the expected-value problem, freeze its routing, then price that plan
// against the full scenario set.
double compute_eev(const grid::Network& net, const model::CrewFleet& fleet,
                   const scen::ScenarioSet& set, const ReportConfig& cfg = {});

// One-column scenario set at the probability-weighted mean repair times with
// zero forecast error.
scen::ScenarioSet expected_value_scenario(const scen::ScenarioSet& set);

// EENS over decoded schedules: sum_s Pr(s) sum_t sum_i (1-y) P^D dt, in kWh.
double compute_eens(const grid::Network& net, const scen::ScenarioSet& set,
                    const std::vector<model::OperationSchedule>& schedules,
                    double delta_t = 1.0);

// Full metric bundle for an implemented plan.
MetricsReport compute_metrics(const grid::Network& net, const model::CrewFleet& fleet,
                              const scen::ScenarioSet& set, const model::RoutePlan& plan,
                              const ReportConfig& cfg = {});

// Solution-stability sweep: per requested scenario count, sample, reduce,
// solve with the dispatch-cycle algorithm, and record the plan value.
struct StabilityRow {
  int scenario_count = 0;
  double zeta = 0.0;
};
std::vector<StabilityRow> stability_sweep(const grid::Network& net,
                                          const model::CrewFleet& fleet,
                                          const scen::UncertaintyConfig& ucfg,
                                          const dph::DphConfig& dcfg,
                                          const std::vector<int>& sizes,
                                          int raw_per_kept = 4);
std::string stability_csv(const std::vector<StabilityRow>& rows);

// Writes routes.csv, switch_dg_schedule.csv, load_served.csv, metrics.csv.
void emit_results(const grid::Network& net, const scen::ScenarioSet& set,
                  const model::RoutePlan& plan,
                  const std::vector<model::OperationSchedule>& schedules,
                  const MetricsReport& metrics, const std::string& dir);

// Readers for the emitted files (round-trip checked in the tests).
MetricsReport read_metrics_csv(const std::string& path);
std::vector<std::vector<double>> read_load_served_csv(const std::string& path);
std::vector<std::vector<std::string>> read_routes_csv(const std::string& path);

}  // namespace restore::report
