#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "restore/model.hpp"
#include "restore/scen.hpp"

namespace restore::ph {

class PhError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PhConfig {
  double rho = 1.0;
  double epsilon = 0.01;  // termination threshold on the consensus metric
  int max_iterations = 50;
  double subproblem_time_limit_s = 1800.0;
  double mip_gap = 1e-4;  // inner solves may stop at a loose gap
  bool parallel = true;   // scenario solves via OpenMP; serial path kept for testing
};

struct PhIterationStats {
  int iteration = 0;
  double mu = 0.0;
  double min_obj = 0.0, max_obj = 0.0, expected_obj = 0.0;  // base objectives
  double seconds = 0.0;
};

struct PhState {
  int iterations = 0;  // last tau
  std::vector<std::vector<double>> delta;  // per scenario first-stage vectors
  std::vector<double> delta_bar;
  std::vector<std::vector<double>> eta;
  std::vector<PhIterationStats> log;  // one row per tau, starting at 0
  bool consensus = false;
};

// Produces the per-scenario subproblem for one scenario; `ph == nullptr`
// requests the plain initialization problem. Every scenario must share the
// same first-stage variable layout.
class ScenarioFamily {
 public:
  virtual ~ScenarioFamily() = default;
  virtual int scenario_count() const = 0;
  virtual double probability(int s) const = 0;
  virtual model::BuiltModel build(int s, const model::PhTerms* ph) const = 0;
};

class FunctionFamily : public ScenarioFamily {
 public:
  using BuildFn = std::function<model::BuiltModel(int, const model::PhTerms*)>;
  FunctionFamily(std::vector<double> probabilities, BuildFn fn)
      : probs_(std::move(probabilities)), fn_(std::move(fn)) {}
  int scenario_count() const override { return static_cast<int>(probs_.size()); }
  double probability(int s) const override { return probs_[s]; }
  model::BuiltModel build(int s, const model::PhTerms* ph) const override {
    return fn_(s, ph);
  }

 private:
  std::vector<double> probs_;
  BuildFn fn_;
};

// Ready-made families over the model builders.
FunctionFamily ef_family(const grid::Network& net, const model::CrewFleet& fleet,
                         const scen::ScenarioSet& set, const model::BuildOptions& opts = {});
FunctionFamily sub1_family(const grid::Network& net, const scen::ScenarioSet& set, int crews,
                           const model::BuildOptions& opts = {},
                           std::vector<std::string> damage_subset = {});
FunctionFamily sub2_family(const grid::Network& net, const model::CrewFleet& fleet,
                           const scen::ScenarioSet& set, std::vector<std::string> critical,
                           const model::BuildOptions& opts = {},
                           std::vector<std::string> current_damage = {});

struct PhResult {
  std::vector<double> first_stage;  // rounded consensus vector
  bool consensus = false;
  // Final per-scenario solutions with the first stage fixed to the
  // implementable plan, plus their decoded schedules.
  std::vector<mip::MilpSolution> scenario_solutions;
  std::vector<model::OperationSchedule> schedules;
  model::RoutePlan plan;  // from the first scenario's decode (routing models)
  double expected_objective = 0.0;  // probability-weighted base objective
  PhState state;
};

// Two-stage progressive hedging: initialization solves, aggregation,
// multiplier updates, augmented re-solves, and termination on consensus. On
// hitting max_iterations without consensus the aggregate is rounded at 0.5
// and all second stages are re-solved with the first stage fixed.
PhResult ph_solve(const ScenarioFamily& family, const PhConfig& cfg);

// CSV iteration log: iteration, mu, min_obj, max_obj, expected_obj, seconds.
std::string ph_metrics_csv(const PhState& state);

}  // namespace restore::ph
