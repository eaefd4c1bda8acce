#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "restore/grid.hpp"

namespace restore::scen {

struct UncertaintyConfig {
  double repair_lognormal_mu = -0.3072;
  double repair_lognormal_sigma = 1.8404;
  double repair_min_hours = 0.5;  // floor for unrealistically small draws
  double error_sigma = 0.05;
  double error_bound = 0.15;
  std::uint64_t rng_seed = 1;
};

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Discrete uncertainty support. Column s stacks the repair time of every
// damaged line followed by the hourly forecast error of every load, so a
// column is one realization of all random variables.
struct ScenarioSet {
  std::vector<std::string> damaged_lines;  // repair-time row order
  int load_count = 0;
  int horizon = 0;
  std::vector<std::vector<double>> columns;  // [scenario][D + I*T]
  std::vector<double> probability;           // sums to 1

  int count() const { return static_cast<int>(columns.size()); }
  int damage_count() const { return static_cast<int>(damaged_lines.size()); }
  int row_count() const { return damage_count() + load_count * horizon; }

  double repair_hours(int damage, int s) const { return columns[s][damage]; }
  // t is 1-based (hour index into the horizon).
  double error(int load, int t, int s) const {
    return columns[s][damage_count() + load * horizon + (t - 1)];
  }
  double mean_repair_hours(int damage) const;
};

// Monte Carlo sampling: n equiprobable scenarios. Repair times are lognormal
// draws floored at repair_min_hours; forecast errors are normal(0, sigma)
// draws resampled until within +/- error_bound. Deterministic per seed.
ScenarioSet sample_scenarios(const grid::Network& net, const UncertaintyConfig& cfg, int n);

// Backward reduction to k scenarios: each greedy step deletes the scenario
// with the cheapest probability-weighted distance to its nearest survivor and
// moves its probability there.
ScenarioSet reduce_scenarios(const ScenarioSet& set, int k);

// The realization matrix, row-major: (D + I*T) rows by |S| columns, repair
// rows first, then errors ordered load-major then hour.
std::vector<std::vector<double>> scenario_matrix(const ScenarioSet& set);

// Distance between two scenario columns: Euclidean with repair rows scaled
// by 1/horizon so hours and error fractions are commensurate.
double scenario_distance(const ScenarioSet& set, int a, int b);

// CSV persistence: repair_times.csv, errors.csv, probabilities.csv in `dir`.
void save_scenarios(const ScenarioSet& set, const std::string& dir);
ScenarioSet load_scenarios(const std::string& dir);

// Realized demand for a load at hour t (1-based) in scenario s, in kW.
inline double realized_p_kw(const grid::Load& load, const ScenarioSet& set, int load_idx,
                            int t, int s) {
  return load.forecast_p_kw[t - 1] * (1.0 + set.error(load_idx, t, s));
}
inline double realized_q_kvar(const grid::Load& load, const ScenarioSet& set, int load_idx,
                              int t, int s) {
  return load.forecast_q_kvar[t - 1] * (1.0 + set.error(load_idx, t, s));
}

}  // namespace restore::scen
