#include "restore/ph.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace restore::ph {

using model::BuiltModel;
using model::PhTerms;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct ScenarioSolve {
  mip::MilpSolution solution;
  std::vector<double> delta;   // first-stage values, snapped to 0/1
  double base_objective = 0.0;  // objective without PH terms
};

// Solves one scenario subproblem and extracts its first-stage vector.
ScenarioSolve solve_one(const ScenarioFamily& family, int s, const PhTerms* terms,
                        const PhConfig& cfg) {
  BuiltModel built = family.build(s, terms);
  mip::SolveLimits limits;
  limits.time_limit_s = cfg.subproblem_time_limit_s;
  limits.mip_gap = cfg.mip_gap;
  ScenarioSolve out;
  out.solution = mip::solve_mip(built.problem, limits);
  if (out.solution.status == mip::SolveStatus::Infeasible)
    throw PhError("scenario " + std::to_string(s) + " subproblem is infeasible");
  if (!out.solution.usable())
    throw PhError("scenario " + std::to_string(s) + " subproblem failed: " +
                  mip::to_string(out.solution.status));
  std::vector<int> ids = built.first_stage_ids();
  out.delta.reserve(ids.size());
  for (int id : ids) out.delta.push_back(out.solution.values[id] >= 0.5 ? 1.0 : 0.0);

  out.base_objective = out.solution.objective;
  if (terms != nullptr) {
    // Remove the hedging contribution: -eta.x - rho/2 ||x - delta_bar||^2.
    for (size_t j = 0; j < ids.size(); ++j) {
      double x = out.delta[j];
      out.base_objective += terms->eta[j] * x +
                            0.5 * terms->rho * (x - terms->delta_bar[j]) * (x - terms->delta_bar[j]);
    }
  }
  return out;
}

// Runs a full pass over scenarios, parallel or serial; results are collected
// by scenario index so the aggregation order never depends on scheduling.
std::vector<ScenarioSolve> sweep(const ScenarioFamily& family,
                                 const std::vector<PhTerms>* terms, const PhConfig& cfg) {
  const int n = family.scenario_count();
  std::vector<ScenarioSolve> out(n);
  std::vector<std::string> errors(n);
  if (cfg.parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = 0; s < n; ++s) {
      try {
        out[s] = solve_one(family, s, terms ? &(*terms)[s] : nullptr, cfg);
      } catch (const std::exception& e) {
        errors[s] = e.what();
      }
    }
  } else {
    for (int s = 0; s < n; ++s) {
      try {
        out[s] = solve_one(family, s, terms ? &(*terms)[s] : nullptr, cfg);
      } catch (const std::exception& e) {
        errors[s] = e.what();
      }
    }
  }
  for (int s = 0; s < n; ++s)
    if (!errors[s].empty()) throw PhError(errors[s]);
  return out;
}

// Quick feasibility probe of a candidate first-stage vector on scenario 0.
bool first_stage_feasible(const ScenarioFamily& family, const std::vector<double>& fs,
                          const PhConfig& cfg) {
  model::BuiltModel probe = family.build(0, nullptr);
  probe.fix_first_stage(fs);
  mip::SolveLimits limits;
  limits.time_limit_s = cfg.subproblem_time_limit_s;
  limits.mip_gap = cfg.mip_gap;
  return mip::solve_mip(probe.problem, limits).usable();
}

}  // namespace

PhResult ph_solve(const ScenarioFamily& family, const PhConfig& cfg) {
  if (cfg.rho <= 0.0) throw PhError("rho must be positive");
  if (cfg.epsilon <= 0.0) throw PhError("epsilon must be positive");
  const int n = family.scenario_count();
  if (n < 1) throw PhError("family has no scenarios");

  auto t0 = Clock::now();
  PhState state;
  state.delta.resize(n);
  state.eta.resize(n);

  auto aggregate = [&](const std::vector<ScenarioSolve>& solves) {
    size_t dim = solves[0].delta.size();
    state.delta_bar.assign(dim, 0.0);
    for (int s = 0; s < n; ++s) {
      state.delta[s] = solves[s].delta;
      for (size_t j = 0; j < dim; ++j)
        state.delta_bar[j] += family.probability(s) * solves[s].delta[j];
    }
  };
  auto consensus_metric = [&]() {
    double mu = 0.0;
    for (int s = 0; s < n; ++s) {
      double dist = 0.0;
      for (size_t j = 0; j < state.delta_bar.size(); ++j)
        dist += std::abs(state.delta[s][j] - state.delta_bar[j]);
      mu += family.probability(s) * dist;
    }
    return mu;
  };
  auto record = [&](int tau, double mu, const std::vector<ScenarioSolve>& solves,
                    double t_start) {
    PhIterationStats st;
    st.iteration = tau;
    st.mu = mu;
    st.min_obj = solves[0].base_objective;
    st.max_obj = solves[0].base_objective;
    st.expected_obj = 0.0;
    for (int s = 0; s < n; ++s) {
      st.min_obj = std::min(st.min_obj, solves[s].base_objective);
      st.max_obj = std::max(st.max_obj, solves[s].base_objective);
      st.expected_obj += family.probability(s) * solves[s].base_objective;
    }
    st.seconds = seconds_since(t0) - t_start;
    state.log.push_back(st);
  };

  // Steps 1-3: initialization solves and first aggregation.
  double t_iter = 0.0;
  std::vector<ScenarioSolve> solves = sweep(family, nullptr, cfg);
  aggregate(solves);
  double mu = consensus_metric();
  record(0, mu, solves, t_iter);
  state.iterations = 0;

  if (mu < cfg.epsilon) {
    state.consensus = true;
  } else {
    // Step 4: multiplier initialization.
    size_t dim = state.delta_bar.size();
    for (int s = 0; s < n; ++s) {
      state.eta[s].assign(dim, 0.0);
      for (size_t j = 0; j < dim; ++j)
        state.eta[s][j] = cfg.rho * (state.delta[s][j] - state.delta_bar[j]);
    }
    // Steps 5-10.
    for (int tau = 1; tau <= cfg.max_iterations; ++tau) {
      t_iter = seconds_since(t0);
      std::vector<PhTerms> terms(n);
      for (int s = 0; s < n; ++s) {
        terms[s].eta = state.eta[s];
        terms[s].delta_bar = state.delta_bar;
        terms[s].rho = cfg.rho;
      }
      solves = sweep(family, &terms, cfg);
      aggregate(solves);
      for (int s = 0; s < n; ++s)
        for (size_t j = 0; j < state.delta_bar.size(); ++j)
          state.eta[s][j] += cfg.rho * (state.delta[s][j] - state.delta_bar[j]);
      mu = consensus_metric();
      record(tau, mu, solves, t_iter);
      state.iterations = tau;
      if (mu < cfg.epsilon) {
        state.consensus = true;
        break;
      }
    }
  }

  // Implementable plan: round the aggregate and re-solve every second stage
  // with the first stage fixed.
  PhResult res;
  res.state = state;
  res.consensus = state.consensus;
  res.first_stage.resize(state.delta_bar.size());
  for (size_t j = 0; j < state.delta_bar.size(); ++j)
    res.first_stage[j] = state.delta_bar[j] >= 0.5 ? 1.0 : 0.0;

  if (!state.consensus) {
    // Component-wise rounding can break first-stage structure (degree or
    // cardinality rows). If it does, fall back to the scenario vector closest
    // to the aggregate: it came out of a feasible solve.
    if (!first_stage_feasible(family, res.first_stage, cfg)) {
      int best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (int s = 0; s < n; ++s) {
        double dist = 0.0;
        for (size_t j = 0; j < state.delta_bar.size(); ++j)
          dist += std::abs(state.delta[s][j] - state.delta_bar[j]);
        if (dist < best_dist - 1e-12) {
          best_dist = dist;
          best = s;
        }
      }
      res.first_stage = state.delta[best];
    }
  }

  res.scenario_solutions.resize(n);
  std::vector<model::BuiltModel> finals(n);
  std::vector<std::string> errors(n);
  auto solve_fixed = [&](int s) {
    try {
      finals[s] = family.build(s, nullptr);
      finals[s].fix_first_stage(res.first_stage);
      mip::SolveLimits limits;
      limits.time_limit_s = cfg.subproblem_time_limit_s;
      limits.mip_gap = cfg.mip_gap;
      res.scenario_solutions[s] = mip::solve_mip(finals[s].problem, limits);
      if (res.scenario_solutions[s].status == mip::SolveStatus::Infeasible)
        throw PhError("implemented plan infeasible in scenario " + std::to_string(s));
      if (!res.scenario_solutions[s].usable())
        throw PhError("implemented-plan solve failed in scenario " + std::to_string(s));
    } catch (const std::exception& e) {
      errors[s] = e.what();
    }
  };
  if (cfg.parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = 0; s < n; ++s) solve_fixed(s);
  } else {
    for (int s = 0; s < n; ++s) solve_fixed(s);
  }
  for (int s = 0; s < n; ++s)
    if (!errors[s].empty()) throw PhError(errors[s]);

  res.expected_objective = 0.0;
  for (int s = 0; s < n; ++s) {
    auto dec = model::decode(res.scenario_solutions[s], finals[s]);
    if (s == 0) res.plan = dec.plan;
    for (auto& sched : dec.schedules) res.schedules.push_back(std::move(sched));
    res.expected_objective +=
        family.probability(s) * res.scenario_solutions[s].objective;
  }
  return res;
}

std::string ph_metrics_csv(const PhState& state) {
  if (state.log.empty()) throw PhError("no iterations recorded");
  std::ostringstream os;
  os << "iteration,mu,min_obj,max_obj,expected_obj,seconds\n";
  char buf[160];
  for (const auto& st : state.log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.3f\n", st.iteration, st.mu,
                  st.min_obj, st.max_obj, st.expected_obj, st.seconds);
    os << buf;
  }
  return os.str();
}

FunctionFamily ef_family(const grid::Network& net, const model::CrewFleet& fleet,
                         const scen::ScenarioSet& set, const model::BuildOptions& opts) {
  return FunctionFamily(set.probability, [&net, fleet, &set, opts](int s, const PhTerms* ph) {
    return model::build_scenario_subproblem(net, fleet, set, s, ph, opts);
  });
}

FunctionFamily sub1_family(const grid::Network& net, const scen::ScenarioSet& set, int crews,
                           const model::BuildOptions& opts,
                           std::vector<std::string> damage_subset) {
  return FunctionFamily(
      set.probability,
      [&net, &set, crews, opts, subset = std::move(damage_subset)](int s, const PhTerms* ph) {
        return model::build_subproblem1_scenario(net, set, crews, s, ph, opts,
                                                 subset.empty() ? nullptr : &subset);
      });
}

FunctionFamily sub2_family(const grid::Network& net, const model::CrewFleet& fleet,
                           const scen::ScenarioSet& set, std::vector<std::string> critical,
                           const model::BuildOptions& opts,
                           std::vector<std::string> current_damage) {
  return FunctionFamily(
      set.probability,
      [&net, fleet, &set, crit = std::move(critical), opts,
       cur = std::move(current_damage)](int s, const PhTerms* ph) {
        return model::build_subproblem2_scenario(net, fleet, set, crit, s, ph, opts,
                                                 cur.empty() ? nullptr : &cur);
      });
}

}  // namespace restore::ph
