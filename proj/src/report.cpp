#include "restore/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace restore::report {

using model::CrewFleet;
using model::OperationSchedule;
using model::RoutePlan;
using scen::ScenarioSet;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot open " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

double compute_ws(const grid::Network& net, const CrewFleet& fleet, const ScenarioSet& set,
                  const ReportConfig& cfg) {
  std::vector<double> objs(set.count(), 0.0);
  std::vector<std::string> errors(set.count());
  auto run_one = [&](int s) {
    try {
      auto built = model::build_scenario_subproblem(net, fleet, set, s, nullptr, cfg.build);
      mip::SolveLimits limits{cfg.time_limit_s, cfg.mip_gap};
      auto sol = mip::solve_mip(built.problem, limits);
      if (!sol.usable())
        throw ReportError("scenario " + std::to_string(s) +
                          " deterministic solve failed: " + mip::to_string(sol.status));
      objs[s] = sol.objective;
    } catch (const std::exception& e) {
      errors[s] = e.what();
    }
  };
  if (cfg.parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int s = 0; s < set.count(); ++s) run_one(s);
  } else {
    for (int s = 0; s < set.count(); ++s) run_one(s);
  }
  double ws = 0.0;
  for (int s = 0; s < set.count(); ++s) {
    if (!errors[s].empty()) throw ReportError(errors[s]);
    ws += set.probability[s] * objs[s];
  }
  return ws;
}

scen::ScenarioSet expected_value_scenario(const ScenarioSet& set) {
  ScenarioSet ev;
  ev.damaged_lines = set.damaged_lines;
  ev.load_count = set.load_count;
  ev.horizon = set.horizon;
  std::vector<double> col(set.row_count(), 0.0);
  for (int d = 0; d < set.damage_count(); ++d) col[d] = set.mean_repair_hours(d);
  ev.columns.push_back(std::move(col));
  ev.probability = {1.0};
  return ev;
}

double compute_eev(const grid::Network& net, const CrewFleet& fleet, const ScenarioSet& set,
                   const ReportConfig& cfg) {
  // Deterministic problem at the expected values of the random variables.
  ScenarioSet ev = expected_value_scenario(set);
  auto built = model::build_scenario_subproblem(net, fleet, ev, 0, nullptr, cfg.build);
  mip::SolveLimits limits{cfg.time_limit_s, cfg.mip_gap};
  auto sol = mip::solve_mip(built.problem, limits);
  if (!sol.usable())
    throw ReportError("expected-value problem failed: " + mip::to_string(sol.status));
  auto dec = model::decode(sol, built);

  // Freeze the first stage and price it on the real scenarios.
  dph::DphConfig dcfg;
  dcfg.build = cfg.build;
  dcfg.ph.mip_gap = cfg.mip_gap;
  dcfg.ph.subproblem_time_limit_s = cfg.time_limit_s;
  dcfg.ph.parallel = cfg.parallel;
  return dph::evaluate_plan(net, fleet, set, dec.plan, dcfg, nullptr);
}

double compute_eens(const grid::Network& net, const ScenarioSet& set,
                    const std::vector<OperationSchedule>& schedules, double delta_t) {
  double eens = 0.0;
  for (const auto& sched : schedules) {
    double scen_unserved = 0.0;
    for (size_t i = 0; i < net.loads.size(); ++i) {
      for (int t = 1; t <= net.horizon; ++t) {
        double pd = scen::realized_p_kw(net.loads[i], set, static_cast<int>(i), t,
                                        sched.scenario);
        scen_unserved += (1.0 - sched.y[i][t - 1]) * pd;
      }
    }
    eens += set.probability[sched.scenario] * scen_unserved * delta_t;
  }
  return eens;
}

MetricsReport compute_metrics(const grid::Network& net, const CrewFleet& fleet,
                              const ScenarioSet& set, const RoutePlan& plan,
                              const ReportConfig& cfg) {
  MetricsReport rep;
  dph::DphConfig dcfg;
  dcfg.build = cfg.build;
  dcfg.ph.mip_gap = cfg.mip_gap;
  dcfg.ph.subproblem_time_limit_s = cfg.time_limit_s;
  dcfg.ph.parallel = cfg.parallel;

  std::vector<OperationSchedule> schedules;
  rep.zeta = dph::evaluate_plan(net, fleet, set, plan, dcfg, &schedules);
  rep.ws = compute_ws(net, fleet, set, cfg);
  rep.eev = compute_eev(net, fleet, set, cfg);
  rep.evpi = rep.ws - rep.zeta;
  rep.vss = rep.zeta - rep.eev;
  rep.eens = compute_eens(net, set, schedules, cfg.build.delta_t);

  rep.scenario_objectives.assign(set.count(), 0.0);
  rep.served_fraction.assign(set.count(), std::vector<double>(net.horizon, 0.0));
  for (const auto& sched : schedules) {
    int s = sched.scenario;
    double obj = 0.0;
    for (int t = 1; t <= net.horizon; ++t) {
      double served = 0.0, demand = 0.0;
      for (size_t i = 0; i < net.loads.size(); ++i) {
        double pd = scen::realized_p_kw(net.loads[i], set, static_cast<int>(i), t, s);
        served += sched.y[i][t - 1] * pd;
        demand += pd;
        obj += net.loads[i].weight * sched.y[i][t - 1] * pd * cfg.build.delta_t;
      }
      rep.served_fraction[s][t - 1] = demand > 0.0 ? served / demand : 1.0;
    }
    rep.scenario_objectives[s] = obj;
  }
  return rep;
}

std::vector<StabilityRow> stability_sweep(const grid::Network& net, const CrewFleet& fleet,
                                          const scen::UncertaintyConfig& ucfg,
                                          const dph::DphConfig& dcfg,
                                          const std::vector<int>& sizes, int raw_per_kept) {
  if (sizes.empty()) throw ReportError("stability sweep needs at least one size");
  std::vector<StabilityRow> rows;
  for (size_t idx = 0; idx < sizes.size(); ++idx) {
    int k = sizes[idx];
    scen::UncertaintyConfig cfg_k = ucfg;
    cfg_k.rng_seed = ucfg.rng_seed + idx;  // independent draw per size
    auto raw = scen::sample_scenarios(net, cfg_k, std::max(k, raw_per_kept * k));
    auto reduced = scen::reduce_scenarios(raw, k);
    auto res = dph::dph_solve(net, fleet, reduced, dcfg);
    rows.push_back({k, res.expected_objective});
  }
  return rows;
}

std::string stability_csv(const std::vector<StabilityRow>& rows) {
  std::ostringstream os;
  os << "scenarios,zeta\n";
  for (const auto& r : rows) os << r.scenario_count << ',' << fmt(r.zeta) << '\n';
  return os.str();
}

void emit_results(const grid::Network& net, const ScenarioSet& set, const RoutePlan& plan,
                  const std::vector<OperationSchedule>& schedules,
                  const MetricsReport& metrics, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);

  {
    std::ofstream out(fs::path(dir) / "routes.csv");
    if (!out) throw ReportError("cannot write routes.csv in " + dir);
    out << "crew,route\n";
    for (size_t c = 0; c < plan.crew_routes.size(); ++c) {
      const auto& route = plan.crew_routes[c];
      if (route.size() <= 2) continue;  // crew without repair stops
      out << "crew" << c + 1 << ',';
      for (size_t k = 0; k < route.size(); ++k) {
        if (k) out << " -> ";
        out << route[k];
      }
      out << '\n';
    }
  }

  {
    // Hourly switch states, DG output, and completed repairs (first scenario).
    std::ofstream out(fs::path(dir) / "switch_dg_schedule.csv");
    if (!out) throw ReportError("cannot write switch_dg_schedule.csv");
    out << "hour";
    std::vector<int> switch_lines;
    for (int k = 0; k < static_cast<int>(net.lines.size()); ++k)
      if (net.lines[k].has_switch) {
        switch_lines.push_back(k);
        out << ",sw_" << net.lines[k].id;
      }
    for (const auto& dg : net.dgs) out << ",dg_" << dg.bus << "_kw";
    out << ",repaired\n";
    if (!schedules.empty()) {
      const auto& sched = schedules.front();
      for (int t = 1; t <= net.horizon; ++t) {
        out << t;
        for (int k : switch_lines) out << ',' << (sched.u[k][t - 1] >= 0.5 ? 1 : 0);
        for (size_t g = 0; g < net.dgs.size(); ++g) out << ',' << fmt(sched.pg_kw[g][t - 1]);
        out << ',';
        bool first = true;
        for (size_t d = 0; d < sched.f.size(); ++d) {
          if (sched.f[d][t - 1] >= 0.5) {
            // Completion slots are per active damage; names track the plan.
            out << (first ? "" : ";") << "repair" << d;
            first = false;
          }
        }
        out << '\n';
      }
    }
  }

  {
    std::ofstream out(fs::path(dir) / "load_served.csv");
    if (!out) throw ReportError("cannot write load_served.csv");
    out << "hour";
    for (size_t s = 0; s < metrics.served_fraction.size(); ++s) out << ",s" << s;
    out << '\n';
    for (int t = 0; t < net.horizon; ++t) {
      out << t + 1;
      for (const auto& series : metrics.served_fraction) out << ',' << fmt(series[t]);
      out << '\n';
    }
  }

  {
    std::ofstream out(fs::path(dir) / "metrics.csv");
    if (!out) throw ReportError("cannot write metrics.csv");
    out << "metric,value\n";
    out << "zeta," << fmt(metrics.zeta) << '\n';
    out << "ws," << fmt(metrics.ws) << '\n';
    out << "eev," << fmt(metrics.eev) << '\n';
    out << "evpi," << fmt(metrics.evpi) << '\n';
    out << "vss," << fmt(metrics.vss) << '\n';
    out << "eens," << fmt(metrics.eens) << '\n';
    for (size_t s = 0; s < metrics.scenario_objectives.size(); ++s)
      out << "zeta_s" << s << ',' << fmt(metrics.scenario_objectives[s]) << '\n';
  }
  (void)set;
}

MetricsReport read_metrics_csv(const std::string& path) {
  MetricsReport rep;
  for (const auto& row : read_csv_rows(path)) {
    if (row.size() != 2 || row[0] == "metric") continue;
    double v = std::stod(row[1]);
    if (row[0] == "zeta") rep.zeta = v;
    else if (row[0] == "ws") rep.ws = v;
    else if (row[0] == "eev") rep.eev = v;
    else if (row[0] == "evpi") rep.evpi = v;
    else if (row[0] == "vss") rep.vss = v;
    else if (row[0] == "eens") rep.eens = v;
    else if (row[0].rfind("zeta_s", 0) == 0) {
      size_t s = std::stoul(row[0].substr(6));
      if (rep.scenario_objectives.size() <= s) rep.scenario_objectives.resize(s + 1);
      rep.scenario_objectives[s] = v;
    }
  }
  return rep;
}

std::vector<std::vector<double>> read_load_served_csv(const std::string& path) {
  std::vector<std::vector<double>> by_scenario;
  for (const auto& row : read_csv_rows(path)) {
    if (row.empty() || row[0] == "hour") continue;
    for (size_t s = 1; s < row.size(); ++s) {
      if (by_scenario.size() < s) by_scenario.resize(s);
      by_scenario[s - 1].push_back(std::stod(row[s]));
    }
  }
  return by_scenario;
}

std::vector<std::vector<std::string>> read_routes_csv(const std::string& path) {
  std::vector<std::vector<std::string>> routes;
  for (const auto& row : read_csv_rows(path)) {
    if (row.size() < 2 || row[0] == "crew") continue;
    std::vector<std::string> stops;
    std::string token;
    std::stringstream ss(row[1]);
    while (std::getline(ss, token, '>')) {
      while (!token.empty() && (token.back() == ' ' || token.back() == '-')) token.pop_back();
      while (!token.empty() && token.front() == ' ') token.erase(token.begin());
      if (!token.empty()) stops.push_back(token);
    }
    routes.push_back(std::move(stops));
  }
  return routes;
}

}  // namespace restore::report
