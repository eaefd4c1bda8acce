#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "fixtures.hpp"
#include "restore/scen.hpp"

using namespace restore;

namespace {

// Independent oracle: mean of max(X, floor) for lognormal X via Simpson
// quadrature over the standard normal density.
double truncated_lognormal_mean(double mu, double sigma, double floor_h) {
  const double lo = -10.0, hi = 10.0;
  const int steps = 20000;  // even
  const double h = (hi - lo) / steps;
  auto f = [&](double z) {
    double x = std::exp(mu + sigma * z);
    double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
    return std::max(x, floor_h) * phi;
  };
  double acc = f(lo) + f(hi);
  for (int i = 1; i < steps; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

grid::Network one_damage_net(int horizon = 2) {
  grid::Network net = test::two_bus();
  net.horizon = horizon;
  for (auto& ld : net.loads) {
    ld.forecast_p_kw.assign(horizon, 50.0);
    ld.forecast_q_kvar.assign(horizon, 20.0);
  }
  net.lines[0].damaged = true;
  net.travel_nodes = {"depot", "l1"};
  net.travel_hours = {{0.0, 0.25}, {0.25, 0.0}};
  net.rebuild_index();
  return net;
}

}  // namespace

TEST_CASE("sampling is deterministic per seed, bit for bit") {
  grid::Network net = one_damage_net();
  scen::UncertaintyConfig cfg = test::toy_uncertainty(42);
  auto a = scen::sample_scenarios(net, cfg, 50);
  auto b = scen::sample_scenarios(net, cfg, 50);
  CHECK(a.columns == b.columns);
  cfg.rng_seed = 43;
  auto c = scen::sample_scenarios(net, cfg, 50);
  CHECK(a.columns != c.columns);
}

TEST_CASE("degenerate error distribution keeps demand at the forecast") {
  grid::Network net = one_damage_net();
  scen::UncertaintyConfig cfg = test::toy_uncertainty(1);
  cfg.error_sigma = 1e-12;
  auto set = scen::sample_scenarios(net, cfg, 1);
  for (int t = 1; t <= net.horizon; ++t) {
    CHECK(std::abs(set.error(0, t, 0)) < 1e-9);
    CHECK(scen::realized_p_kw(net.loads[0], set, 0, t, 0) ==
          doctest::Approx(50.0).epsilon(1e-9));
  }
}

TEST_CASE("realized demand applies the forecast error multiplicatively") {
  scen::ScenarioSet set;
  set.damaged_lines = {"l1"};
  set.load_count = 1;
  set.horizon = 2;
  set.columns = {{3.0, 0.1, -0.1}};
  set.probability = {1.0};
  grid::Load ld;
  ld.forecast_p_kw = {100.0, 80.0};
  ld.forecast_q_kvar = {40.0, 32.0};
  CHECK(scen::realized_p_kw(ld, set, 0, 1, 0) == doctest::Approx(110.0));
  CHECK(scen::realized_p_kw(ld, set, 0, 2, 0) == doctest::Approx(72.0));
  CHECK(scen::realized_q_kvar(ld, set, 0, 1, 0) == doctest::Approx(44.0));
}

TEST_CASE("paper repair parameters match the quadrature oracle within 15%") {
  grid::Network net = one_damage_net();
  scen::UncertaintyConfig cfg;  // defaults are the published parameters
  cfg.rng_seed = 7;
  auto set = scen::sample_scenarios(net, cfg, 1000);
  double mean = 0.0;
  for (int s = 0; s < set.count(); ++s) mean += set.repair_hours(0, s);
  mean /= set.count();
  double oracle = truncated_lognormal_mean(cfg.repair_lognormal_mu,
                                           cfg.repair_lognormal_sigma,
                                           cfg.repair_min_hours);
  CHECK(std::abs(mean - oracle) / oracle < 0.15);
}

TEST_CASE("truncation bounds hold over 1e5 draws") {
  grid::Network net = one_damage_net(1);
  scen::UncertaintyConfig cfg = test::toy_uncertainty(99);
  cfg.error_sigma = 0.12;  // wide relative to the bound to stress rejection
  auto set = scen::sample_scenarios(net, cfg, 100000);
  double min_repair = std::numeric_limits<double>::infinity();
  double max_err = 0.0;
  for (int s = 0; s < set.count(); ++s) {
    min_repair = std::min(min_repair, set.repair_hours(0, s));
    max_err = std::max(max_err, std::abs(set.error(0, 1, s)));
  }
  CHECK(min_repair >= cfg.repair_min_hours);
  CHECK(max_err <= cfg.error_bound);
}

TEST_CASE("scenario matrix layout matches the stacked row order") {
  scen::ScenarioSet set;
  set.damaged_lines = {"l1"};
  set.load_count = 1;
  set.horizon = 2;
  set.columns = {{3.0, 0.1, -0.1}};
  set.probability = {1.0};
  auto m = scen::scenario_matrix(set);
  REQUIRE(m.size() == 3);
  CHECK(m[0][0] == 3.0);
  CHECK(m[1][0] == 0.1);
  CHECK(m[2][0] == -0.1);

  scen::ScenarioSet nods;
  nods.damaged_lines = {"a", "b"};
  nods.load_count = 0;
  nods.horizon = 4;
  nods.columns = {{1.0, 2.0}, {3.0, 4.0}};
  nods.probability = {0.5, 0.5};
  CHECK(scen::scenario_matrix(nods).size() == 2);
}

TEST_CASE("matrix row count is D + I*T on the 34-bus fixture") {
  grid::Network net = test::case34();
  auto set = scen::sample_scenarios(net, test::case34_uncertainty(), 3);
  int expect = 7 + static_cast<int>(net.loads.size()) * net.horizon;
  CHECK(set.row_count() == expect);
  CHECK(static_cast<int>(scen::scenario_matrix(set).size()) == expect);
}

TEST_CASE("reduction to the full size is the identity") {
  grid::Network net = one_damage_net();
  auto set = scen::sample_scenarios(net, test::toy_uncertainty(5), 8);
  auto red = scen::reduce_scenarios(set, 8);
  CHECK(red.columns == set.columns);
  CHECK(red.probability == set.probability);
}

TEST_CASE("duplicate scenarios merge into one with probability 1") {
  scen::ScenarioSet set;
  set.damaged_lines = {"l1"};
  set.load_count = 0;
  set.horizon = 2;
  set.columns = {{2.5}, {2.5}};
  set.probability = {0.5, 0.5};
  auto red = scen::reduce_scenarios(set, 1);
  REQUIRE(red.count() == 1);
  CHECK(red.probability[0] == doctest::Approx(1.0));
  CHECK(red.columns[0][0] == 2.5);
}

TEST_CASE("each greedy deletion minimizes cost over all candidates") {
  grid::Network net = one_damage_net();
  auto set = scen::sample_scenarios(net, test::toy_uncertainty(11), 10);

  // Replay the reduction one step at a time against exhaustive evaluation.
  std::vector<int> kept(set.count());
  std::vector<double> prob = set.probability;
  for (int i = 0; i < set.count(); ++i) kept[i] = i;
  for (int target = set.count() - 1; target >= 3; --target) {
    // Exhaustive: evaluate deletion cost for every kept scenario.
    double best_cost = std::numeric_limits<double>::infinity();
    int best = -1, best_near = -1;
    for (size_t p = 0; p < kept.size(); ++p) {
      double dmin = std::numeric_limits<double>::infinity();
      int nearest = -1;
      for (size_t q = 0; q < kept.size(); ++q) {
        if (p == q) continue;
        double d = scen::scenario_distance(set, kept[p], kept[q]);
        if (d < dmin) {
          dmin = d;
          nearest = kept[q];
        }
      }
      if (prob[kept[p]] * dmin < best_cost - 1e-15) {
        best_cost = prob[kept[p]] * dmin;
        best = static_cast<int>(p);
        best_near = nearest;
      }
    }
    prob[best_near] += prob[kept[best]];
    kept.erase(kept.begin() + best);

    auto red = scen::reduce_scenarios(set, target);
    REQUIRE(red.count() == target);
    for (int i = 0; i < target; ++i) {
      CHECK(red.columns[i] == set.columns[kept[i]]);
      CHECK(red.probability[i] == doctest::Approx(prob[kept[i]]).epsilon(1e-12));
    }
  }
}

TEST_CASE("reduction conserves probability and never invents scenarios") {
  grid::Network net = one_damage_net();
  auto set = scen::sample_scenarios(net, test::toy_uncertainty(13), 20);
  for (int k : {1, 3, 7, 20}) {
    auto red = scen::reduce_scenarios(set, k);
    double total = 0.0;
    for (double p : red.probability) total += p;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
    for (const auto& col : red.columns) {
      bool found = false;
      for (const auto& orig : set.columns) found |= col == orig;
      CHECK(found);
    }
  }
  CHECK_THROWS_AS(scen::reduce_scenarios(set, 21), scen::ScenarioError);
}

TEST_CASE("scenario csv round-trips exactly") {
  grid::Network net = one_damage_net();
  auto set = scen::sample_scenarios(net, test::toy_uncertainty(23), 12);
  auto dir = std::filesystem::temp_directory_path() / "restore_scen_csv";
  scen::save_scenarios(set, dir.string());
  auto back = scen::load_scenarios(dir.string());
  CHECK(back.columns == set.columns);
  CHECK(back.probability == set.probability);
  CHECK(back.damaged_lines == set.damaged_lines);
  CHECK(back.load_count == set.load_count);
  CHECK(back.horizon == set.horizon);
}

TEST_CASE("sampling validates its configuration") {
  grid::Network net = one_damage_net();
  scen::UncertaintyConfig cfg = test::toy_uncertainty(1);
  cfg.error_sigma = -1.0;
  CHECK_THROWS_AS(scen::sample_scenarios(net, cfg, 5), scen::ScenarioError);
  cfg = test::toy_uncertainty(1);
  CHECK_THROWS_AS(scen::sample_scenarios(net, cfg, 0), scen::ScenarioError);
  grid::Network undamaged = test::two_bus();
  CHECK_THROWS_AS(scen::sample_scenarios(undamaged, cfg, 5), scen::ScenarioError);
}
