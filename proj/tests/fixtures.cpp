#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace restore::test {

using grid::Bus;
using grid::Dg;
using grid::Line;
using grid::Load;
using grid::Network;

namespace {

Line make_line(const std::string& id, const std::string& a, const std::string& b,
               double r, double x, double pmax, double qmax, bool sw = false,
               bool damaged = false) {
  Line ln;
  ln.id = id;
  ln.from_bus = a;
  ln.to_bus = b;
  ln.resistance = r;
  ln.reactance = x;
  ln.p_max = pmax;
  ln.q_max = qmax;
  ln.has_switch = sw;
  ln.damaged = damaged;
  return ln;
}

Load make_load(const std::string& bus, std::vector<double> p, double weight,
               bool energized) {
  Load ld;
  ld.bus = bus;
  ld.forecast_p_kw = p;
  ld.forecast_q_kvar.resize(p.size());
  for (size_t i = 0; i < p.size(); ++i) ld.forecast_q_kvar[i] = 0.4 * p[i];
  ld.weight = weight;
  ld.undiversified_ratio = 1.0;
  ld.initially_energized = energized;
  return ld;
}

// Fills the travel matrix for {depot} + damaged lines with fixed minutes.
void build_travel(Network* net, double base_minutes = 18.0, double spread = 9.0) {
  net->travel_nodes.clear();
  net->travel_nodes.push_back(net->depot);
  for (const Line& ln : net->lines)
    if (ln.damaged) net->travel_nodes.push_back(ln.id);
  int n = static_cast<int>(net->travel_nodes.size());
  net->travel_hours.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double minutes = base_minutes + spread * (((i * 7 + j * 3) % 5) / 4.0);
      net->travel_hours[i][j] = net->travel_hours[j][i] = minutes / 60.0;
    }
  }
}

}  // namespace

Network two_bus() {
  Network net;
  net.buses = {{"b1", true, false}, {"b2", false, false}};
  net.lines = {make_line("l1", "b1", "b2", 0.01, 0.02, 1.0, 1.0)};
  net.loads = {make_load("b2", {50.0, 50.0, 50.0, 50.0}, 1.0, true)};
  net.depot = "depot";
  net.horizon = 4;
  net.clpu_steps = 1;
  net.travel_nodes = {"depot"};
  net.travel_hours = {{0.0}};
  net.rebuild_index();
  return net;
}

Network triangle() {
  Network net;
  net.buses = {{"a", true, false}, {"b", false, false}, {"c", false, false}};
  net.lines = {make_line("ab", "a", "b", 0.01, 0.02, 1.0, 1.0),
               make_line("bc", "b", "c", 0.01, 0.02, 1.0, 1.0, true),
               make_line("ca", "c", "a", 0.01, 0.02, 1.0, 1.0)};
  net.loads = {make_load("c", {30.0, 30.0}, 1.0, true)};
  net.depot = "depot";
  net.horizon = 2;
  net.clpu_steps = 0;
  net.travel_nodes = {"depot"};
  net.travel_hours = {{0.0}};
  net.rebuild_index();
  return net;
}

Network radial_chain(int n) {
  Network net;
  for (int i = 1; i <= n; ++i) net.buses.push_back({"b" + std::to_string(i), i == 1, false});
  for (int i = 1; i < n; ++i)
    net.lines.push_back(make_line("l" + std::to_string(i), "b" + std::to_string(i),
                                  "b" + std::to_string(i + 1), 0.005, 0.01, 1.0, 1.0));
  net.depot = "depot";
  net.horizon = 4;
  net.clpu_steps = 1;
  net.travel_nodes = {"depot"};
  net.travel_hours = {{0.0}};
  net.rebuild_index();
  return net;
}

Network case34(int horizon) {
  Network net;
  for (int i = 1; i <= 34; ++i)
    net.buses.push_back({"b" + std::to_string(i), i == 1, false});
  auto bus = [](int i) { return "b" + std::to_string(i); };
  auto line_id = [](int a, int b) {
    return "l" + std::to_string(a) + "-" + std::to_string(b);
  };
  auto add = [&](int a, int b, double pmax, bool sw = false, bool dam = false) {
    net.lines.push_back(
        make_line(line_id(a, b), bus(a), bus(b), 0.003, 0.006, pmax, pmax, sw, dam));
  };

  const std::vector<int> damaged_from = {5, 7, 9, 12, 17};
  // Main feeder b1..b19.
  for (int i = 1; i < 19; ++i) {
    bool dam = std::find(damaged_from.begin(), damaged_from.end(), i) != damaged_from.end();
    add(i, i + 1, 1.5, false, dam);
  }
  // Branch A from b4: b20..b23 (line 4-20 damaged).
  add(4, 20, 0.8, false, true);
  add(20, 21, 0.8);
  add(21, 22, 0.8);
  add(22, 23, 0.8);
  // Branch B from b15: b24..b27.
  add(15, 24, 0.8);
  add(24, 25, 0.8);
  add(25, 26, 0.8);
  add(26, 27, 0.8);
  // Branch C fed from b19: b28..b34 (line 31-32 damaged).
  add(19, 28, 0.8);
  add(28, 29, 0.8);
  add(29, 30, 0.8);
  add(30, 31, 0.8);
  add(31, 32, 0.8, false, true);
  add(32, 33, 0.8);
  add(33, 34, 0.8);
  // Tie switches 7-21 and 24-28.
  add(7, 21, 0.8, true);
  add(24, 28, 0.8, true);

  net.dgs = {{"b20", 150.0, 100.0}, {"b28", 150.0, 100.0}, {"b31", 150.0, 100.0}};

  // Overnight-to-morning demand shape.
  std::vector<double> shape = {0.55, 0.50, 0.48, 0.52, 0.58, 0.66, 0.80, 0.92,
                               1.00, 0.97, 0.94, 0.90};
  auto series = [&](double base) {
    std::vector<double> p(horizon);
    for (int t = 0; t < horizon; ++t) p[t] = base * shape[t % shape.size()];
    return p;
  };
  struct Spec {
    int bus;
    double base;
    double weight;
  };
  const std::vector<Spec> load_specs = {{3, 60, 1},  {8, 55, 1},  {10, 50, 1}, {11, 65, 10},
                                        {16, 60, 10}, {18, 45, 1}, {20, 70, 1}, {24, 55, 1},
                                        {28, 50, 1}, {30, 45, 1}, {32, 65, 10}, {34, 40, 1}};
  for (const Spec& s : load_specs)
    net.loads.push_back(make_load(bus(s.bus), series(s.base), s.weight, false));

  net.depot = "depot";
  net.horizon = horizon;
  net.clpu_steps = 1;
  net.v_ref = 1.0;
  net.v_epsilon = 0.05;
  build_travel(&net, 15.0, 15.0);
  net.rebuild_index();
  for (const Dg& dg : net.dgs) net.buses[net.bus_index(dg.bus)].has_dg = true;
  std::vector<bool> y0 = grid::initial_energization(net);
  for (size_t i = 0; i < net.loads.size(); ++i) net.loads[i].initially_energized = y0[i];
  return net;
}

scen::UncertaintyConfig case34_uncertainty() {
  scen::UncertaintyConfig cfg;
  cfg.repair_lognormal_mu = std::log(0.9);
  cfg.repair_lognormal_sigma = 0.12;
  cfg.repair_min_hours = 0.5;
  cfg.error_sigma = 0.05;
  cfg.error_bound = 0.15;
  cfg.rng_seed = 20240501;
  return cfg;
}

ToyInstance random_toy(std::uint64_t seed, int max_buses, int max_damage, int max_crews) {
  std::mt19937_64 rng(seed * 2654435761ULL + 17);
  auto uniform_int = [&](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * ((rng() >> 11) * (1.0 / 9007199254740992.0));
  };

  ToyInstance toy;
  toy.seed = seed;
  Network& net = toy.net;
  int nb = uniform_int(4, max_buses);
  for (int i = 1; i <= nb; ++i)
    net.buses.push_back({"b" + std::to_string(i), i == 1, false});

  // Random spanning tree over buses 2..nb.
  std::vector<std::pair<int, int>> tree_edges;
  for (int i = 2; i <= nb; ++i) {
    int parent = uniform_int(1, i - 1);
    tree_edges.push_back({parent, i});
  }
  int lid = 0;
  for (auto [a, b] : tree_edges) {
    net.lines.push_back(make_line("l" + std::to_string(++lid), "b" + std::to_string(a),
                                  "b" + std::to_string(b), uniform(0.002, 0.006),
                                  uniform(0.004, 0.012), uniform(0.6, 1.2),
                                  uniform(0.6, 1.2)));
  }
  // Optional tie switch closing one loop.
  if (nb >= 4 && uniform_int(0, 1) == 1) {
    int a = uniform_int(1, nb - 1);
    int b = uniform_int(a + 1, nb);
    bool exists = false;
    for (const Line& ln : net.lines)
      if ((ln.from_bus == "b" + std::to_string(a) && ln.to_bus == "b" + std::to_string(b)) ||
          (ln.from_bus == "b" + std::to_string(b) && ln.to_bus == "b" + std::to_string(a)))
        exists = true;
    if (!exists && a != b)
      net.lines.push_back(make_line("sw" + std::to_string(++lid), "b" + std::to_string(a),
                                    "b" + std::to_string(b), 0.004, 0.008, 0.8, 0.8, true));
  }

  // Damage: random tree lines, at least one.
  int tree_count = static_cast<int>(tree_edges.size());
  int dmg = std::min(uniform_int(1, max_damage), tree_count);
  std::vector<int> idx(tree_count);
  for (int i = 0; i < tree_count; ++i) idx[i] = i;
  for (int i = tree_count - 1; i > 0; --i) std::swap(idx[i], idx[uniform_int(0, i)]);
  for (int i = 0; i < dmg; ++i) net.lines[idx[i]].damaged = true;

  // DG on a random non-substation bus, half the time.
  if (uniform_int(0, 1) == 1) {
    std::string dg_bus = "b" + std::to_string(uniform_int(2, nb));
    net.dgs.push_back({dg_bus, uniform(60.0, 140.0), uniform(40.0, 90.0)});
  }

  int horizon = uniform_int(8, 12);
  net.horizon = horizon;
  int loads = std::max(1, nb - uniform_int(2, 3));
  std::vector<int> lb_idx(nb - 1);
  for (int i = 0; i < nb - 1; ++i) lb_idx[i] = i + 2;
  for (int i = nb - 2; i > 0; --i) std::swap(lb_idx[i], lb_idx[uniform_int(0, i)]);
  for (int i = 0; i < loads && i < static_cast<int>(lb_idx.size()); ++i) {
    double base = uniform(30.0, 90.0);
    std::vector<double> p(horizon);
    for (int t = 0; t < horizon; ++t) p[t] = base * uniform(0.8, 1.1);
    double weight = uniform_int(0, 3) == 0 ? 10.0 : 1.0;
    net.loads.push_back(make_load("b" + std::to_string(lb_idx[i]), p, weight, false));
  }

  net.depot = "depot";
  net.clpu_steps = uniform_int(0, 2);
  net.v_ref = 1.0;
  net.v_epsilon = 0.05;
  build_travel(&net, uniform(12.0, 20.0), uniform(6.0, 14.0));
  net.rebuild_index();
  std::vector<bool> y0 = grid::initial_energization(net);
  for (size_t i = 0; i < net.loads.size(); ++i) net.loads[i].initially_energized = y0[i];

  toy.crews = uniform_int(1, max_crews);
  return toy;
}

grid::Network random_loop_network(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 11400714819323198485ULL + 3);
  auto uniform_int = [&](int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
  };
  Network net;
  int nb = uniform_int(5, 8);
  for (int i = 1; i <= nb; ++i)
    net.buses.push_back({"b" + std::to_string(i), i == 1, false});
  int lid = 0;
  // Chain backbone keeps the loop structure easy to control.
  for (int i = 1; i < nb; ++i)
    net.lines.push_back(make_line("l" + std::to_string(++lid), "b" + std::to_string(i),
                                  "b" + std::to_string(i + 1), 0.004, 0.008, 1.0, 1.0));
  // One or two edge-disjoint tie switches across chain segments.
  int loops = uniform_int(1, 2);
  int half = nb / 2;
  net.lines.push_back(make_line("sw1", "b1", "b" + std::to_string(half + 1), 0.004,
                                0.008, 0.9, 0.9, true));
  if (loops == 2 && half + 2 <= nb) {
    net.lines.push_back(make_line("sw2", "b" + std::to_string(half + 1),
                                  "b" + std::to_string(nb), 0.004, 0.008, 0.9, 0.9,
                                  true));
  }
  // Damage one chain line inside the first loop.
  net.lines[uniform_int(0, half - 1)].damaged = true;

  int horizon = 6;
  net.horizon = horizon;
  for (int i = 2; i <= nb; i += 2) {
    std::vector<double> p(horizon, 40.0 + 5.0 * i);
    grid::Load ld = make_load("b" + std::to_string(i), p, i % 4 == 0 ? 10.0 : 1.0, false);
    net.loads.push_back(ld);
  }
  net.depot = "depot";
  net.clpu_steps = 1;
  build_travel(&net);
  net.rebuild_index();
  std::vector<bool> y0 = grid::initial_energization(net);
  for (size_t i = 0; i < net.loads.size(); ++i) net.loads[i].initially_energized = y0[i];
  return net;
}

scen::UncertaintyConfig toy_uncertainty(std::uint64_t seed) {
  scen::UncertaintyConfig cfg;
  cfg.repair_lognormal_mu = std::log(0.7);
  cfg.repair_lognormal_sigma = 0.25;
  cfg.repair_min_hours = 0.5;
  cfg.error_sigma = 0.05;
  cfg.error_bound = 0.15;
  cfg.rng_seed = seed;
  return cfg;
}

}  // namespace restore::test
