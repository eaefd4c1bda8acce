#include "restore/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"

namespace restore::grid {

using nlohmann::json;

int Network::bus_index(const std::string& id) const {
  auto it = bus_idx_.find(id);
  return it == bus_idx_.end() ? -1 : it->second;
}

int Network::line_index(const std::string& id) const {
  auto it = line_idx_.find(id);
  return it == line_idx_.end() ? -1 : it->second;
}

int Network::travel_index(const std::string& node) const {
  auto it = travel_idx_.find(node);
  return it == travel_idx_.end() ? -1 : it->second;
}

double Network::travel_between(const std::string& a, const std::string& b) const {
  int i = travel_index(a);
  int j = travel_index(b);
  if (i < 0 || j < 0) {
    throw NetworkError("travel time requested for unknown node: " +
                       (i < 0 ? a : b));
  }
  return travel_hours[i][j];
}

std::vector<int> Network::damaged_line_indices() const {
  std::vector<int> out;
  for (int k = 0; k < static_cast<int>(lines.size()); ++k) {
    if (lines[k].damaged) out.push_back(k);
  }
  return out;
}

std::vector<int> Network::lines_at_bus(int bus) const {
  std::vector<int> out;
  const std::string& id = buses[bus].id;
  for (int k = 0; k < static_cast<int>(lines.size()); ++k) {
    if (lines[k].from_bus == id || lines[k].to_bus == id) out.push_back(k);
  }
  return out;
}

void Network::rebuild_index() {
  bus_idx_.clear();
  line_idx_.clear();
  travel_idx_.clear();
  for (int i = 0; i < static_cast<int>(buses.size()); ++i) bus_idx_[buses[i].id] = i;
  for (int k = 0; k < static_cast<int>(lines.size()); ++k) line_idx_[lines[k].id] = k;
  for (int v = 0; v < static_cast<int>(travel_nodes.size()); ++v) travel_idx_[travel_nodes[v]] = v;
}

namespace {

void check_cross_references(const Network& net) {
  for (const Line& ln : net.lines) {
    if (net.bus_index(ln.from_bus) < 0)
      throw NetworkError("line " + ln.id + " references unknown bus " + ln.from_bus);
    if (net.bus_index(ln.to_bus) < 0)
      throw NetworkError("line " + ln.id + " references unknown bus " + ln.to_bus);
  }
  for (const Dg& dg : net.dgs) {
    if (net.bus_index(dg.bus) < 0)
      throw NetworkError("dg references unknown bus " + dg.bus);
  }
  for (const Load& ld : net.loads) {
    if (net.bus_index(ld.bus) < 0)
      throw NetworkError("load references unknown bus " + ld.bus);
  }
}

}  // namespace

Network load_network(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError("cannot open network file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw NetworkError("malformed network file " + path + ": " + e.what());
  }

  Network net;
  bool explicit_y0 = true;
  try {
    for (const auto& jb : j.at("buses")) {
      Bus b;
      b.id = jb.at("id").get<std::string>();
      b.is_substation = jb.value("is_substation", false);
      b.has_dg = jb.value("has_dg", false);
      net.buses.push_back(std::move(b));
    }
    for (const auto& jl : j.at("lines")) {
      Line ln;
      ln.id = jl.at("id").get<std::string>();
      ln.from_bus = jl.at("from").get<std::string>();
      ln.to_bus = jl.at("to").get<std::string>();
      ln.resistance = jl.at("r").get<double>();
      ln.reactance = jl.at("x").get<double>();
      ln.p_max = jl.at("p_max").get<double>();
      ln.q_max = jl.at("q_max").get<double>();
      ln.has_switch = jl.value("switch", false);
      ln.damaged = jl.value("damaged", false);
      net.lines.push_back(std::move(ln));
    }
    for (const auto& jd : j.value("dgs", json::array())) {
      Dg dg;
      dg.bus = jd.at("bus").get<std::string>();
      dg.p_max_kw = jd.at("p_max_kw").get<double>();
      dg.q_max_kvar = jd.at("q_max_kvar").get<double>();
      net.dgs.push_back(std::move(dg));
    }
    for (const auto& jl : j.value("loads", json::array())) {
      Load ld;
      ld.bus = jl.at("bus").get<std::string>();
      ld.forecast_p_kw = jl.at("forecast_p_kw").get<std::vector<double>>();
      ld.forecast_q_kvar = jl.at("forecast_q_kvar").get<std::vector<double>>();
      ld.weight = jl.at("weight").get<double>();
      ld.undiversified_ratio = jl.value("undiversified_ratio", 1.0);
      if (jl.contains("initially_energized")) {
        ld.initially_energized = jl.at("initially_energized").get<bool>();
      } else {
        explicit_y0 = false;  // resolved below from topology
      }
      net.loads.push_back(std::move(ld));
    }
    net.depot = j.at("depot").get<std::string>();
    net.horizon = j.at("horizon_hours").get<int>();
    net.clpu_steps = j.at("clpu_steps").get<int>();
    net.v_ref = j.value("v_ref", 1.0);
    net.v_epsilon = j.value("v_epsilon", 0.05);

    const auto& jt = j.at("travel_minutes");
    net.travel_nodes = jt.at("nodes").get<std::vector<std::string>>();
    for (const auto& row : jt.at("matrix")) {
      std::vector<double> r;
      for (const auto& v : row) r.push_back(v.get<double>() / 60.0);
      net.travel_hours.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw NetworkError("malformed network file " + path + ": " + e.what());
  }

  net.rebuild_index();
  check_cross_references(net);

  // Fill defaults that depend on cross-referenced data.
  if (!explicit_y0 && !net.loads.empty()) {
    std::vector<bool> y0 = initial_energization(net);
    const auto& jloads = j.value("loads", json::array());
    for (size_t i = 0; i < net.loads.size(); ++i) {
      if (!jloads[i].contains("initially_energized"))
        net.loads[i].initially_energized = y0[i];
    }
  }
  for (const Dg& dg : net.dgs) net.buses[net.bus_index(dg.bus)].has_dg = true;

  std::vector<Diagnostic> diags = validate(net);
  if (!diags.empty()) {
    std::ostringstream os;
    os << "network file " << path << " violates invariants:";
    for (const Diagnostic& d : diags) os << "\n  [" << d.code << "] " << d.message;
    throw NetworkError(os.str());
  }
  return net;
}

void save_network(const Network& net, const std::string& path) {
  json j;
  j["buses"] = json::array();
  for (const Bus& b : net.buses) {
    j["buses"].push_back({{"id", b.id},
                          {"is_substation", b.is_substation},
                          {"has_dg", b.has_dg}});
  }
  j["lines"] = json::array();
  for (const Line& ln : net.lines) {
    j["lines"].push_back({{"id", ln.id},
                          {"from", ln.from_bus},
                          {"to", ln.to_bus},
                          {"r", ln.resistance},
                          {"x", ln.reactance},
                          {"p_max", ln.p_max},
                          {"q_max", ln.q_max},
                          {"switch", ln.has_switch},
                          {"damaged", ln.damaged}});
  }
  j["dgs"] = json::array();
  for (const Dg& dg : net.dgs) {
    j["dgs"].push_back({{"bus", dg.bus},
                        {"p_max_kw", dg.p_max_kw},
                        {"q_max_kvar", dg.q_max_kvar}});
  }
  j["loads"] = json::array();
  for (const Load& ld : net.loads) {
    j["loads"].push_back({{"bus", ld.bus},
                          {"forecast_p_kw", ld.forecast_p_kw},
                          {"forecast_q_kvar", ld.forecast_q_kvar},
                          {"weight", ld.weight},
                          {"undiversified_ratio", ld.undiversified_ratio},
                          {"initially_energized", ld.initially_energized}});
  }
  j["depot"] = net.depot;
  j["horizon_hours"] = net.horizon;
  j["clpu_steps"] = net.clpu_steps;
  j["v_ref"] = net.v_ref;
  j["v_epsilon"] = net.v_epsilon;
  json jt;
  jt["nodes"] = net.travel_nodes;
  jt["matrix"] = json::array();
  for (const auto& row : net.travel_hours) {
    json r = json::array();
    for (double h : row) r.push_back(h * 60.0);
    jt["matrix"].push_back(r);
  }
  j["travel_minutes"] = jt;

  std::ofstream out(path);
  if (!out) throw NetworkError("cannot write network file: " + path);
  out << j.dump(2) << "\n";
}

std::vector<Diagnostic> validate(const Network& net) {
  std::vector<Diagnostic> diags;
  auto add = [&](const std::string& code, const std::string& el, const std::string& msg) {
    diags.push_back({code, el, msg});
  };

  std::set<std::string> seen_bus;
  for (const Bus& b : net.buses) {
    if (!seen_bus.insert(b.id).second)
      add("duplicate-bus", b.id, "bus id " + b.id + " appears more than once");
  }
  if (std::none_of(net.buses.begin(), net.buses.end(),
                   [](const Bus& b) { return b.is_substation; }))
    add("no-substation", "", "network has no substation bus");

  std::set<std::string> seen_line;
  for (const Line& ln : net.lines) {
    if (!seen_line.insert(ln.id).second)
      add("duplicate-line", ln.id, "line id " + ln.id + " appears more than once");
    if (ln.resistance < 0.0)
      add("negative-resistance", ln.id, "line " + ln.id + " has R < 0");
    if (ln.reactance < 0.0)
      add("negative-reactance", ln.id, "line " + ln.id + " has X < 0");
    if (ln.p_max <= 0.0)
      add("nonpositive-p-limit", ln.id, "line " + ln.id + " has p_max <= 0");
    if (ln.q_max <= 0.0)
      add("nonpositive-q-limit", ln.id, "line " + ln.id + " has q_max <= 0");
    if (ln.from_bus == ln.to_bus)
      add("self-loop", ln.id, "line " + ln.id + " connects a bus to itself");
  }
  for (const Dg& dg : net.dgs) {
    if (dg.p_max_kw < 0.0 || dg.q_max_kvar < 0.0)
      add("negative-dg-limit", dg.bus, "dg at " + dg.bus + " has a negative limit");
  }
  for (size_t i = 0; i < net.loads.size(); ++i) {
    const Load& ld = net.loads[i];
    const std::string tag = "load@" + ld.bus;
    if (static_cast<int>(ld.forecast_p_kw.size()) != net.horizon ||
        static_cast<int>(ld.forecast_q_kvar.size()) != net.horizon)
      add("forecast-length", tag, "forecast series length differs from horizon");
    if (ld.weight <= 0.0) add("nonpositive-weight", tag, "load weight must be > 0");
    if (ld.undiversified_ratio < 0.0)
      add("negative-clpu-ratio", tag, "undiversified_ratio must be >= 0");
  }
  if (!(net.v_epsilon > 0.0 && net.v_epsilon < 1.0))
    add("voltage-band", "", "v_epsilon must lie in (0,1)");
  if (net.clpu_steps < 0) add("negative-clpu-steps", "", "clpu_steps must be >= 0");
  if (net.horizon < 1) add("empty-horizon", "", "horizon must be >= 1 hour");

  // Travel matrix: square, symmetric, zero diagonal, covers depot + damages.
  size_t tn = net.travel_nodes.size();
  if (net.travel_hours.size() != tn) {
    add("travel-shape", "", "travel matrix row count differs from node count");
  } else {
    for (size_t i = 0; i < tn; ++i) {
      if (net.travel_hours[i].size() != tn) {
        add("travel-shape", net.travel_nodes[i], "travel matrix is not square");
        continue;
      }
      if (std::abs(net.travel_hours[i][i]) > 0.0)
        add("travel-diagonal", net.travel_nodes[i], "travel time to self must be zero");
      for (size_t j = i + 1; j < tn; ++j) {
        if (net.travel_hours[j].size() != tn) continue;
        if (std::abs(net.travel_hours[i][j] - net.travel_hours[j][i]) > 1e-12)
          add("travel-asymmetry", net.travel_nodes[i] + "/" + net.travel_nodes[j],
              "travel time between " + net.travel_nodes[i] + " and " +
                  net.travel_nodes[j] + " is not symmetric");
      }
    }
  }
  if (net.travel_index(net.depot) < 0)
    add("travel-missing-depot", net.depot, "depot missing from travel matrix");
  for (const Line& ln : net.lines) {
    if (ln.damaged && net.travel_index(ln.id) < 0)
      add("travel-missing-damage", ln.id,
          "damaged line " + ln.id + " missing from travel matrix");
  }
  return diags;
}

std::vector<std::vector<std::string>> find_loops(const Network& net) {
  const int nb = static_cast<int>(net.buses.size());
  const int nl = static_cast<int>(net.lines.size());

  // Adjacency over the closed topology (multigraph: parallel lines allowed).
  std::vector<std::vector<std::pair<int, int>>> adj(nb);  // (neighbor bus, line)
  for (int k = 0; k < nl; ++k) {
    int a = net.bus_index(net.lines[k].from_bus);
    int b = net.bus_index(net.lines[k].to_bus);
    adj[a].push_back({b, k});
    adj[b].push_back({a, k});
  }

  std::vector<int> parent_bus(nb, -1), parent_line(nb, -1), depth(nb, -1);
  std::vector<bool> in_tree(nl, false);
  std::vector<int> chords;

  for (int root = 0; root < nb; ++root) {
    if (depth[root] >= 0) continue;
    depth[root] = 0;
    std::vector<int> stack = {root};
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (auto [w, k] : adj[v]) {
        if (k == parent_line[v]) continue;
        if (depth[w] < 0) {
          depth[w] = depth[v] + 1;
          parent_bus[w] = v;
          parent_line[w] = k;
          in_tree[k] = true;
          stack.push_back(w);
        } else if (!in_tree[k]) {
          // Chord: record once (each non-tree edge is seen from both ends).
          if (std::find(chords.begin(), chords.end(), k) == chords.end())
            chords.push_back(k);
        }
      }
    }
  }

  std::vector<std::vector<std::string>> loops;
  for (int k : chords) {
    int a = net.bus_index(net.lines[k].from_bus);
    int b = net.bus_index(net.lines[k].to_bus);
    std::vector<std::string> cyc = {net.lines[k].id};
    // Walk both endpoints up to their common ancestor.
    int x = a, y = b;
    while (depth[x] > depth[y]) {
      cyc.push_back(net.lines[parent_line[x]].id);
      x = parent_bus[x];
    }
    while (depth[y] > depth[x]) {
      cyc.push_back(net.lines[parent_line[y]].id);
      y = parent_bus[y];
    }
    while (x != y) {
      cyc.push_back(net.lines[parent_line[x]].id);
      cyc.push_back(net.lines[parent_line[y]].id);
      x = parent_bus[x];
      y = parent_bus[y];
    }
    std::sort(cyc.begin(), cyc.end());
    loops.push_back(std::move(cyc));
  }
  std::sort(loops.begin(), loops.end());
  return loops;
}

std::vector<bool> initial_energization(const Network& net) {
  const int nb = static_cast<int>(net.buses.size());
  std::vector<std::vector<int>> adj(nb);
  for (const Line& ln : net.lines) {
    if (ln.damaged || ln.has_switch) continue;
    int a = net.bus_index(ln.from_bus);
    int b = net.bus_index(ln.to_bus);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<bool> reach(nb, false);
  std::vector<int> stack;
  for (int i = 0; i < nb; ++i) {
    if (net.buses[i].is_substation) {
      reach[i] = true;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    for (int w : adj[v]) {
      if (!reach[w]) {
        reach[w] = true;
        stack.push_back(w);
      }
    }
  }
  std::vector<bool> out(net.loads.size());
  for (size_t i = 0; i < net.loads.size(); ++i)
    out[i] = reach[net.bus_index(net.loads[i].bus)];
  return out;
}

}  // namespace restore::grid
