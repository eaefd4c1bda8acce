#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace restore::grid {

// Power base used to convert kW/kvar input data onto the per-unit
// line and voltage model (1 MVA).
inline constexpr double kPowerBaseKw = 1000.0;

struct Bus {
  std::string id;
  bool is_substation = false;
  bool has_dg = false;
};

struct Line {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double resistance = 0.0;  // p.u.
  double reactance = 0.0;   // p.u.
  double p_max = 0.0;       // p.u.
  double q_max = 0.0;       // p.u.
  bool has_switch = false;
  bool damaged = false;
};

struct Dg {
  std::string bus;
  double p_max_kw = 0.0;
  double q_max_kvar = 0.0;
};

struct Load {
  std::string bus;
  std::vector<double> forecast_p_kw;    // one entry per hour, size = horizon
  std::vector<double> forecast_q_kvar;  // same length
  double weight = 1.0;
  double undiversified_ratio = 1.0;     // maps diversified to undiversified demand
  bool initially_energized = false;
};

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Network {
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Dg> dgs;
  std::vector<Load> loads;
  std::string depot;

  // Travel time in hours between routing nodes: depot plus every damaged line.
  std::vector<std::string> travel_nodes;
  std::vector<std::vector<double>> travel_hours;

  double v_ref = 1.0;
  double v_epsilon = 0.05;
  int horizon = 0;     // number of one-hour steps
  int clpu_steps = 0;  // steps a load needs to return to diversified demand

  int bus_index(const std::string& id) const;
  int line_index(const std::string& id) const;
  int travel_index(const std::string& node) const;
  double travel_between(const std::string& a, const std::string& b) const;
  std::vector<int> damaged_line_indices() const;
  std::vector<int> lines_at_bus(int bus) const;

  // Rebuilds the internal id lookup tables; call after mutating members.
  void rebuild_index();

 private:
  std::unordered_map<std::string, int> bus_idx_;
  std::unordered_map<std::string, int> line_idx_;
  std::unordered_map<std::string, int> travel_idx_;
};

struct Diagnostic {
  std::string code;     // short invariant tag, e.g. "voltage-band"
  std::string element;  // offending element id, may be empty
  std::string message;
};

// Parses and validates a network file. Throws NetworkError on malformed
// input, dangling references, or invariant violations.
Network load_network(const std::string& path);

// Writes the canonical form of a network; load_network(save_network(n)) == n.
void save_network(const Network& net, const std::string& path);

// Returns one diagnostic per violated invariant; empty means valid.
std::vector<Diagnostic> validate(const Network& net);

// Independent cycles of the closed topology (all switches closed, all damage
// repaired), one sorted set of line ids per cycle. The count equals
// |lines| - |buses| + connected components.
std::vector<std::vector<std::string>> find_loops(const Network& net);

// Default initial energization per load: reachable from a substation through
// undamaged non-switch lines (tie switches are treated as open pre-event).
std::vector<bool> initial_energization(const Network& net);

}  // namespace restore::grid
