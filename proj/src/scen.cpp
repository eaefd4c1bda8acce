#include "restore/scen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace restore::scen {

namespace {

// Box-Muller keeps sampling reproducible across standard library
// implementations (std::normal_distribution is not pinned by the standard).
class NormalSampler {
 public:
  explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

  double standard_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double uniform01() {
    // 53-bit mantissa uniform in [0,1).
    return (rng_() >> 11) * (1.0 / 9007199254740992.0);
  }
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

void write_row(std::ostream& os, const std::string& label, const std::vector<double>& vals) {
  os << label;
  char buf[40];
  for (double v : vals) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << ',' << buf;
  }
  os << '\n';
}

std::vector<std::pair<std::string, std::vector<double>>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open " + path);
  std::vector<std::pair<std::string, std::vector<double>>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::getline(ss, cell, ',');
    std::vector<double> vals;
    std::string label = cell;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    rows.push_back({label, std::move(vals)});
  }
  return rows;
}

}  // namespace

double ScenarioSet::mean_repair_hours(int damage) const {
  double m = 0.0;
  for (int s = 0; s < count(); ++s) m += probability[s] * repair_hours(damage, s);
  return m;
}

ScenarioSet sample_scenarios(const grid::Network& net, const UncertaintyConfig& cfg, int n) {
  if (cfg.repair_lognormal_sigma <= 0.0 || cfg.error_sigma <= 0.0)
    throw ScenarioError("sigma parameters must be positive");
  if (!(cfg.error_bound > 0.0 && cfg.error_bound < 1.0))
    throw ScenarioError("error_bound must lie in (0,1)");
  if (cfg.repair_min_hours <= 0.0)
    throw ScenarioError("repair_min_hours must be positive");
  if (n < 1) throw ScenarioError("scenario count must be >= 1");

  ScenarioSet set;
  for (int k : net.damaged_line_indices()) set.damaged_lines.push_back(net.lines[k].id);
  if (set.damaged_lines.empty())
    throw ScenarioError("network has no damaged line to sample repair times for");
  set.load_count = static_cast<int>(net.loads.size());
  set.horizon = net.horizon;

  NormalSampler rng(cfg.rng_seed);
  const int rows = set.row_count();
  for (int s = 0; s < n; ++s) {
    std::vector<double> col(rows);
    for (int d = 0; d < set.damage_count(); ++d) {
      double draw = std::exp(cfg.repair_lognormal_mu +
                             cfg.repair_lognormal_sigma * rng.standard_normal());
      col[d] = std::max(draw, cfg.repair_min_hours);
    }
    for (int i = 0; i < set.load_count; ++i) {
      for (int t = 0; t < set.horizon; ++t) {
        double e = 0.0;
        do {
          e = cfg.error_sigma * rng.standard_normal();
        } while (std::abs(e) > cfg.error_bound);
        col[set.damage_count() + i * set.horizon + t] = e;
      }
    }
    set.columns.push_back(std::move(col));
    set.probability.push_back(1.0 / n);
  }
  return set;
}

double scenario_distance(const ScenarioSet& set, int a, int b) {
  const int d = set.damage_count();
  const double repair_scale = set.horizon > 0 ? 1.0 / set.horizon : 1.0;
  double sum = 0.0;
  for (int v = 0; v < set.row_count(); ++v) {
    double diff = set.columns[a][v] - set.columns[b][v];
    if (v < d) diff *= repair_scale;
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

ScenarioSet reduce_scenarios(const ScenarioSet& set, int k) {
  const int n = set.count();
  if (k < 1 || k > n) throw ScenarioError("reduction target out of range");

  std::vector<int> kept(n);
  for (int i = 0; i < n; ++i) kept[i] = i;
  std::vector<double> prob = set.probability;

  while (static_cast<int>(kept.size()) > k) {
    // Delete the scenario whose removal costs least: prob * dist to the
    // nearest remaining scenario. Ties resolve to the lowest index.
    int best_pos = -1;
    int best_near = -1;
    double best_cost = std::numeric_limits<double>::infinity();
    for (size_t p = 0; p < kept.size(); ++p) {
      double dmin = std::numeric_limits<double>::infinity();
      int nearest = -1;
      for (size_t q = 0; q < kept.size(); ++q) {
        if (p == q) continue;
        double d = scenario_distance(set, kept[p], kept[q]);
        if (d < dmin) {
          dmin = d;
          nearest = kept[q];
        }
      }
      double cost = prob[kept[p]] * dmin;
      if (cost < best_cost - 1e-15) {
        best_cost = cost;
        best_pos = static_cast<int>(p);
        best_near = nearest;
      }
    }
    prob[best_near] += prob[kept[best_pos]];
    kept.erase(kept.begin() + best_pos);
  }

  ScenarioSet out;
  out.damaged_lines = set.damaged_lines;
  out.load_count = set.load_count;
  out.horizon = set.horizon;
  for (int idx : kept) {
    out.columns.push_back(set.columns[idx]);
    out.probability.push_back(prob[idx]);
  }
  return out;
}

std::vector<std::vector<double>> scenario_matrix(const ScenarioSet& set) {
  std::vector<std::vector<double>> m(set.row_count(), std::vector<double>(set.count()));
  for (int v = 0; v < set.row_count(); ++v)
    for (int s = 0; s < set.count(); ++s) m[v][s] = set.columns[s][v];
  return m;
}

void save_scenarios(const ScenarioSet& set, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  std::ofstream rt(fs::path(dir) / "repair_times.csv");
  for (int d = 0; d < set.damage_count(); ++d) {
    std::vector<double> row(set.count());
    for (int s = 0; s < set.count(); ++s) row[s] = set.repair_hours(d, s);
    write_row(rt, set.damaged_lines[d], row);
  }

  std::ofstream er(fs::path(dir) / "errors.csv");
  for (int i = 0; i < set.load_count; ++i) {
    for (int t = 1; t <= set.horizon; ++t) {
      std::vector<double> row(set.count());
      for (int s = 0; s < set.count(); ++s) row[s] = set.error(i, t, s);
      er << "load" << i << "_t" << t;
      char buf[40];
      for (double v : row) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        er << ',' << buf;
      }
      er << '\n';
    }
  }

  std::ofstream pr(fs::path(dir) / "probabilities.csv");
  write_row(pr, "probability", set.probability);
}

ScenarioSet load_scenarios(const std::string& dir) {
  namespace fs = std::filesystem;
  auto rt = read_csv((fs::path(dir) / "repair_times.csv").string());
  auto er = read_csv((fs::path(dir) / "errors.csv").string());
  auto pr = read_csv((fs::path(dir) / "probabilities.csv").string());
  if (rt.empty() || pr.size() != 1)
    throw ScenarioError("scenario directory " + dir + " is incomplete");

  ScenarioSet set;
  const int n = static_cast<int>(rt[0].second.size());
  for (auto& [label, vals] : rt) {
    if (static_cast<int>(vals.size()) != n)
      throw ScenarioError("ragged repair_times.csv");
    set.damaged_lines.push_back(label);
  }
  // Recover load count and horizon from the errors row labels.
  int max_load = -1, max_t = 0;
  for (auto& [label, vals] : er) {
    size_t us = label.rfind("_t");
    if (label.rfind("load", 0) != 0 || us == std::string::npos)
      throw ScenarioError("bad errors.csv row label: " + label);
    max_load = std::max(max_load, std::stoi(label.substr(4, us - 4)));
    max_t = std::max(max_t, std::stoi(label.substr(us + 2)));
  }
  set.load_count = max_load + 1;
  set.horizon = max_t;
  if (static_cast<int>(er.size()) != set.load_count * set.horizon)
    throw ScenarioError("errors.csv row count mismatch");

  set.columns.assign(n, std::vector<double>(set.row_count()));
  for (int d = 0; d < set.damage_count(); ++d)
    for (int s = 0; s < n; ++s) set.columns[s][d] = rt[d].second[s];
  for (int r = 0; r < static_cast<int>(er.size()); ++r)
    for (int s = 0; s < n; ++s) set.columns[s][set.damage_count() + r] = er[r].second[s];
  set.probability = pr[0].second;
  if (static_cast<int>(set.probability.size()) != n)
    throw ScenarioError("probabilities.csv length mismatch");
  return set;
}

}  // namespace restore::scen
