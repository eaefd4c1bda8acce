#pragma once

// Shared test networks and random instance generators.

#include <cstdint>
#include <string>
#include <vector>

#include "restore/grid.hpp"
#include "restore/scen.hpp"

namespace restore::test {

// Substation b1 -- load b2, one line, nothing damaged.
grid::Network two_bus();

// Three buses in a triangle; one loop.
grid::Network triangle();

// Radial chain of n buses rooted at a substation.
grid::Network radial_chain(int n);

// 34-bus fixture: 3 DGs, 2 switch lines, 7 damaged lines, one depot.
grid::Network case34(int horizon = 6);

// Uncertainty parameters used with the 34-bus fixture (short repairs so every
// sampled scenario is repairable within the fixture horizon).
scen::UncertaintyConfig case34_uncertainty();

// Random toy instance for oracle comparisons: <= 8 buses, <= max_damage
// damaged lines, optional tie-switch loop, loads with weights in {1, 10}.
struct ToyInstance {
  grid::Network net;
  int crews = 1;
  std::uint64_t seed = 0;
};
ToyInstance random_toy(std::uint64_t seed, int max_buses = 8, int max_damage = 4,
                       int max_crews = 2);

// Random network with 1..2 tie-switch loops (edge-disjoint) for comparing the
// two radiality formulations.
grid::Network random_loop_network(std::uint64_t seed);

// Scenario configuration used by the random toys.
scen::UncertaintyConfig toy_uncertainty(std::uint64_t seed);

}  // namespace restore::test
