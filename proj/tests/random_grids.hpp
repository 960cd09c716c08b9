#pragma once

#include <random>

#include "brute_force_ca.hpp"
#include "tapelab/compaction.hpp"

namespace tapelab::testing {

struct GridPair {
  CellGrid grid;
  BruteGrid brute;
};

/// Random grid of at most `max_w` x `max_h` cells. Even seeds give profile-like columns,
/// odd seeds scatter loose cells (overhangs, floating material). Spacings are drawn from a
/// small set so that distance ties occur.
inline GridPair random_grid(std::uint64_t seed, int max_w = 20, int max_h = 20) {
  std::mt19937_64 rng(seed);
  const int n_w = std::uniform_int_distribution<int>(1, max_w)(rng);
  const int n_h = std::uniform_int_distribution<int>(3, max_h)(rng);
  const double spacings[] = {0.5, 1.0, 2.0, 3.0};
  const double eps_x = spacings[std::uniform_int_distribution<int>(0, 3)(rng)];
  const double eps_z = spacings[std::uniform_int_distribution<int>(0, 3)(rng)];
  const int plate = std::uniform_int_distribution<int>(2, n_h)(rng);

  GridPair out{CellGrid(n_w, n_h, eps_x, eps_z), BruteGrid{n_w, n_h, eps_x, eps_z, plate, {}}};
  out.brute.cells.assign(static_cast<std::size_t>(n_w), std::vector<bool>(static_cast<std::size_t>(n_h), false));
  const bool loose = seed % 2 == 1;
  std::bernoulli_distribution fill(0.45);
  for (int c = 0; c < n_w; ++c) {
    const int height = std::uniform_int_distribution<int>(1, plate)(rng);
    for (int r = 0; r < plate; ++r) {
      const bool m = loose ? (r == 0 || fill(rng)) : r < height;
      out.brute.cells[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = m;
      if (m) out.grid.set(c, r, true);
    }
  }
  out.grid.set_plate_row(plate);
  return out;
}

}  // namespace tapelab::testing
