#pragma once

// Naive compaction automaton used as a test oracle. Every relocation rescans the whole
// grid for eligible cells, with no per-column caching.

#include <limits>
#include <optional>
#include <vector>

namespace tapelab::testing {

struct BruteGrid {
  int n_w = 0;
  int n_h = 0;
  double eps_x = 1.0;
  double eps_z = 1.0;
  int plate_row = 0;
  std::vector<std::vector<bool>> cells;  // cells[col][row]

  bool at(int c, int r) const { return r >= 0 && r < n_h && cells[c][r]; }

  int contact() const {
    const int row = plate_row - 1;
    int n = 0;
    for (int c = 0; c < n_w; ++c) n += at(c, row);
    return n;
  }

  int mass() const {
    int n = 0;
    for (int c = 0; c < n_w; ++c)
      for (int r = 0; r < n_h; ++r) n += at(c, r);
    return n;
  }
};

struct BruteOutcome {
  int contact = 0;
  std::optional<int> terminal_cells;
};

inline BruteOutcome brute_step(BruteGrid& g, bool any_air) {
  g.plate_row -= 1;
  const int contact_row = g.plate_row - 1;
  struct Cell {
    int col, row;
  };
  std::vector<Cell> displaced;
  for (int c = 0; c < g.n_w; ++c)
    for (int r = g.n_h - 1; r >= g.plate_row; --r)
      if (g.at(c, r)) displaced.push_back({c, r});

  for (const Cell& cell : displaced) {
    double best = std::numeric_limits<double>::infinity();
    int bc = -1, br = -1;
    for (int c = 0; c < g.n_w; ++c)
      for (int r = 0; r < contact_row; ++r) {
        if (g.at(c, r)) continue;
        if (!any_air && r > 0 && !g.at(c, r - 1)) continue;
        const double dx = (c - cell.col) * g.eps_x;
        const double dz = (cell.row - r) * g.eps_z;
        const double d = dx * dx + dz * dz;
        // Scan order (column, then row ascending) makes strict "<" keep the smallest
        // column and lowest row among ties.
        if (d < best) {
          best = d;
          bc = c;
          br = r;
        }
      }
    if (bc < 0) {
      const int floor_row = contact_row < 0 ? 0 : contact_row;
      int n_c = 0;
      for (int c = 0; c < g.n_w; ++c)
        for (int r = floor_row; r < g.n_h; ++r)
          if (g.at(c, r)) {
            ++n_c;
            g.cells[c][r] = false;
          }
      const int full = n_c / g.n_w, rest = n_c % g.n_w;
      const int plate = floor_row + full + (rest > 0 ? 1 : 0);
      if (plate + 1 > g.n_h) {
        for (auto& col : g.cells) col.resize(plate + 1, false);
        g.n_h = plate + 1;
      }
      for (int k = 0; k < full; ++k)
        for (int c = 0; c < g.n_w; ++c) g.cells[c][floor_row + k] = true;
      for (int c = 0; c < rest; ++c) g.cells[c][floor_row + full] = true;
      g.plate_row = plate;
      return {g.contact(), n_c};
    }
    g.cells[cell.col][cell.row] = false;
    g.cells[bc][br] = true;
  }
  return {g.contact(), std::nullopt};
}

}  // namespace tapelab::testing
