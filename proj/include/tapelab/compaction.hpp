#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tapelab/profile.hpp"

namespace tapelab {

using Index = Eigen::Index;

/// Which air cells a displaced material cell may move into.
enum class Eligibility {
  /// Air cells below the contact row that rest on material or on the floor.
  kSupported,
  /// Any air cell below the contact row.
  kAnyAir,
};

struct CompactionOptions {
  Index base_rows = 2;                  // solid rows under the lowest profile point
  Eligibility eligibility = Eligibility::kSupported;
  std::size_t max_cells = std::size_t{1} << 28;
  bool check_mass = false;              // recount material after every step (slow)
};

/// Two-state cell field under a rigid plate. Row 0 is the floor; the plate occupies
/// rows >= plate_row, so row plate_row - 1 is the contact row.
class CellGrid {
 public:
  CellGrid() = default;
  CellGrid(Index n_w, Index n_h, double eps_x, double eps_z);

  Index n_w() const { return n_w_; }
  Index n_h() const { return n_h_; }
  double eps_x() const { return eps_x_; }
  double eps_z() const { return eps_z_; }
  Index plate_row() const { return plate_row_; }
  Index material_count() const { return material_count_; }

  bool material(Index col, Index row) const {
    return cells_[static_cast<std::size_t>(col * n_h_ + row)] != 0;
  }
  void set(Index col, Index row, bool is_material);
  void set_plate_row(Index row);

  /// Adds rows of air on top.
  void grow_rows(Index n_h);

  /// Columns whose contact-row cell is material.
  Index contact_count() const;

  /// Full recount of material cells (for invariant checks).
  Index count_material() const;

  /// Height of the contiguous material column starting at the floor.
  Index column_height(Index col) const;

 private:
  Index n_w_ = 0;
  Index n_h_ = 0;
  double eps_x_ = 1.0;
  double eps_z_ = 1.0;
  Index plate_row_ = 0;
  Index material_count_ = 0;
  std::vector<std::uint8_t> cells_;  // column-major
};

struct StepOutcome {
  Index contact = 0;                     // columns in contact after the step
  std::optional<Index> terminal_cells;   // N_c when no eligible air cell remained

  bool terminal() const { return terminal_cells.has_value(); }
};

/// DIC plateau left by a run that ran out of air: frac(N_c / N_w).
double artifact_plateau(Index terminal_cells, Index n_w);

/// Column i holds base_rows + round((h_i - min h) / eps_z) cells; the plate starts on
/// top of the tallest column.
CellGrid rasterize(const RoughnessProfile& profile, double eps_z,
                   const CompactionOptions& options = {});

/// Steps a grid repeatedly, caching the highest eligible air cell of each column.
///
/// One step lowers the plate by one row. Material cells caught at or above the plate are
/// visited column-ascending then row-descending and each moves to the closest eligible
/// air cell strictly below the new contact row; distance is Euclidean in physical units,
/// ties go to the smaller column, then the lower row. If a displaced cell finds no
/// target the run is terminal: the N_c cells in the contact row and above are stacked
/// into full rows plus a partial row, and the step reports N_c.
class Compactor {
 public:
  Compactor(CellGrid grid, Eligibility eligibility);

  StepOutcome step();

  const CellGrid& grid() const { return grid_; }
  bool terminated() const { return terminal_cells_.has_value(); }

 private:
  bool eligible(Index col, Index row) const;
  Index scan_down(Index col, Index from) const;
  void settle(Index contact_row);

  CellGrid grid_;
  Eligibility eligibility_;
  std::vector<Index> best_;  // highest eligible row per column, -1 when none
  std::optional<Index> terminal_cells_;
};

/// Single step on a bare grid (rebuilds the per-column cache every call).
StepOutcome step(CellGrid& grid, Eligibility eligibility = Eligibility::kSupported);

enum class DicStage { kRaw, kCorrected, kSmoothed };

std::string to_string(DicStage stage);
DicStage parse_dic_stage(const std::string& text);

/// DIC time series. values[0] is the initial contact, values[k] the contact after step k.
struct DicCurve {
  std::string id;
  Eigen::VectorXd values;
  DicStage stage = DicStage::kRaw;
  double eps_z = 0.0;
  std::optional<double> artifact_value;
};

struct SimulationTrace {
  DicCurve raw;
  Index n_w = 0;
  Index material_count = 0;
  Index steps_run = 0;                   // steps executed before stopping
  std::optional<Index> terminal_cells;   // N_c
  bool mass_conserved = true;            // only meaningful with check_mass
};

SimulationTrace simulate_trace(const RoughnessProfile& profile, double eps_z, Index horizon,
                               const CompactionOptions& options = {});

/// Raw DIC curve of length `horizon`, padded with the terminal plateau.
DicCurve simulate(const RoughnessProfile& profile, double eps_z, Index horizon,
                  const CompactionOptions& options = {});

/// Replaces the trailing run of artifact samples by 1.
DicCurve correct(const DicCurve& raw);

/// Centered moving average; windows are truncated at the ends.
DicCurve smooth(const DicCurve& corrected, Index window = 5);

/// Runs a batch on `jobs` workers. Output order follows input order.
std::vector<SimulationTrace> simulate_batch(std::span<const RoughnessProfile> profiles,
                                            double eps_z, Index horizon,
                                            const CompactionOptions& options, unsigned jobs);

}  // namespace tapelab
