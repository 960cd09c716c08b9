#include "tapelab/compaction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tapelab/parallel.hpp"

namespace tapelab {

CellGrid::CellGrid(Index n_w, Index n_h, double eps_x, double eps_z)
    : n_w_(n_w), n_h_(n_h), eps_x_(eps_x), eps_z_(eps_z), plate_row_(n_h) {
  if (n_w < 1 || n_h < 1) throw InvalidArgument("CellGrid: empty grid");
  if (!(eps_x > 0) || !(eps_z > 0)) throw InvalidArgument("CellGrid: cell sizes must be positive");
  cells_.assign(static_cast<std::size_t>(n_w * n_h), 0);
}

void CellGrid::set(Index col, Index row, bool is_material) {
  auto& cell = cells_[static_cast<std::size_t>(col * n_h_ + row)];
  material_count_ += static_cast<Index>(is_material) - static_cast<Index>(cell);
  cell = is_material ? 1 : 0;
}

void CellGrid::set_plate_row(Index row) {
  if (row < 0 || row > n_h_) throw InvalidArgument("CellGrid: plate row out of range");
  plate_row_ = row;
}

void CellGrid::grow_rows(Index n_h) {
  if (n_h <= n_h_) return;
  std::vector<std::uint8_t> cells(static_cast<std::size_t>(n_w_ * n_h), 0);
  for (Index c = 0; c < n_w_; ++c)
    std::copy_n(cells_.begin() + c * n_h_, n_h_, cells.begin() + c * n_h);
  cells_ = std::move(cells);
  n_h_ = n_h;
}

Index CellGrid::contact_count() const {
  const Index row = plate_row_ - 1;
  if (row < 0 || row >= n_h_) return 0;
  Index count = 0;
  for (Index c = 0; c < n_w_; ++c) count += material(c, row);
  return count;
}

Index CellGrid::count_material() const {
  return static_cast<Index>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

Index CellGrid::column_height(Index col) const {
  Index h = 0;
  while (h < n_h_ && material(col, h)) ++h;
  return h;
}

double artifact_plateau(Index terminal_cells, Index n_w) {
  const double ratio = static_cast<double>(terminal_cells) / static_cast<double>(n_w);
  return ratio - std::floor(ratio);
}

CellGrid rasterize(const RoughnessProfile& profile, double eps_z,
                   const CompactionOptions& options) {
  profile.validate();
  if (!(eps_z > 0)) throw InvalidArgument("rasterize: eps_z must be positive");
  if (options.base_rows < 0) throw InvalidArgument("rasterize: negative base thickness");

  const double lo = profile.heights.minCoeff();
  const Index n_w = profile.size();
  std::vector<Index> columns(static_cast<std::size_t>(n_w));
  Index tallest = 0;
  for (Index i = 0; i < n_w; ++i) {
    const double cells = std::round((profile.heights(i) - lo) / eps_z);
    if (cells > static_cast<double>(options.max_cells))
      throw ResourceError("rasterize: eps_z too small for the cell budget");
    columns[static_cast<std::size_t>(i)] = options.base_rows + static_cast<Index>(cells);
    tallest = std::max(tallest, columns[static_cast<std::size_t>(i)]);
  }
  const Index n_h = tallest + 2;
  if (static_cast<double>(n_w) * static_cast<double>(n_h) > static_cast<double>(options.max_cells))
    throw ResourceError("rasterize: grid of " + std::to_string(n_w) + " x " +
                        std::to_string(n_h) + " cells exceeds the cell budget");

  CellGrid grid(n_w, n_h, profile.spacing, eps_z);
  for (Index c = 0; c < n_w; ++c)
    for (Index r = 0; r < columns[static_cast<std::size_t>(c)]; ++r) grid.set(c, r, true);
  grid.set_plate_row(tallest);
  return grid;
}

Compactor::Compactor(CellGrid grid, Eligibility eligibility)
    : grid_(std::move(grid)), eligibility_(eligibility) {
  best_.resize(static_cast<std::size_t>(grid_.n_w()));
  const Index top = grid_.plate_row() - 2;
  for (Index c = 0; c < grid_.n_w(); ++c) best_[static_cast<std::size_t>(c)] = scan_down(c, top);
}

bool Compactor::eligible(Index col, Index row) const {
  if (grid_.material(col, row)) return false;
  if (eligibility_ == Eligibility::kAnyAir) return true;
  return row == 0 || grid_.material(col, row - 1);
}

Index Compactor::scan_down(Index col, Index from) const {
  for (Index r = std::min(from, grid_.n_h() - 1); r >= 0; --r)
    if (eligible(col, r)) return r;
  return -1;
}

void Compactor::settle(Index contact_row) {
  const Index n_w = grid_.n_w();
  const Index floor_row = std::max<Index>(contact_row, 0);
  Index n_c = 0;
  for (Index c = 0; c < n_w; ++c)
    for (Index r = floor_row; r < grid_.n_h(); ++r)
      if (grid_.material(c, r)) {
        ++n_c;
        grid_.set(c, r, false);
      }
  const Index full_rows = n_c / n_w;
  const Index rest = n_c % n_w;
  const Index plate = floor_row + full_rows + (rest > 0 ? 1 : 0);
  grid_.grow_rows(plate + 1);
  for (Index k = 0; k < full_rows; ++k)
    for (Index c = 0; c < n_w; ++c) grid_.set(c, floor_row + k, true);
  for (Index c = 0; c < rest; ++c) grid_.set(c, floor_row + full_rows, true);
  grid_.set_plate_row(plate);
  terminal_cells_ = n_c;
}

StepOutcome Compactor::step() {
  if (terminal_cells_) return {grid_.contact_count(), terminal_cells_};

  const Index plate = grid_.plate_row() - 1;
  if (plate < 0) throw InvalidArgument("Compactor: plate already at the floor");
  grid_.set_plate_row(plate);
  const Index contact_row = plate - 1;

  for (Index c = 0; c < grid_.n_w(); ++c) {
    auto& b = best_[static_cast<std::size_t>(c)];
    if (b >= contact_row) b = scan_down(c, contact_row - 1);
  }

  struct Cell {
    Index col, row;
  };
  std::vector<Cell> displaced;
  for (Index c = 0; c < grid_.n_w(); ++c)
    for (Index r = grid_.n_h() - 1; r >= plate; --r)
      if (grid_.material(c, r)) displaced.push_back({c, r});

  const double ex = grid_.eps_x();
  const double ez = grid_.eps_z();
  const Index n_w = grid_.n_w();
  for (const Cell& cell : displaced) {
    double best_d2 = std::numeric_limits<double>::infinity();
    Index target_col = -1;
    Index target_row = -1;
    auto consider = [&](Index j) {
      if (j < 0 || j >= n_w) return;
      const Index r = best_[static_cast<std::size_t>(j)];
      if (r < 0) return;
      const double dx = static_cast<double>(j - cell.col) * ex;
      const double dz = static_cast<double>(cell.row - r) * ez;
      const double d2 = dx * dx + dz * dz;
      if (d2 < best_d2 || (d2 == best_d2 && j < target_col)) {
        best_d2 = d2;
        target_col = j;
        target_row = r;
      }
    };
    for (Index dc = 0;; ++dc) {
      const double dx = static_cast<double>(dc) * ex;
      if (dx * dx > best_d2) break;
      if (cell.col - dc < 0 && cell.col + dc >= n_w) break;
      consider(cell.col - dc);
      if (dc > 0) consider(cell.col + dc);
    }
    if (target_col < 0) {
      settle(contact_row);
      return {grid_.contact_count(), terminal_cells_};
    }
    grid_.set(cell.col, cell.row, false);
    grid_.set(target_col, target_row, true);
    auto& b = best_[static_cast<std::size_t>(target_col)];
    if (target_row + 1 < contact_row && eligible(target_col, target_row + 1))
      b = target_row + 1;
    else
      b = scan_down(target_col, target_row - 1);
  }
  return {grid_.contact_count(), std::nullopt};
}

StepOutcome step(CellGrid& grid, Eligibility eligibility) {
  Compactor compactor(std::move(grid), eligibility);
  const StepOutcome outcome = compactor.step();
  grid = compactor.grid();
  return outcome;
}

std::string to_string(DicStage stage) {
  switch (stage) {
    case DicStage::kRaw: return "raw";
    case DicStage::kCorrected: return "corrected";
    case DicStage::kSmoothed: return "smoothed";
  }
  return "raw";
}

DicStage parse_dic_stage(const std::string& text) {
  if (text == "raw") return DicStage::kRaw;
  if (text == "corrected") return DicStage::kCorrected;
  if (text == "smoothed") return DicStage::kSmoothed;
  throw InvalidData("unknown DIC stage '" + text + "'");
}

SimulationTrace simulate_trace(const RoughnessProfile& profile, double eps_z, Index horizon,
                               const CompactionOptions& options) {
  if (horizon < 1) throw InvalidArgument("simulate: horizon must be at least 1");
  Compactor compactor(rasterize(profile, eps_z, options), options.eligibility);
  const Index n_w = compactor.grid().n_w();

  SimulationTrace trace;
  trace.n_w = n_w;
  trace.material_count = compactor.grid().material_count();
  trace.raw.id = profile.id;
  trace.raw.eps_z = eps_z;
  trace.raw.stage = DicStage::kRaw;
  trace.raw.values.resize(horizon);
  trace.raw.values(0) = static_cast<double>(compactor.grid().contact_count()) / n_w;

  for (Index k = 1; k < horizon; ++k) {
    const StepOutcome outcome = compactor.step();
    trace.steps_run = k;
    if (options.check_mass && compactor.grid().count_material() != trace.material_count)
      trace.mass_conserved = false;
    if (outcome.terminal()) {
      const double plateau = artifact_plateau(*outcome.terminal_cells, n_w);
      trace.terminal_cells = outcome.terminal_cells;
      trace.raw.artifact_value = plateau;
      trace.raw.values.tail(horizon - k).setConstant(plateau);
      break;
    }
    trace.raw.values(k) = static_cast<double>(outcome.contact) / n_w;
  }
  if (compactor.grid().material_count() != trace.material_count) trace.mass_conserved = false;
  return trace;
}

DicCurve simulate(const RoughnessProfile& profile, double eps_z, Index horizon,
                  const CompactionOptions& options) {
  return simulate_trace(profile, eps_z, horizon, options).raw;
}

DicCurve correct(const DicCurve& raw) {
  if (raw.stage != DicStage::kRaw) throw InvalidArgument("correct: curve is not raw");
  DicCurve out = raw;
  out.stage = DicStage::kCorrected;
  if (!raw.artifact_value) return out;
  const double artifact = *raw.artifact_value;
  for (Index k = out.values.size() - 1; k >= 0 && out.values(k) == artifact; --k)
    out.values(k) = 1.0;
  return out;
}

DicCurve smooth(const DicCurve& corrected, Index window) {
  if (corrected.stage != DicStage::kCorrected)
    throw InvalidArgument("smooth: curve is not corrected");
  if (window < 1 || window % 2 == 0)
    throw InvalidArgument("smooth: window must be a positive odd number");
  const Index n = corrected.values.size();
  const Index half = window / 2;
  DicCurve out = corrected;
  out.stage = DicStage::kSmoothed;
  for (Index k = 0; k < n; ++k) {
    const Index lo = std::max<Index>(0, k - half);
    const Index hi = std::min<Index>(n - 1, k + half);
    out.values(k) = corrected.values.segment(lo, hi - lo + 1).mean();
  }
  return out;
}

std::vector<SimulationTrace> simulate_batch(std::span<const RoughnessProfile> profiles,
                                            double eps_z, Index horizon,
                                            const CompactionOptions& options, unsigned jobs) {
  std::vector<SimulationTrace> out(profiles.size());
  parallel_for(profiles.size(), jobs,
               [&](std::size_t i) { out[i] = simulate_trace(profiles[i], eps_z, horizon, options); });
  return out;
}

}  // namespace tapelab
