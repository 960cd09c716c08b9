#pragma once

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tapelab/compaction.hpp"
#include "tapelab/synth.hpp"
#include "tapelab/training.hpp"

namespace tapelab {

std::string_view tool_version();

/// Progress and diagnostics go here (stderr in the CLI); never into artifacts.
using LogFn = std::function<void(std::string_view)>;

struct GenerateConfig {
  std::optional<std::filesystem::path> recipes;  // default recipes when unset
  int per_class = 30;
  Eigen::Index points = 500;
  double eps_x = 3.0;
  double cutoff_um = 800.0;
  std::uint64_t seed = 0;
};

struct SimulateConfig {
  double eps_z = 0.1;
  Eigen::Index horizon = 352;
  double cutoff_um = 800.0;  // applied to plain profile files; micro files are used as is
  Eligibility eligibility = Eligibility::kSupported;
  Eigen::Index base_rows = 2;
  int smooth_window = 5;
};

struct EvaluateConfig {
  double outlier_threshold = 10.0;
  double cutoff_um = 800.0;
  int histogram_bins = 20;
};

/// Models trained by `repro`, all on one split. `extended_k` also sets the RRAE run the
/// extended model is compared with.
struct ReproConfig {
  GenerateConfig generate;
  SimulateConfig simulate;
  TrainConfig train;  // base settings; arch and k_max are set per model
  EvaluateConfig evaluate;
  Eigen::Index primary_k = 4;
  Eigen::Index baseline_k = 5;
  int encdec_epochs = 0;  // 0: train.epochs
};

void to_json(nlohmann::json& j, const GenerateConfig& c);
void from_json(const nlohmann::json& j, GenerateConfig& c);
void to_json(nlohmann::json& j, const SimulateConfig& c);
void from_json(const nlohmann::json& j, SimulateConfig& c);
void to_json(nlohmann::json& j, const EvaluateConfig& c);
void from_json(const nlohmann::json& j, EvaluateConfig& c);
void to_json(nlohmann::json& j, const ReproConfig& c);
void from_json(const nlohmann::json& j, ReproConfig& c);

std::string to_string(Eligibility e);
Eligibility parse_eligibility(const std::string& text);

/// Settings the repro pipeline uses when nothing is overridden.
ReproConfig default_repro_config();

/// `# {"tool":...,"version":...,"command":...,"config":...}` comment line for CSV outputs.
std::string provenance_line(std::string_view command, const nlohmann::json& config);
nlohmann::json provenance(std::string_view command, const nlohmann::json& config);

// ---- commands -------------------------------------------------------------------------

/// Writes the profile CSV to `out`.
DatasetStats run_generate(const GenerateConfig& config, const std::filesystem::path& out,
                          unsigned jobs = 1);

struct SimulateOutputs {
  std::filesystem::path smoothed;
  std::optional<std::filesystem::path> corrected;
  std::optional<std::filesystem::path> raw;
  std::filesystem::path summary;  // `<stem>.summary.json`: per-profile steps, N_c, plateau
};

/// Decomposes (plain profile files), simulates and writes the smoothed curves to `out`;
/// the raw and corrected stages go to the optional paths.
SimulateOutputs run_simulate(const SimulateConfig& config, const std::filesystem::path& data,
                             const std::filesystem::path& out,
                             const std::optional<std::filesystem::path>& raw_out = {},
                             const std::optional<std::filesystem::path>& corrected_out = {},
                             unsigned jobs = 1, const LogFn& log = {});

struct TrainOutputs {
  std::filesystem::path checkpoint;
  std::filesystem::path history;  // loss-history CSV
};

/// Splits `data`, trains `config.arch` and writes a checkpoint plus its loss history.
/// `cutoff_um` decomposes plain profile files.
TrainOutputs run_train(const TrainConfig& config, const std::filesystem::path& data,
                       const std::filesystem::path& dic, const std::filesystem::path& out,
                       double cutoff_um = 800.0, const LogFn& log = {});

/// Reports every split of the checkpoint found in `data` and writes figure-data CSVs
/// (`<stem>.samples.csv`, `.histogram.csv`, `.boxplot.csv`, `.pairs.csv`) next to the
/// report. Returns the report JSON.
nlohmann::json run_evaluate(const EvaluateConfig& config, const std::filesystem::path& model,
                            const std::filesystem::path& data, const std::filesystem::path& dic,
                            const std::filesystem::path& report, unsigned jobs = 1);

/// generate -> simulate -> train every model -> evaluate, under `out_dir`. Returns the
/// summary written to `out_dir/repro_report.json`.
nlohmann::json run_repro(const ReproConfig& config, const std::filesystem::path& out_dir,
                         unsigned jobs = 1, const LogFn& log = {});

}  // namespace tapelab
