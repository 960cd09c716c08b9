#include "tapelab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "tapelab/checkpoint.hpp"
#include "tapelab/csv.hpp"
#include "tapelab/dataset.hpp"
#include "tapelab/metrics.hpp"
#include "tapelab/serialize.hpp"

#ifndef TAPELAB_VERSION
#define TAPELAB_VERSION "0.0.0"
#endif

namespace tapelab {
namespace fs = std::filesystem;
using nlohmann::json;

std::string_view tool_version() { return TAPELAB_VERSION; }

namespace {

template <typename T>
void read(const json& j, const char* key, T& field) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    field = it->template get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("'") + key + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw ResourceError("write failed for '" + path.string() + "'");
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void require_file(const fs::path& path) {
  if (!fs::is_regular_file(path)) throw InvalidData("input file not found: '" + path.string() + "'");
}

fs::path sibling(const fs::path& path, std::string_view suffix) {
  fs::path out = path;
  out.replace_extension();
  out += suffix;
  return out;
}

std::string csv_field(double v) { return std::isfinite(v) ? format_double(v) : "nan"; }

void log_line(const LogFn& log, const std::string& text) {
  if (log) log(text);
}

}  // namespace

std::string to_string(Eligibility e) { return e == Eligibility::kAnyAir ? "any_air" : "supported"; }

Eligibility parse_eligibility(const std::string& text) {
  if (text == "supported") return Eligibility::kSupported;
  if (text == "any_air") return Eligibility::kAnyAir;
  throw InvalidArgument("unknown eligibility '" + text + "' (expected supported or any_air)");
}

void to_json(json& j, const GenerateConfig& c) {
  j = json{{"recipes", c.recipes ? json(c.recipes->filename().string()) : json(nullptr)},
           {"per_class", c.per_class},
           {"points", c.points},
           {"eps_x", c.eps_x},
           {"cutoff_um", c.cutoff_um},
           {"seed", c.seed}};
}

void from_json(const json& j, GenerateConfig& c) {
  require_keys(j, {"recipes", "per_class", "points", "eps_x", "cutoff_um", "seed"}, "generate config");
  if (j.contains("recipes")) {
    if (j.at("recipes").is_null()) c.recipes.reset();
    else if (j.at("recipes").is_string()) c.recipes = j.at("recipes").get<std::string>();
    else throw InvalidArgument("'recipes' must be a path or null");
  }
  read(j, "per_class", c.per_class);
  read(j, "points", c.points);
  read(j, "eps_x", c.eps_x);
  read(j, "cutoff_um", c.cutoff_um);
  read(j, "seed", c.seed);
}

void to_json(json& j, const SimulateConfig& c) {
  j = json{{"eps_z", c.eps_z},
           {"horizon", c.horizon},
           {"cutoff_um", c.cutoff_um},
           {"eligibility", to_string(c.eligibility)},
           {"base_rows", c.base_rows},
           {"smooth_window", c.smooth_window}};
}

void from_json(const json& j, SimulateConfig& c) {
  require_keys(j, {"eps_z", "horizon", "cutoff_um", "eligibility", "base_rows", "smooth_window"},
               "simulate config");
  read(j, "eps_z", c.eps_z);
  read(j, "horizon", c.horizon);
  read(j, "cutoff_um", c.cutoff_um);
  if (j.contains("eligibility")) {
    if (!j.at("eligibility").is_string()) throw InvalidArgument("'eligibility' must be a string");
    c.eligibility = parse_eligibility(j.at("eligibility").get<std::string>());
  }
  read(j, "base_rows", c.base_rows);
  read(j, "smooth_window", c.smooth_window);
}

void to_json(json& j, const EvaluateConfig& c) {
  j = json{{"outlier_threshold", c.outlier_threshold},
           {"cutoff_um", c.cutoff_um},
           {"histogram_bins", c.histogram_bins}};
}

void from_json(const json& j, EvaluateConfig& c) {
  require_keys(j, {"outlier_threshold", "cutoff_um", "histogram_bins"}, "evaluate config");
  read(j, "outlier_threshold", c.outlier_threshold);
  read(j, "cutoff_um", c.cutoff_um);
  read(j, "histogram_bins", c.histogram_bins);
}

void to_json(json& j, const ReproConfig& c) {
  j = json{{"generate", c.generate}, {"simulate", c.simulate},   {"train", c.train},
           {"evaluate", c.evaluate}, {"primary_k", c.primary_k}, {"baseline_k", c.baseline_k},
           {"encdec_epochs", c.encdec_epochs}};
}

void from_json(const json& j, ReproConfig& c) {
  require_keys(j, {"generate", "simulate", "train", "evaluate", "primary_k", "baseline_k",
                   "encdec_epochs"},
               "repro config");
  if (j.contains("generate")) from_json(j.at("generate"), c.generate);
  if (j.contains("simulate")) from_json(j.at("simulate"), c.simulate);
  if (j.contains("train")) from_json(j.at("train"), c.train);
  if (j.contains("evaluate")) from_json(j.at("evaluate"), c.evaluate);
  read(j, "primary_k", c.primary_k);
  read(j, "baseline_k", c.baseline_k);
  read(j, "encdec_epochs", c.encdec_epochs);
}

ReproConfig default_repro_config() {
  ReproConfig c;
  c.train.optimizer.kind = OptimizerKind::kAdam;
  c.train.optimizer.learning_rate = 2e-3;
  c.train.epochs = 800;
  c.train.optimizer.decay_every = 533;
  return c;
}

json provenance(std::string_view command, const json& config) {
  return json{{"tool", "tape-lab"},
              {"version", std::string(tool_version())},
              {"command", std::string(command)},
              {"config", config}};
}

std::string provenance_line(std::string_view command, const json& config) {
  return provenance(command, config).dump();
}

// ---- generate -----------------------------------------------------------------------

DatasetStats run_generate(const GenerateConfig& config, const fs::path& out, unsigned jobs) {
  std::vector<ClassRecipe> recipes;
  if (config.recipes) {
    require_file(*config.recipes);
    recipes = load_recipes(*config.recipes);
  } else {
    recipes = default_recipes();
  }
  GenerateOptions options;
  options.per_class = config.per_class;
  options.points = config.points;
  options.eps_x = config.eps_x;
  options.seed = config.seed;
  options.cutoff_um = config.cutoff_um;
  options.jobs = jobs;
  const Dataset ds = generate(recipes, options);
  json prov = provenance("generate", config);
  prov["dataset"] = {{"micro_sigma_um", ds.stats.micro_sigma},
                    {"micro_min_um", ds.stats.micro_min},
                    {"micro_max_um", ds.stats.micro_max},
                    {"centroid_accuracy", ds.stats.centroid_accuracy},
                    {"overlap_rounds", ds.stats.overlap_rounds}};
  ensure_parent(out);
  save_profiles(ds.profiles, out, prov.dump());
  return ds.stats;
}

// ---- simulate -----------------------------------------------------------------------

SimulateOutputs run_simulate(const SimulateConfig& config, const fs::path& data,
                             const fs::path& out, const std::optional<fs::path>& raw_out,
                             const std::optional<fs::path>& corrected_out, unsigned jobs,
                             const LogFn& log) {
  if (!(config.eps_z > 0)) throw InvalidArgument("eps_z must be positive");
  if (config.horizon < 1) throw InvalidArgument("horizon must be at least 1");
  if (config.smooth_window < 1) throw InvalidArgument("smooth_window must be at least 1");
  require_file(data);
  const auto micro = load_micro_heights(data, config.cutoff_um);
  CompactionOptions options;
  options.eligibility = config.eligibility;
  options.base_rows = config.base_rows;
  log_line(log, "simulating " + std::to_string(micro.size()) + " profiles");
  const auto traces = simulate_batch(micro, config.eps_z, config.horizon, options, jobs);

  std::vector<DicCurve> raw, corrected, smoothed;
  json summary = json::array();
  for (const auto& t : traces) {
    raw.push_back(t.raw);
    corrected.push_back(correct(t.raw));
    smoothed.push_back(smooth(corrected.back(), config.smooth_window));
    summary.push_back({{"id", t.raw.id},
                       {"n_w", t.n_w},
                       {"material_cells", t.material_count},
                       {"steps_run", t.steps_run},
                       {"terminal_cells", t.terminal_cells ? json(*t.terminal_cells) : json(nullptr)},
                       {"artifact_value", t.raw.artifact_value ? json(*t.raw.artifact_value)
                                                               : json(nullptr)}});
  }
  const std::string prov = provenance_line("simulate", config);
  SimulateOutputs outputs{out, corrected_out, raw_out, sibling(out, ".summary.json")};
  ensure_parent(out);
  save_dic(smoothed, out, prov);
  if (corrected_out) {
    ensure_parent(*corrected_out);
    save_dic(corrected, *corrected_out, prov);
  }
  if (raw_out) {
    ensure_parent(*raw_out);
    save_dic(raw, *raw_out, prov);
  }
  json doc = provenance("simulate", config);
  doc["profiles"] = std::move(summary);
  write_text(outputs.summary, doc.dump(2) + "\n");
  return outputs;
}

// ---- train --------------------------------------------------------------------------

TrainOutputs run_train(const TrainConfig& config_in, const fs::path& data, const fs::path& dic,
                       const fs::path& out, double cutoff_um, const LogFn& log) {
  require_file(data);
  require_file(dic);
  const auto micro = load_micro_heights(data, cutoff_um);
  const auto curves = load_dic(dic);
  if (micro.empty()) throw InvalidData("'" + data.string() + "' holds no profiles");

  TrainConfig config = config_in;
  config.net.input_length = micro.front().size();
  if (!curves.empty()) config.net.horizon = curves.front().values.size();

  std::vector<int> labels;
  for (const auto& p : micro) {
    if (!p.label) throw InvalidData("profile '" + p.id + "' has no class label");
    labels.push_back(*p.label);
  }
  const Split split = stratified_split(labels, config.test_fraction, config.seed);
  const PreparedData prepared =
      prepare(micro, curves, split, static_cast<int>(config.net.classes));

  const int every = std::max(1, std::max(config.epochs, config.m2_epochs) / 10);
  const auto progress = [&](std::string_view phase, int epoch, const LossTerms& loss) {
    if (epoch % every == 0)
      log_line(log, std::string(phase) + " epoch " + std::to_string(epoch) + " loss " +
                        format_double(loss.total));
  };
  log_line(log, "training " + to_string(config.arch) + " on " +
                    std::to_string(prepared.train.size()) + " profiles");
  TrainResult result = train(prepared.train, config, progress);

  const json cfg = config;
  Checkpoint ckpt;
  ckpt.model = std::move(result.model);
  ckpt.m2_pretrained = std::move(result.m2_pretrained);
  ckpt.config = config;
  ckpt.stats = prepared.stats;
  ckpt.train_ids = prepared.train.ids;
  ckpt.test_ids = prepared.test.ids;
  ckpt.provenance = provenance("train", cfg);
  ensure_parent(out);
  save_checkpoint(ckpt, out);

  const fs::path history_path = sibling(out, ".loss.csv");
  std::ostringstream csv;
  csv << "# " << provenance_line("train", cfg) << "\n";
  std::vector<std::string> names;
  for (const auto* h : {&result.m2_history, &result.history})
    for (const auto& n : h->names)
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  csv << "phase,epoch,total";
  for (const auto& n : names) csv << "," << n;
  csv << "\n";
  const auto dump = [&](std::string_view phase, const LossHistory& h) {
    for (std::size_t i = 0; i < h.size(); ++i) {
      csv << phase << "," << h.epochs[i] << "," << csv_field(h.totals[i]);
      for (const auto& n : names) {
        const auto it = std::find(h.names.begin(), h.names.end(), n);
        csv << ",";
        if (it != h.names.end())
          csv << csv_field(h.terms[i][static_cast<std::size_t>(it - h.names.begin())]);
      }
      csv << "\n";
    }
  };
  dump("m2", result.m2_history);
  dump(config.arch == Architecture::kExtended ? "joint" : "main", result.history);
  write_text(history_path, csv.str());
  return {out, history_path};
}

// ---- evaluate -----------------------------------------------------------------------

namespace {

json summary_json(const Summary& s) {
  return {{"count", s.count},   {"mean", s.mean},         {"median", s.median},
          {"q1", s.q1},         {"q3", s.q3},             {"min", s.min},
          {"max", s.max},       {"cumulative", s.cumulative},
          {"outlier_threshold", s.outlier_threshold},     {"outliers", s.outliers}};
}

json confusion_json(const Eigen::MatrixXi& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<int> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) row[static_cast<std::size_t>(j)] = m(i, j);
    rows.push_back(row);
  }
  return rows;
}

// Share of curves reconstructed within `tolerance` percent relative L2 error.
json dic_reconstruction_json(const DicAutoencoder& m2, const Eigen::MatrixXd& curves,
                             double tolerance) {
  const Eigen::MatrixXd rec = reconstruct_dic(m2, curves);
  std::vector<double> errors;
  std::size_t within = 0;
  for (Eigen::Index j = 0; j < curves.cols(); ++j) {
    const double e = 100.0 * (rec.col(j) - curves.col(j)).norm() / curves.col(j).norm();
    errors.push_back(e);
    within += e <= tolerance;
  }
  std::sort(errors.begin(), errors.end());
  const double n = static_cast<double>(errors.size());
  return {{"count", errors.size()},
          {"tolerance_percent", tolerance},
          {"fraction_within", n > 0 ? static_cast<double>(within) / n : 0.0},
          {"max_error_percent", errors.empty() ? 0.0 : errors.back()},
          {"median_error_percent", errors.empty() ? 0.0 : errors[errors.size() / 2]}};
}

struct SplitResult {
  std::string name;
  ErrorReport report;
};

}  // namespace

json run_evaluate(const EvaluateConfig& config, const fs::path& model, const fs::path& data,
                  const fs::path& dic, const fs::path& report_path, unsigned jobs) {
  require_file(model);
  require_file(data);
  require_file(dic);
  const Checkpoint ckpt = load_checkpoint(model);
  const auto micro = load_micro_heights(data, config.cutoff_um);
  const auto curves = match_curves(micro, load_dic(dic));

  const std::set<std::string> train_ids(ckpt.train_ids.begin(), ckpt.train_ids.end());
  const std::set<std::string> test_ids(ckpt.test_ids.begin(), ckpt.test_ids.end());
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < micro.size(); ++i) {
    const std::string& id = micro[i].id;
    groups[test_ids.count(id) ? "test" : train_ids.count(id) ? "train" : "other"].push_back(i);
  }

  const auto classes = static_cast<int>(ckpt.config.net.classes);
  std::vector<SplitResult> results;
  json splits = json::object();
  Eigen::MatrixXd all_curves;
  for (const std::string name : {"test", "train", "other"}) {
    const auto it = groups.find(name);
    if (it == groups.end()) continue;
    std::vector<RoughnessProfile> profiles;
    std::vector<DicCurve> targets;
    for (auto i : it->second) {
      profiles.push_back(micro[i]);
      targets.push_back(curves[i]);
    }
    const SampleSet set = make_samples(profiles, targets, ckpt.stats);
    const Prediction pred = predict(ckpt.model, set.inputs, jobs);
    ErrorReport rep = make_report(name, set, pred, classes, config.outlier_threshold);

    json samples = json::array();
    for (const auto& s : rep.samples) {
      samples.push_back({{"id", s.id},
                         {"label", s.label},
                         {"predicted", s.predicted ? json(*s.predicted) : json(nullptr)},
                         {"class_ok", s.class_ok},
                         {"delta_dic", s.delta_dic},
                         {"recon_err", s.recon_err ? json(*s.recon_err) : json(nullptr)}});
    }
    json section = {{"samples", samples}, {"delta_dic", summary_json(rep.delta)}};
    if (rep.recon) section["recon_err"] = summary_json(*rep.recon);
    if (rep.classification) {
      section["accuracy"] = rep.classification->accuracy;
      section["confusion"] = confusion_json(rep.classification->confusion);
    }
    if (const auto* ext = std::get_if<ExtendedModel>(&ckpt.model)) {
      section["m2_reconstruction"] = dic_reconstruction_json(ext->m2, set.dic, 5.0);
      if (ckpt.m2_pretrained)
        section["m2_alone_reconstruction"] =
            dic_reconstruction_json(*ckpt.m2_pretrained, set.dic, 5.0);
    }
    splits[name] = std::move(section);
    results.push_back({name, std::move(rep)});
  }

  const Eigen::Index parameters = std::visit([](const auto& m) { return m.parameter_count(); },
                                             ckpt.model);
  json doc = provenance("evaluate", config);
  doc["model"] = {{"arch", to_string(ckpt.config.arch)},
                  {"k_max", ckpt.config.k_max},
                  {"r_max", ckpt.config.r_max},
                  {"parameters", parameters},
                  {"train_config", ckpt.provenance.value("config", json::object())}};
  doc["splits"] = std::move(splits);
  write_text(report_path, doc.dump(2) + "\n");

  // Figure data.
  const std::string head = "# " + provenance_line("evaluate", config) + "\n";
  std::ostringstream samples_csv, hist_csv, box_csv, pairs_csv;
  samples_csv << head << "split,id,label,predicted,class_ok,delta_dic,recon_err\n";
  hist_csv << head << "split,bin_lo,bin_hi,count\n";
  box_csv << head << "split,metric,min,q1,median,q3,max,mean,cumulative,outliers\n";
  pairs_csv << head << "split,id,predicted,label\n";
  for (const auto& [name, rep] : results) {
    for (const auto& s : rep.samples) {
      samples_csv << name << "," << s.id << "," << s.label << ","
                  << (s.predicted ? std::to_string(*s.predicted) : "") << ","
                  << (s.class_ok ? 1 : 0) << "," << csv_field(s.delta_dic) << ","
                  << (s.recon_err ? csv_field(*s.recon_err) : "") << "\n";
      if (s.predicted) pairs_csv << name << "," << s.id << "," << *s.predicted << "," << s.label << "\n";
    }
    const int bins = std::max(1, config.histogram_bins);
    const double top = rep.delta.max > 0 ? rep.delta.max : 1.0;
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (const auto& s : rep.samples) {
      const auto b = std::min(bins - 1, static_cast<int>(s.delta_dic / top * bins));
      ++counts[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b)
      hist_csv << name << "," << csv_field(top * b / bins) << "," << csv_field(top * (b + 1) / bins)
               << "," << counts[static_cast<std::size_t>(b)] << "\n";
    const auto box = [&](std::string_view metric, const Summary& s) {
      box_csv << name << "," << metric << "," << csv_field(s.min) << "," << csv_field(s.q1) << ","
              << csv_field(s.median) << "," << csv_field(s.q3) << "," << csv_field(s.max) << ","
              << csv_field(s.mean) << "," << csv_field(s.cumulative) << "," << s.outliers.size()
              << "\n";
    };
    box("delta_dic", rep.delta);
    if (rep.recon) box("recon_err", *rep.recon);
  }
  write_text(sibling(report_path, ".samples.csv"), samples_csv.str());
  write_text(sibling(report_path, ".histogram.csv"), hist_csv.str());
  write_text(sibling(report_path, ".boxplot.csv"), box_csv.str());
  write_text(sibling(report_path, ".pairs.csv"), pairs_csv.str());
  return doc;
}

// ---- repro --------------------------------------------------------------------------

json run_repro(const ReproConfig& config, const fs::path& out_dir, unsigned jobs,
               const LogFn& log) {
  fs::create_directories(out_dir);
  const fs::path data_dir = out_dir / "data";
  const fs::path profiles = data_dir / "profiles.csv";

  log_line(log, "generate");
  const DatasetStats stats = run_generate(config.generate, profiles, jobs);
  log_line(log, "simulate");
  SimulateConfig sim = config.simulate;
  sim.cutoff_um = config.generate.cutoff_um;
  const SimulateOutputs curves =
      run_simulate(sim, profiles, data_dir / "dic_smoothed.csv", data_dir / "dic_raw.csv",
                   data_dir / "dic_corrected.csv", jobs, log);

  struct Run {
    std::string name;
    Architecture arch;
    Eigen::Index k;
  };
  const std::vector<Run> runs = {
      {"rrae_k" + std::to_string(config.primary_k), Architecture::kRrae, config.primary_k},
      {"rrae_k" + std::to_string(config.baseline_k), Architecture::kRrae, config.baseline_k},
      {"ae_k" + std::to_string(config.baseline_k), Architecture::kClassicalAe, config.baseline_k},
      {"encdec", Architecture::kEncDec, config.baseline_k},
      {"extended_k" + std::to_string(config.primary_k), Architecture::kExtended, config.primary_k},
  };

  json models = json::object();
  for (const auto& run : runs) {
    if (models.contains(run.name)) continue;  // primary_k == baseline_k
    TrainConfig tc = config.train;
    tc.arch = run.arch;
    tc.k_max = run.k;
    tc.seed = config.generate.seed;
    if (run.arch == Architecture::kEncDec && config.encdec_epochs > 0) tc.epochs = config.encdec_epochs;
    log_line(log, "train " + run.name);
    const auto trained = run_train(tc, profiles, curves.smoothed,
                                   out_dir / "models" / (run.name + ".ckpt"),
                                   config.generate.cutoff_um, log);
    EvaluateConfig ec = config.evaluate;
    ec.cutoff_um = config.generate.cutoff_um;
    const json rep = run_evaluate(ec, trained.checkpoint, profiles, curves.smoothed,
                                  out_dir / "reports" / (run.name + ".json"), jobs);
    const json& test = rep.at("splits").at("test");
    json entry = {{"arch", to_string(run.arch)},
                  {"k_max", run.k},
                  {"parameters", rep.at("model").at("parameters")},
                  {"test_mean_delta_dic", test.at("delta_dic").at("mean")},
                  {"test_cumulative_delta_dic", test.at("delta_dic").at("cumulative")},
                  {"test_outliers", test.at("delta_dic").at("outliers").size()}};
    if (test.contains("accuracy")) entry["test_accuracy"] = test.at("accuracy");
    if (test.contains("recon_err")) entry["test_mean_recon_err"] = test.at("recon_err").at("mean");
    if (rep.at("splits").contains("train") && rep.at("splits").at("train").contains("accuracy"))
      entry["train_accuracy"] = rep.at("splits").at("train").at("accuracy");
    if (test.contains("m2_alone_reconstruction")) {
      // Fraction over every curve, train and test.
      double within = 0, count = 0;
      for (const auto& [split, section] : rep.at("splits").items()) {
        const auto& m = section.at("m2_alone_reconstruction");
        within += m.at("fraction_within").get<double>() * m.at("count").get<double>();
        count += m.at("count").get<double>();
      }
      entry["m2_alone_fraction_within_5pct"] = count > 0 ? within / count : 0.0;
      entry["m2_alone_test"] = test.at("m2_alone_reconstruction");
    }
    models[run.name] = std::move(entry);
  }

  json doc = provenance("repro", config);
  doc["dataset"] = {{"profiles", config.generate.per_class * 12},
                    {"micro_sigma_um", stats.micro_sigma},
                    {"micro_min_um", stats.micro_min},
                    {"micro_max_um", stats.micro_max},
                    {"centroid_accuracy", stats.centroid_accuracy}};
  doc["models"] = std::move(models);
  write_text(out_dir / "repro_report.json", doc.dump(2) + "\n");
  return doc;
}

}  // namespace tapelab
