#include <malloc.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "tapelab/error.hpp"
#include "tapelab/pipeline.hpp"
#include "tapelab/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tapelab;

namespace {

constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kNumericError = 4;

// Binds a flag to a staging variable; the value is applied on top of the config file only
// when the flag was given, which yields flags > config file > defaults.
class Overrides {
 public:
  template <typename T, typename Apply>
  CLI::Option* add(CLI::App& app, const std::string& name, const std::string& help, Apply apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app.add_option(name, *value, help);
    pending_.push_back([opt, value, apply] {
      if (opt->count() > 0) apply(*value);
    });
    return opt;
  }

  void apply() const {
    for (const auto& f : pending_) f();
  }

 private:
  std::vector<std::function<void()>> pending_;
};

json read_config_file(const std::optional<std::string>& path) {
  if (!path) return json::object();
  std::ifstream in(*path);
  if (!in) throw InvalidArgument("cannot open config file '" + *path + "'");
  try {
    json j = json::parse(in);
    if (!j.is_object()) throw InvalidArgument("config file '" + *path + "' is not a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config file '" + *path + "': " + e.what());
  }
}

unsigned default_jobs() {
  if (const char* env = std::getenv("TAPE_LAB_JOBS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    throw InvalidArgument(std::string("TAPE_LAB_JOBS must be a positive integer, got '") + env + "'");
  }
  return 1;
}

void log_stderr(std::string_view line) { std::cerr << line << '\n'; }

}  // namespace

int main(int argc, char** argv) {
  // Training allocates and frees the same large buffers every step; keep them mapped.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);

  CLI::App app{"Compaction simulation and roughness descriptors for composite tapes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tool_version()));

  unsigned jobs = 1;
  std::optional<std::string> config_path;
  bool jobs_given = false;
  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags take precedence");
    sub->add_option("--jobs", jobs, "worker threads (default: TAPE_LAB_JOBS or 1)")
        ->check(CLI::PositiveNumber)
        ->each([&](const std::string&) { jobs_given = true; });
  };
  Overrides flags;

  // generate
  GenerateConfig gen;
  std::string gen_out;
  auto* generate = app.add_subcommand("generate", "synthesize labelled roughness profiles");
  common(generate);
  flags.add<std::string>(*generate, "--recipes", "recipe JSON (default: built-in recipes)",
                         [&](const std::string& v) { gen.recipes = v; });
  flags.add<int>(*generate, "--per-class", "profiles per class", [&](int v) { gen.per_class = v; });
  flags.add<Eigen::Index>(*generate, "--points", "samples per profile",
                          [&](Eigen::Index v) { gen.points = v; });
  flags.add<double>(*generate, "--eps-x", "sample spacing in um", [&](double v) { gen.eps_x = v; });
  flags.add<double>(*generate, "--cutoff", "macro/micro cutoff wavelength in um",
                    [&](double v) { gen.cutoff_um = v; });
  flags.add<std::uint64_t>(*generate, "--seed", "random seed", [&](std::uint64_t v) { gen.seed = v; });
  generate->add_option("--out", gen_out, "profile CSV to write")->required();

  // simulate
  SimulateConfig sim;
  std::string sim_data, sim_out;
  std::optional<std::string> sim_raw, sim_corrected;
  auto* simulate = app.add_subcommand("simulate", "compaction DIC curves for each profile");
  common(simulate);
  simulate->add_option("--profiles", sim_data, "profile or micro-profile CSV")->required();
  flags.add<double>(*simulate, "--eps-z", "cell height in um", [&](double v) { sim.eps_z = v; });
  flags.add<Eigen::Index>(*simulate, "--horizon", "compaction steps",
                          [&](Eigen::Index v) { sim.horizon = v; });
  flags.add<int>(*simulate, "--window", "smoothing window", [&](int v) { sim.smooth_window = v; });
  flags.add<double>(*simulate, "--cutoff", "cutoff applied to plain profile files",
                    [&](double v) { sim.cutoff_um = v; });
  flags.add<std::string>(*simulate, "--eligibility", "supported | any_air",
                         [&](const std::string& v) { sim.eligibility = parse_eligibility(v); });
  flags.add<Eigen::Index>(*simulate, "--base-rows", "solid rows under the lowest point",
                          [&](Eigen::Index v) { sim.base_rows = v; });
  std::uint64_t sim_seed = 0;
  simulate->add_option("--seed", sim_seed, "accepted for pipeline symmetry; simulation is deterministic");
  simulate->add_option("--out", sim_out, "smoothed DIC CSV")->required();
  simulate->add_option("--raw-out", sim_raw, "raw DIC CSV");
  simulate->add_option("--corrected-out", sim_corrected, "artifact-corrected DIC CSV");

  // train
  TrainConfig tc;
  tc.arch = Architecture::kRrae;
  std::string train_data, train_dic, train_out;
  double train_cutoff = 800.0;
  auto* trainc = app.add_subcommand("train", "train a model on profiles and DIC curves");
  common(trainc);
  flags.add<std::string>(*trainc, "--arch", "rrae | extended | ae | encdec",
                         [&](const std::string& v) { tc.arch = parse_architecture(v); });
  flags.add<Eigen::Index>(*trainc, "--kmax", "latent rank", [&](Eigen::Index v) { tc.k_max = v; });
  flags.add<Eigen::Index>(*trainc, "--rmax", "DIC latent rank (extended)",
                          [&](Eigen::Index v) { tc.r_max = v; });
  flags.add<int>(*trainc, "--epochs", "training epochs", [&](int v) { tc.epochs = v; });
  flags.add<int>(*trainc, "--m2-epochs", "DIC autoencoder pre-training epochs (extended)",
                 [&](int v) { tc.m2_epochs = v; });
  flags.add<double>(*trainc, "--lr", "initial learning rate",
                    [&](double v) { tc.optimizer.learning_rate = v; });
  flags.add<std::string>(*trainc, "--optimizer", "gd | momentum | adam",
                         [&](const std::string& v) { tc.optimizer.kind = parse_optimizer(v); });
  flags.add<int>(*trainc, "--decay-every", "epochs between learning-rate decays",
                 [&](int v) { tc.optimizer.decay_every = v; });
  flags.add<double>(*trainc, "--test-fraction", "held-out share per class",
                    [&](double v) { tc.test_fraction = v; });
  flags.add<std::uint64_t>(*trainc, "--seed", "split, initialization and dropout seed",
                           [&](std::uint64_t v) { tc.seed = v; });
  trainc->add_option("--data", train_data, "profile or micro-profile CSV")->required();
  trainc->add_option("--dic", train_dic, "DIC CSV")->required();
  trainc->add_option("--out", train_out, "checkpoint to write")->required();
  trainc->add_option("--cutoff", train_cutoff, "cutoff applied to plain profile files");

  // evaluate
  EvaluateConfig ev;
  std::string ev_model, ev_data, ev_dic, ev_report;
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint and write figure data");
  common(evaluate);
  evaluate->add_option("--model", ev_model, "checkpoint")->required();
  evaluate->add_option("--data", ev_data, "profile or micro-profile CSV")->required();
  evaluate->add_option("--dic", ev_dic, "DIC CSV")->required();
  evaluate->add_option("--report", ev_report, "report JSON to write")->required();
  flags.add<double>(*evaluate, "--outlier-threshold", "delta_DIC outlier threshold in percent",
                    [&](double v) { ev.outlier_threshold = v; });
  flags.add<double>(*evaluate, "--cutoff", "cutoff applied to plain profile files",
                    [&](double v) { ev.cutoff_um = v; });

  // repro
  ReproConfig rc = default_repro_config();
  std::string repro_out = "repro";
  auto* repro = app.add_subcommand("repro", "generate, simulate, train and evaluate every model");
  common(repro);
  flags.add<std::uint64_t>(*repro, "--seed", "seed for every stage",
                           [&](std::uint64_t v) { rc.generate.seed = v; });
  flags.add<int>(*repro, "--per-class", "profiles per class",
                 [&](int v) { rc.generate.per_class = v; });
  flags.add<int>(*repro, "--epochs", "training epochs per model", [&](int v) { rc.train.epochs = v; });
  repro->add_option("--out", repro_out, "output directory");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e) == 0 ? 0 : kConfigError;
    }
    if (!jobs_given) jobs = default_jobs();
    const json file = read_config_file(config_path);

    if (generate->parsed()) {
      from_json(file, gen);
      flags.apply();
      const auto stats = run_generate(gen, gen_out, jobs);
      std::cerr << "wrote " << gen_out << " (micro sigma " << stats.micro_sigma << " um)\n";
    } else if (simulate->parsed()) {
      from_json(file, sim);
      flags.apply();
      const auto to_path = [](const std::optional<std::string>& p) -> std::optional<fs::path> {
        if (p) return fs::path(*p);
        return std::nullopt;
      };
      run_simulate(sim, sim_data, sim_out, to_path(sim_raw), to_path(sim_corrected), jobs,
                   log_stderr);
    } else if (trainc->parsed()) {
      from_json(file, tc);
      flags.apply();
      run_train(tc, train_data, train_dic, train_out, train_cutoff, log_stderr);
    } else if (evaluate->parsed()) {
      from_json(file, ev);
      flags.apply();
      const json report = run_evaluate(ev, ev_model, ev_data, ev_dic, ev_report, jobs);
      const json& test = report.at("splits").contains("test") ? report.at("splits").at("test")
                                                              : report.at("splits").front();
      std::cerr << "mean delta_DIC " << test.at("delta_dic").at("mean").get<double>() << " %";
      if (test.contains("accuracy")) std::cerr << ", accuracy " << test.at("accuracy").get<double>();
      std::cerr << '\n';
    } else if (repro->parsed()) {
      from_json(file, rc);
      flags.apply();
      run_repro(rc, repro_out, jobs, log_stderr);
      std::cerr << "wrote " << (fs::path(repro_out) / "repro_report.json").string() << '\n';
    }
    return 0;
  } catch (const InvalidArgument& e) {
    std::cerr << "tape-lab: config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericError& e) {
    std::cerr << "tape-lab: numeric failure: " << e.what() << '\n';
    return kNumericError;
  } catch (const Error& e) {
    std::cerr << "tape-lab: data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "tape-lab: data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "tape-lab: data error: " << e.what() << '\n';
    return kDataError;
  }
}
