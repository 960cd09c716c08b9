#include "tapelab/synth.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include <json.hpp>

#include "tapelab/parallel.hpp"

namespace tapelab {
namespace {

using nlohmann::json;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::VectorXd shaped_noise(const MicroSpectrum& spec, double corr, Eigen::Index n,
                             double eps_x, std::mt19937_64& rng) {
  // Generate on twice the length and keep the first half so the circular FFT
  // does not correlate the two ends.
  const Eigen::Index m = 2 * n;
  std::normal_distribution<double> normal;
  std::vector<double> white(static_cast<std::size_t>(m));
  for (auto& w : white) w = normal(rng);

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, white);
  const double df = 1.0 / (static_cast<double>(m) * eps_x);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::Index kk = std::min(k, m - k);
    const double w = 2.0 * std::numbers::pi * static_cast<double>(kk) * df * corr;
    spectrum[static_cast<std::size_t>(k)] *= std::pow(1.0 + w * w, -0.5 * spec.spectral_exponent);
  }
  spectrum[0] = 0.0;
  std::vector<double> out;
  fft.inv(out, spectrum);

  Eigen::VectorXd v = Eigen::Map<Eigen::VectorXd>(out.data(), n);
  v.array() -= v.mean();
  return v;
}

double skewness(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  const Eigen::ArrayXd c = v.array() - mean;
  const double m2 = c.square().mean();
  if (m2 <= 0) return 0.0;
  return c.cube().mean() / std::pow(m2, 1.5);
}

double rms(const Eigen::VectorXd& v) {
  return std::sqrt((v.array() - v.mean()).square().mean());
}

bool differs(const ClassRecipe& a, const ClassRecipe& b) {
  auto rel = [](double x, double y) {
    const double s = std::max(std::abs(x), std::abs(y));
    return s > 0 && std::abs(x - y) >= 0.1 * s;
  };
  if (rel(a.micro.rms_um, b.micro.rms_um) ||
      rel(a.micro.correlation_length_um, b.micro.correlation_length_um) ||
      rel(a.micro.spectral_exponent, b.micro.spectral_exponent))
    return true;
  if (a.macro.size() != b.macro.size()) return true;
  for (std::size_t i = 0; i < a.macro.size(); ++i)
    if (rel(a.macro[i].amplitude_um, b.macro[i].amplitude_um) ||
        rel(a.macro[i].wavelength_um, b.macro[i].wavelength_um))
      return true;
  return false;
}

void recipe_to_json(json& j, const ClassRecipe& r) {
  j = json{{"class_id", r.class_id},
           {"micro",
            {{"rms_um", r.micro.rms_um},
             {"correlation_length_um", r.micro.correlation_length_um},
             {"spectral_exponent", r.micro.spectral_exponent}}},
           {"jitter",
            {{"rms_rel", r.jitter.rms_rel},
             {"amplitude_rel", r.jitter.amplitude_rel},
             {"correlation_rel", r.jitter.correlation_rel}}}};
  j["macro"] = json::array();
  for (const auto& m : r.macro)
    j["macro"].push_back({{"amplitude_um", m.amplitude_um},
                          {"wavelength_um", m.wavelength_um},
                          {"phase_jitter", m.phase_jitter}});
}

void recipe_from_json(const json& j, ClassRecipe& r) {
  r.class_id = j.at("class_id").get<int>();
  const auto& micro = j.at("micro");
  r.micro.rms_um = micro.at("rms_um").get<double>();
  r.micro.correlation_length_um = micro.at("correlation_length_um").get<double>();
  r.micro.spectral_exponent = micro.at("spectral_exponent").get<double>();
  r.macro.clear();
  for (const auto& m : j.value("macro", json::array()))
    r.macro.push_back({m.at("amplitude_um").get<double>(), m.at("wavelength_um").get<double>(),
                       m.value("phase_jitter", 0.0)});
  if (j.contains("jitter")) {
    const auto& s = j["jitter"];
    r.jitter.rms_rel = s.value("rms_rel", 0.0);
    r.jitter.amplitude_rel = s.value("amplitude_rel", 0.0);
    r.jitter.correlation_rel = s.value("correlation_rel", 0.0);
  }
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(seed) ^ a) ^ b);
}

void ClassRecipe::validate() const {
  const std::string who = "recipe " + std::to_string(class_id) + ": ";
  if (class_id < 1) throw InvalidArgument(who + "class_id must be >= 1");
  if (micro.rms_um < 0 || micro.correlation_length_um <= 0 || micro.spectral_exponent <= 0)
    throw InvalidArgument(who + "micro parameters must be positive");
  bool any_macro = false;
  for (const auto& m : macro) {
    if (m.amplitude_um <= 0 || m.wavelength_um <= 0 || m.phase_jitter < 0)
      throw InvalidArgument(who + "macro amplitudes and wavelengths must be positive");
    any_macro = true;
  }
  if (micro.rms_um == 0 && !any_macro) throw InvalidArgument(who + "degenerate recipe");
  if (jitter.rms_rel < 0 || jitter.amplitude_rel < 0 || jitter.correlation_rel < 0)
    throw InvalidArgument(who + "negative jitter");
}

std::vector<ClassRecipe> default_recipes() {
  constexpr double kCorr[] = {3.0, 8.0, 20.0, 50.0};
  constexpr double kExponent[] = {2.0, 3.5, 6.0};
  constexpr double kRms[] = {0.95, 1.3, 1.75};
  std::vector<ClassRecipe> out;
  int id = 1;
  for (int e = 0; e < 3; ++e)
    for (int c = 0; c < 4; ++c) {
      ClassRecipe r;
      r.class_id = id;
      r.micro = {kRms[(c + e) % 3], kCorr[c], kExponent[e]};
      r.macro = {{6.0 + 1.5 * c, 5000.0 + 600.0 * e, std::numbers::pi},
                 {2.0 + 0.5 * e, 3000.0 + 300.0 * c, std::numbers::pi}};
      r.jitter = {0.04, 0.25, 0.03};
      out.push_back(r);
      ++id;
    }
  return out;
}

void validate_recipes(std::span<const ClassRecipe> recipes) {
  if (recipes.empty()) throw InvalidArgument("no recipes");
  for (const auto& r : recipes) r.validate();
  for (std::size_t i = 0; i < recipes.size(); ++i)
    for (std::size_t j = i + 1; j < recipes.size(); ++j) {
      if (recipes[i].class_id == recipes[j].class_id)
        throw InvalidArgument("duplicate class_id " + std::to_string(recipes[i].class_id));
      if (!differs(recipes[i], recipes[j]))
        throw InvalidArgument("recipes " + std::to_string(recipes[i].class_id) + " and " +
                              std::to_string(recipes[j].class_id) +
                              " differ by less than 10 % in every parameter");
    }
}

std::vector<ClassRecipe> load_recipes(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidData("cannot open '" + path.string() + "'");
  std::vector<ClassRecipe> out;
  try {
    const json j = json::parse(in);
    if (!j.is_array()) throw InvalidData("'" + path.string() + "': expected a JSON array");
    for (const auto& item : j) recipe_from_json(item, out.emplace_back());
  } catch (const json::exception& e) {
    throw InvalidData("'" + path.string() + "': " + e.what());
  }
  validate_recipes(out);
  return out;
}

void save_recipes(std::span<const ClassRecipe> recipes, const std::filesystem::path& path) {
  json j = json::array();
  for (const auto& r : recipes) recipe_to_json(j.emplace_back(), r);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InvalidData("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

RoughnessProfile generate_profile(const ClassRecipe& recipe, Eigen::Index points, double eps_x,
                                  std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto factor = [&](double rel) { return std::max(0.2, 1.0 + rel * normal(rng)); };

  const double rms_target = recipe.micro.rms_um * factor(recipe.jitter.rms_rel);
  const double corr = recipe.micro.correlation_length_um * factor(recipe.jitter.correlation_rel);

  Eigen::VectorXd heights = Eigen::VectorXd::Zero(points);
  for (const auto& m : recipe.macro) {
    const double amp = m.amplitude_um * factor(recipe.jitter.amplitude_rel);
    const double phase = m.phase_jitter * unit(rng);
    for (Eigen::Index i = 0; i < points; ++i)
      heights(i) += amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) * eps_x /
                                       m.wavelength_um +
                                   phase);
  }
  if (recipe.micro.rms_um > 0) {
    Eigen::VectorXd noise = shaped_noise(recipe.micro, corr, points, eps_x, rng);
    const double r = rms(noise);
    if (r > 0) heights += noise * (rms_target / r);
  }

  RoughnessProfile p;
  char id[32];
  std::snprintf(id, sizeof(id), "c%02d_s%016llx", recipe.class_id,
                static_cast<unsigned long long>(seed));
  p.id = id;
  p.heights = std::move(heights);
  p.spacing = eps_x;
  p.label = recipe.class_id;
  return p;
}

double centroid_accuracy(std::span<const RoughnessProfile> micro) {
  if (micro.empty()) return 0.0;
  const auto n = static_cast<Eigen::Index>(micro.size());
  Eigen::MatrixXd features(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    features(i, 0) = rms(micro[static_cast<std::size_t>(i)].heights);
    features(i, 1) = skewness(micro[static_cast<std::size_t>(i)].heights);
  }
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double mean = features.col(c).mean();
    const double sd = std::sqrt((features.col(c).array() - mean).square().mean());
    features.col(c).array() -= mean;
    if (sd > 0) features.col(c) /= sd;
  }
  std::map<int, std::pair<Eigen::Vector2d, int>> centroids;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& [sum, count] = centroids.try_emplace(micro[static_cast<std::size_t>(i)].label.value_or(0),
                                               Eigen::Vector2d::Zero(), 0)
                             .first->second;
    sum += features.row(i).transpose();
    ++count;
  }
  int correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    int best_label = 0;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [label, entry] : centroids) {
      const double d = (features.row(i).transpose() - entry.first / entry.second).squaredNorm();
      if (d < best) {
        best = d;
        best_label = label;
      }
    }
    correct += best_label == micro[static_cast<std::size_t>(i)].label.value_or(0);
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

Dataset generate(std::span<const ClassRecipe> recipes, const GenerateOptions& options) {
  validate_recipes(recipes);
  if (options.per_class < 1) throw InvalidArgument("generate: per_class must be >= 1");
  if (options.points < 64) throw InvalidArgument("generate: at least 64 points required");
  if (!(options.eps_x > 0)) throw InvalidArgument("generate: eps_x must be positive");

  Dataset data;
  data.recipes.assign(recipes.begin(), recipes.end());
  const auto per_class = static_cast<std::size_t>(options.per_class);
  for (int round = 0;; ++round) {
    const std::size_t total = data.recipes.size() * per_class;
    data.profiles.assign(total, {});
    std::vector<RoughnessProfile> micro(total);
    parallel_for(total, options.jobs, [&](std::size_t i) {
      const std::size_t c = i / per_class;
      const std::size_t s = i % per_class;
      const auto& recipe = data.recipes[c];
      data.profiles[i] = generate_profile(
          recipe, options.points, options.eps_x,
          derive_seed(options.seed, static_cast<std::uint64_t>(recipe.class_id), s));
      const MicroProfile m = decompose(data.profiles[i], {options.cutoff_um});
      micro[i] = RoughnessProfile{m.id, m.heights, m.spacing, m.label};
    });

    data.stats.overlap_rounds = round;
    data.stats.centroid_accuracy = centroid_accuracy(micro);
    double sum = 0, sum2 = 0, lo = std::numeric_limits<double>::infinity(), hi = -lo;
    Eigen::Index count = 0;
    for (const auto& m : micro) {
      sum += m.heights.sum();
      sum2 += m.heights.squaredNorm();
      lo = std::min(lo, m.heights.minCoeff());
      hi = std::max(hi, m.heights.maxCoeff());
      count += m.heights.size();
    }
    const double mean = sum / static_cast<double>(count);
    data.stats.micro_sigma = std::sqrt(sum2 / static_cast<double>(count) - mean * mean);
    data.stats.micro_min = lo;
    data.stats.micro_max = hi;

    if (data.stats.centroid_accuracy < 1.0 || data.recipes.size() < 2 ||
        round >= options.max_overlap_rounds)
      break;
    for (auto& r : data.recipes) r.jitter.rms_rel = std::max(0.02, r.jitter.rms_rel * 1.5);
  }
  return data;
}

}  // namespace tapelab
