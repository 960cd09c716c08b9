#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tapelab/profile.hpp"

namespace tapelab {

struct MacroComponent {
  double amplitude_um = 0.0;
  double wavelength_um = 0.0;
  double phase_jitter = 0.0;  // radians, uniform in [-jitter, jitter]
};

/// Spectral density of the micro noise: S(f) ~ (1 + (2 pi f l)^2)^(-exponent).
struct MicroSpectrum {
  double rms_um = 0.0;
  double correlation_length_um = 0.0;
  double spectral_exponent = 0.0;
};

/// Per-sample relative perturbations (standard deviations of multiplicative noise).
struct SampleJitter {
  double rms_rel = 0.0;
  double amplitude_rel = 0.0;
  double correlation_rel = 0.0;
};

struct ClassRecipe {
  int class_id = 1;
  std::vector<MacroComponent> macro;
  MicroSpectrum micro;
  SampleJitter jitter;

  /// Throws InvalidArgument for non-positive parameters or a recipe with neither
  /// micro rms nor macro amplitude.
  void validate() const;
};

/// Twelve recipes on a grid of correlation length x spectral exponent.
std::vector<ClassRecipe> default_recipes();

/// Checks each recipe and that every pair of classes differs by >= 10 % in some parameter.
void validate_recipes(std::span<const ClassRecipe> recipes);

std::vector<ClassRecipe> load_recipes(const std::filesystem::path& path);
void save_recipes(std::span<const ClassRecipe> recipes, const std::filesystem::path& path);

struct GenerateOptions {
  int per_class = 30;
  Eigen::Index points = 500;
  double eps_x = 3.0;
  std::uint64_t seed = 0;
  double cutoff_um = 800.0;    // used for the population statistics only
  int max_overlap_rounds = 8;  // jitter widenings allowed by the separability check
  unsigned jobs = 1;
};

struct DatasetStats {
  double micro_sigma = 0.0;  // pooled std of micro heights, um
  double micro_min = 0.0;
  double micro_max = 0.0;
  double centroid_accuracy = 0.0;  // nearest centroid on (rms, skewness) of the micro part
  int overlap_rounds = 0;          // times the jitter was widened
};

struct Dataset {
  std::vector<RoughnessProfile> profiles;
  std::vector<ClassRecipe> recipes;  // as used, after any widening
  DatasetStats stats;
};

/// One realization of `recipe`; a pure function of (recipe, points, eps_x, seed).
RoughnessProfile generate_profile(const ClassRecipe& recipe, Eigen::Index points, double eps_x,
                                  std::uint64_t seed);

/// per_class profiles for each recipe, ordered by recipe then sample. If a nearest-centroid
/// classifier on (rms, skewness) separates the classes perfectly, the rms jitter of every
/// recipe is widened by 1.5x and the set regenerated.
Dataset generate(std::span<const ClassRecipe> recipes, const GenerateOptions& options);

/// Training-free accuracy of nearest-centroid classification on z-scored (rms, skewness).
double centroid_accuracy(std::span<const RoughnessProfile> micro);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace tapelab
