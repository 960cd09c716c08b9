#include "tapelab/profile.hpp"

#include <cmath>

namespace tapelab {

void RoughnessProfile::validate() const {
  if (heights.size() < 2) throw InvalidData("profile '" + id + "': need at least two samples");
  if (!(spacing > 0) || !std::isfinite(spacing))
    throw InvalidData("profile '" + id + "': spacing must be positive");
  if (!heights.allFinite()) throw InvalidData("profile '" + id + "': non-finite height");
}

RoughnessProfile MicroProfile::source() const {
  RoughnessProfile out{id, heights + macro, spacing, label};
  return out;
}

MicroProfile decompose(const RoughnessProfile& profile, const DecomposeOptions& options) {
  profile.validate();
  if (!(options.cutoff_um >= 2 * profile.spacing))
    throw InvalidArgument("decompose: cutoff " + std::to_string(options.cutoff_um) +
                          " um is below twice the sample spacing");
  MicroProfile out;
  out.id = profile.id;
  out.spacing = profile.spacing;
  out.label = profile.label;
  out.macro = gaussian_lowpass(profile.heights, profile.spacing, options.cutoff_um);
  out.heights = profile.heights - out.macro;
  return out;
}

NormalizedProfile normalize_minmax(const RoughnessProfile& profile) {
  profile.validate();
  const double lo = profile.heights.minCoeff();
  const double hi = profile.heights.maxCoeff();
  if (!(hi > lo)) throw DegenerateInput("normalize_minmax: profile '" + profile.id + "' is flat");
  NormalizedProfile out;
  out.id = profile.id;
  out.label = profile.label;
  out.min = lo;
  out.max = hi;
  out.values = (profile.heights.array() - lo) / (hi - lo);
  out.stage = NormalizationStage::kMinMax;
  return out;
}

PopulationStats population_stats(std::span<const NormalizedProfile> population) {
  double count = 0, sum = 0;
  for (const auto& p : population) {
    sum += p.values.sum();
    count += static_cast<double>(p.values.size());
  }
  if (count == 0) throw InvalidArgument("population_stats: empty population");
  const double mean = sum / count;
  double ss = 0;
  for (const auto& p : population) ss += (p.values.array() - mean).square().sum();
  return {mean, std::sqrt(ss / count)};
}

NormalizedProfile standardize(const NormalizedProfile& norm, const PopulationStats& stats) {
  if (norm.stage != NormalizationStage::kMinMax)
    throw InvalidArgument("standardize: input must be at the min-max stage");
  if (!(stats.sigma > 0)) throw InvalidArgument("standardize: sigma must be positive");
  NormalizedProfile out = norm;
  out.values = (norm.values.array() - stats.mean) / (6.0 * stats.sigma);
  out.mean = stats.mean;
  out.sigma = stats.sigma;
  out.stage = NormalizationStage::kStandardized;
  return out;
}

NormalizedProfile unstandardize(const NormalizedProfile& norm) {
  if (norm.stage != NormalizationStage::kStandardized)
    throw InvalidArgument("unstandardize: input is not standardized");
  NormalizedProfile out = norm;
  out.values = norm.values.array() * (6.0 * norm.sigma) + norm.mean;
  out.stage = NormalizationStage::kMinMax;
  return out;
}

Eigen::VectorXd denormalize(const NormalizedProfile& norm) {
  const NormalizedProfile minmax =
      norm.stage == NormalizationStage::kStandardized ? unstandardize(norm) : norm;
  return (minmax.values.array() * (minmax.max - minmax.min) + minmax.min).matrix();
}

std::vector<NormalizedProfile> standardize_all(std::span<const RoughnessProfile> profiles,
                                               const PopulationStats& stats) {
  std::vector<NormalizedProfile> out;
  out.reserve(profiles.size());
  for (const auto& p : profiles) out.push_back(standardize(normalize_minmax(p), stats));
  return out;
}

PopulationStats fit_population_stats(std::span<const RoughnessProfile> profiles) {
  std::vector<NormalizedProfile> norms;
  norms.reserve(profiles.size());
  for (const auto& p : profiles) norms.push_back(normalize_minmax(p));
  return population_stats(norms);
}

}  // namespace tapelab
