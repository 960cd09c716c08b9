#pragma once

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tapelab/error.hpp"

namespace tapelab {

/// Transverse surface profile sampled on a uniform grid. Heights in micrometres.
struct RoughnessProfile {
  std::string id;
  Eigen::VectorXd heights;
  double spacing = 0.0;      // sample distance along the tape width, um
  std::optional<int> label;  // class index in 1..C

  Eigen::Index size() const { return heights.size(); }
  double width() const { return static_cast<double>(heights.size() - 1) * spacing; }

  /// Throws InvalidData unless N >= 2, spacing > 0 and every height is finite.
  void validate() const;
};

/// Micro-roughness: the profile with its long-wavelength component removed.
/// `heights` holds the micro part, `macro` the removed part; their sum is the source profile.
struct MicroProfile : RoughnessProfile {
  Eigen::VectorXd macro;

  RoughnessProfile source() const;
};

enum class NormalizationStage { kMinMax, kStandardized };

/// Population statistics of min-max normalized values, fixed on the training split.
struct PopulationStats {
  double mean = 0.0;
  double sigma = 0.0;
};

struct NormalizedProfile {
  std::string id;
  std::optional<int> label;
  Eigen::VectorXd values;
  double min = 0.0;    // um
  double max = 0.0;    // um
  double mean = 0.0;   // population mean of the min-max values (standardized stage only)
  double sigma = 0.0;  // population std of the min-max values (standardized stage only)
  NormalizationStage stage = NormalizationStage::kMinMax;
};

struct DecomposeOptions {
  double cutoff_um = 800.0;
};

/// Zero-phase Gaussian low-pass with 50 % transmission at `cutoff` (same unit as `spacing`).
/// The kernel is truncated at +/- cutoff and renormalized; boundaries are mirror-reflected.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> gaussian_lowpass(
    const Eigen::MatrixBase<Derived>& signal, typename Derived::Scalar spacing,
    typename Derived::Scalar cutoff) {
  using Scalar = typename Derived::Scalar;
  using Index = Eigen::Index;
  const Index n = signal.size();
  if (n < 2) throw InvalidArgument("gaussian_lowpass: need at least two samples");
  if (!(spacing > 0) || !(cutoff >= 2 * spacing))
    throw InvalidArgument("gaussian_lowpass: cutoff must be at least twice the sample spacing");

  const Scalar alpha = std::sqrt(std::numbers::ln2_v<Scalar> / std::numbers::pi_v<Scalar>);
  const Scalar scale = alpha * cutoff;
  const Index half = static_cast<Index>(std::ceil(cutoff / spacing));
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> kernel(2 * half + 1);
  for (Index k = -half; k <= half; ++k) {
    const Scalar x = static_cast<Scalar>(k) * spacing / scale;
    kernel(k + half) = std::exp(-std::numbers::pi_v<Scalar> * x * x);
  }
  kernel /= kernel.sum();

  const Index period = 2 * (n - 1);
  auto reflect = [&](Index j) {
    Index m = j % period;
    if (m < 0) m += period;
    return m > n - 1 ? period - m : m;
  };

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(n);
  for (Index i = 0; i < n; ++i) {
    Scalar acc = 0;
    for (Index k = -half; k <= half; ++k) acc += kernel(k + half) * signal(reflect(i + k));
    out(i) = acc;
  }
  return out;
}

/// Splits a profile into macro (Gaussian low-pass) and micro (residual) components.
MicroProfile decompose(const RoughnessProfile& profile, const DecomposeOptions& options = {});

/// Maps heights affinely onto [0, 1]. Throws DegenerateInput for a flat profile.
NormalizedProfile normalize_minmax(const RoughnessProfile& profile);

/// Pooled mean and standard deviation over every value of every profile.
PopulationStats population_stats(std::span<const NormalizedProfile> population);

/// (v - mean) / (6 sigma) applied to min-max values.
NormalizedProfile standardize(const NormalizedProfile& norm, const PopulationStats& stats);

/// Inverse of standardize().
NormalizedProfile unstandardize(const NormalizedProfile& norm);

/// Inverse of the full chain: recovers heights in micrometres from either stage.
Eigen::VectorXd denormalize(const NormalizedProfile& norm);

/// Convenience: minmax + standardize every profile with shared stats.
std::vector<NormalizedProfile> standardize_all(std::span<const RoughnessProfile> profiles,
                                               const PopulationStats& stats);

/// Computes stats on `profiles` (minmax stage) and returns them.
PopulationStats fit_population_stats(std::span<const RoughnessProfile> profiles);

}  // namespace tapelab
